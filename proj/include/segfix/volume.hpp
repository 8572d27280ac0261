#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace segfix {

using Label = std::uint64_t;

/// Extent of a volume or window in voxels. Every axis is at least one voxel.
struct Shape3 {
  int x = 1;
  int y = 1;
  int z = 1;

  Shape3() = default;
  Shape3(int x_, int y_, int z_) : x(x_), y(y_), z(z_) {
    if (x < 1 || y < 1 || z < 1) {
      throw std::invalid_argument("Shape3: every dimension must be >= 1");
    }
  }

  std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) *
           static_cast<std::size_t>(z);
  }
  bool odd() const { return (x % 2 == 1) && (y % 2 == 1) && (z % 2 == 1); }
  int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Physical voxel extent in nanometers.
struct VoxelSize {
  double dx = 1.0;
  double dy = 1.0;
  double dz = 1.0;

  VoxelSize() = default;
  VoxelSize(double dx_, double dy_, double dz_) : dx(dx_), dy(dy_), dz(dz_) {
    if (!(dx > 0.0 && dy > 0.0 && dz > 0.0)) {
      throw std::invalid_argument("VoxelSize: every extent must be > 0");
    }
  }

  friend bool operator==(const VoxelSize&, const VoxelSize&) = default;
};

struct Point3 {
  int x = 0;
  int y = 0;
  int z = 0;

  int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  friend bool operator==(const Point3&, const Point3&) = default;
  friend auto operator<=>(const Point3& a, const Point3& b) {
    // z-major ordering, matching the on-disk layout
    if (auto c = a.z <=> b.z; c != 0) return c;
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

/// Half-open axis-aligned box [min, max).
struct Box3 {
  Point3 min;
  Point3 max;

  static Box3 of(const Shape3& s) { return Box3{{0, 0, 0}, {s.x, s.y, s.z}}; }

  bool empty() const { return max.x <= min.x || max.y <= min.y || max.z <= min.z; }
  Shape3 shape() const { return Shape3(max.x - min.x, max.y - min.y, max.z - min.z); }
  std::size_t count() const {
    return empty() ? 0
                   : static_cast<std::size_t>(max.x - min.x) *
                         static_cast<std::size_t>(max.y - min.y) *
                         static_cast<std::size_t>(max.z - min.z);
  }
  bool contains(const Point3& p) const {
    return p.x >= min.x && p.x < max.x && p.y >= min.y && p.y < max.y && p.z >= min.z &&
           p.z < max.z;
  }
  bool contains(const Box3& b) const {
    return b.empty() || (b.min.x >= min.x && b.min.y >= min.y && b.min.z >= min.z &&
                         b.max.x <= max.x && b.max.y <= max.y && b.max.z <= max.z);
  }
  Box3 intersect(const Box3& o) const;
  Box3 dilate(int rx, int ry, int rz) const;
  /// Smallest box holding both; an empty operand is ignored.
  Box3 hull(const Box3& o) const;
  Box3 hull(const Point3& p) const { return hull(Box3{p, {p.x + 1, p.y + 1, p.z + 1}}); }

  friend bool operator==(const Box3&, const Box3&) = default;
};

/// Dense 3D grid stored z-major, then y, then x (x varies fastest).
template <typename T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;
  explicit Volume(Shape3 shape, T fill = T{}, VoxelSize voxel_size = {})
      : shape_(shape), voxel_size_(voxel_size), data_(shape.count(), fill) {}
  Volume(Shape3 shape, std::vector<T> data, VoxelSize voxel_size = {})
      : shape_(shape), voxel_size_(voxel_size), data_(std::move(data)) {
    if (data_.size() != shape_.count()) {
      throw std::invalid_argument("Volume: data length does not match shape");
    }
  }

  const Shape3& shape() const { return shape_; }
  const VoxelSize& voxel_size() const { return voxel_size_; }
  void set_voxel_size(VoxelSize v) { voxel_size_ = v; }
  Box3 bounds() const { return Box3::of(shape_); }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(shape_.y) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(shape_.x) +
           static_cast<std::size_t>(x);
  }
  std::size_t index(const Point3& p) const { return index(p.x, p.y, p.z); }
  Point3 point(std::size_t i) const {
    const auto sx = static_cast<std::size_t>(shape_.x);
    const auto sy = static_cast<std::size_t>(shape_.y);
    return Point3{static_cast<int>(i % sx), static_cast<int>((i / sx) % sy),
                  static_cast<int>(i / (sx * sy))};
  }

  T& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
  const T& operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
  T& operator[](const Point3& p) { return data_[index(p)]; }
  const T& operator[](const Point3& p) const { return data_[index(p)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  /// Copy of the voxels inside `box`, which must lie within the volume.
  Volume crop(const Box3& box) const {
    if (!bounds().contains(box)) {
      throw std::out_of_range("Volume::crop: box outside volume");
    }
    Volume out(box.shape(), T{}, voxel_size_);
    for (int z = box.min.z; z < box.max.z; ++z) {
      for (int y = box.min.y; y < box.max.y; ++y) {
        for (int x = box.min.x; x < box.max.x; ++x) {
          out(x - box.min.x, y - box.min.y, z - box.min.z) = (*this)(x, y, z);
        }
      }
    }
    return out;
  }

  friend bool operator==(const Volume& a, const Volume& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape3 shape_;
  VoxelSize voxel_size_;
  std::vector<T> data_;
};

using LabelVolume = Volume<Label>;
using RawVolume = Volume<float>;
using ObjectMask = Volume<std::uint8_t>;

enum class BorderMode { valid, clipped };

BorderMode parse_border_mode(const std::string& s);
std::string to_string(BorderMode m);

/// Box of `window` centered at `center`. Valid mode throws when the window
/// leaves the volume; clipped mode intersects it with the volume.
Box3 window_box(const Shape3& volume, const Point3& center, const Shape3& window,
                BorderMode mode);

template <typename T>
struct WindowView {
  Box3 box;
  Volume<T> data;
};

template <typename T>
WindowView<T> window_view(const Volume<T>& vol, const Point3& center, const Shape3& window,
                          BorderMode mode) {
  Box3 box = window_box(vol.shape(), center, window, mode);
  return WindowView<T>{box, vol.crop(box)};
}

/// Binary mask of the voxels carrying `label`; label 0 is rejected.
ObjectMask object_mask(const LabelVolume& vol, Label label);

// On-disk format: a raw little-endian array plus a JSON sidecar next to it.
enum class VolumeKind { label, raw };

struct VolumeHeader {
  Shape3 dims;
  VolumeKind kind = VolumeKind::label;
  int bytes_per_element = 1;
  VoxelSize voxel_size{3.6, 3.6, 40.0};
};

std::filesystem::path default_sidecar(const std::filesystem::path& data_path);

VolumeHeader read_header(const std::filesystem::path& sidecar);

std::variant<LabelVolume, RawVolume> read_volume(const std::filesystem::path& path,
                                                 const std::filesystem::path& sidecar);
std::variant<LabelVolume, RawVolume> read_volume(const std::filesystem::path& path);

LabelVolume read_label_volume(const std::filesystem::path& path);
RawVolume read_raw_volume(const std::filesystem::path& path);

/// Writes labels with the narrowest element width holding the largest label
/// unless `bytes_per_element` is given (1, 2, 4 or 8).
void write_volume(const LabelVolume& vol, const std::filesystem::path& path,
                  int bytes_per_element = 0);
/// Raw volumes are written as float32.
void write_volume(const RawVolume& vol, const std::filesystem::path& path);

}  // namespace segfix
