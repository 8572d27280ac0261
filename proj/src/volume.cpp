#include "segfix/volume.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace segfix {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "volume I/O assumes a little-endian host");

Box3 Box3::intersect(const Box3& o) const {
  Box3 r{{std::max(min.x, o.min.x), std::max(min.y, o.min.y), std::max(min.z, o.min.z)},
         {std::min(max.x, o.max.x), std::min(max.y, o.max.y), std::min(max.z, o.max.z)}};
  if (r.empty()) {
    r.max = r.min;
  }
  return r;
}

Box3 Box3::dilate(int rx, int ry, int rz) const {
  return Box3{{min.x - rx, min.y - ry, min.z - rz}, {max.x + rx, max.y + ry, max.z + rz}};
}

Box3 Box3::hull(const Box3& o) const {
  if (o.empty()) return *this;
  if (empty()) return o;
  return Box3{{std::min(min.x, o.min.x), std::min(min.y, o.min.y), std::min(min.z, o.min.z)},
              {std::max(max.x, o.max.x), std::max(max.y, o.max.y), std::max(max.z, o.max.z)}};
}

BorderMode parse_border_mode(const std::string& s) {
  if (s == "valid") return BorderMode::valid;
  if (s == "clipped") return BorderMode::clipped;
  throw std::invalid_argument("unknown border mode '" + s + "'");
}

std::string to_string(BorderMode m) { return m == BorderMode::valid ? "valid" : "clipped"; }

Box3 window_box(const Shape3& volume, const Point3& center, const Shape3& window,
                BorderMode mode) {
  if (!window.odd()) {
    throw std::invalid_argument("window dimensions must be odd");
  }
  const Box3 bounds = Box3::of(volume);
  if (!bounds.contains(center)) {
    throw std::out_of_range("window center outside volume");
  }
  const int rx = window.x / 2, ry = window.y / 2, rz = window.z / 2;
  Box3 box{{center.x - rx, center.y - ry, center.z - rz},
           {center.x + rx + 1, center.y + ry + 1, center.z + rz + 1}};
  if (mode == BorderMode::valid) {
    if (!bounds.contains(box)) {
      throw std::out_of_range("window does not fit inside the volume");
    }
    return box;
  }
  return box.intersect(bounds);
}

ObjectMask object_mask(const LabelVolume& vol, Label label) {
  if (label == 0) {
    throw std::invalid_argument("object_mask: label 0 is background, not an object");
  }
  ObjectMask mask(vol.shape(), 0, vol.voxel_size());
  for (std::size_t i = 0; i < vol.size(); ++i) {
    mask[i] = vol[i] == label ? 1 : 0;
  }
  return mask;
}

fs::path default_sidecar(const fs::path& data_path) {
  fs::path p = data_path;
  p += ".json";
  return p;
}

VolumeHeader read_header(const fs::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) {
    throw std::runtime_error("missing sidecar: " + sidecar.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed sidecar " + sidecar.string() + ": " + e.what());
  }
  VolumeHeader h;
  try {
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() != 3) {
      throw std::runtime_error("sidecar dims must have three entries");
    }
    h.dims = Shape3(dims[0], dims[1], dims[2]);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "label") {
      h.kind = VolumeKind::label;
    } else if (kind == "raw") {
      h.kind = VolumeKind::raw;
    } else {
      throw std::runtime_error("unknown volume kind '" + kind + "'");
    }
    h.bytes_per_element = j.at("bytes_per_element").get<int>();
    if (j.contains("voxel_size_nm")) {
      const auto vs = j.at("voxel_size_nm").get<std::vector<double>>();
      if (vs.size() != 3) {
        throw std::runtime_error("sidecar voxel_size_nm must have three entries");
      }
      h.voxel_size = VoxelSize(vs[0], vs[1], vs[2]);
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid sidecar " + sidecar.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("invalid sidecar " + sidecar.string() + ": " + e.what());
  }
  const int w = h.bytes_per_element;
  const bool ok = h.kind == VolumeKind::label ? (w == 1 || w == 2 || w == 4 || w == 8)
                                              : (w == 1 || w == 4);
  if (!ok) {
    throw std::runtime_error("unsupported element width " + std::to_string(w));
  }
  return h;
}

namespace {

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open volume data: " + path.string());
  }
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

template <typename Src>
void widen_into(const std::vector<char>& bytes, std::vector<Label>& out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    Src v;
    std::memcpy(&v, bytes.data() + i * sizeof(Src), sizeof(Src));
    out[i] = static_cast<Label>(v);
  }
}

template <typename Dst>
void narrow_into(const std::vector<Label>& in, std::vector<char>& bytes) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto v = static_cast<Dst>(in[i]);
    std::memcpy(bytes.data() + i * sizeof(Dst), &v, sizeof(Dst));
  }
}

void write_file(const fs::path& path, const std::vector<char>& bytes, const json& sidecar) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write volume data: " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw std::runtime_error("short write: " + path.string());
    }
  }
  std::ofstream side(default_sidecar(path), std::ios::trunc);
  if (!side) {
    throw std::runtime_error("cannot write sidecar for " + path.string());
  }
  side << sidecar.dump(2) << '\n';
}

json sidecar_json(const Shape3& s, const char* kind, int width, const VoxelSize& vs) {
  return json{{"dims", {s.x, s.y, s.z}},
              {"kind", kind},
              {"bytes_per_element", width},
              {"voxel_size_nm", {vs.dx, vs.dy, vs.dz}}};
}

}  // namespace

std::variant<LabelVolume, RawVolume> read_volume(const fs::path& path, const fs::path& sidecar) {
  const VolumeHeader h = read_header(sidecar);
  const std::vector<char> bytes = read_bytes(path);
  const std::size_t expected = h.dims.count() * static_cast<std::size_t>(h.bytes_per_element);
  if (bytes.size() != expected) {
    throw std::runtime_error("size mismatch for " + path.string() + ": expected " +
                             std::to_string(expected) + " bytes, found " +
                             std::to_string(bytes.size()));
  }
  if (h.kind == VolumeKind::label) {
    std::vector<Label> data(h.dims.count());
    switch (h.bytes_per_element) {
      case 1: widen_into<std::uint8_t>(bytes, data); break;
      case 2: widen_into<std::uint16_t>(bytes, data); break;
      case 4: widen_into<std::uint32_t>(bytes, data); break;
      default: widen_into<std::uint64_t>(bytes, data); break;
    }
    return LabelVolume(h.dims, std::move(data), h.voxel_size);
  }
  std::vector<float> data(h.dims.count());
  if (h.bytes_per_element == 1) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      data[i] = static_cast<float>(static_cast<unsigned char>(bytes[i]));
    }
  } else {
    std::memcpy(data.data(), bytes.data(), bytes.size());
  }
  return RawVolume(h.dims, std::move(data), h.voxel_size);
}

std::variant<LabelVolume, RawVolume> read_volume(const fs::path& path) {
  return read_volume(path, default_sidecar(path));
}

LabelVolume read_label_volume(const fs::path& path) {
  auto v = read_volume(path);
  if (auto* l = std::get_if<LabelVolume>(&v)) return std::move(*l);
  throw std::runtime_error(path.string() + " is not a label volume");
}

RawVolume read_raw_volume(const fs::path& path) {
  auto v = read_volume(path);
  if (auto* r = std::get_if<RawVolume>(&v)) return std::move(*r);
  throw std::runtime_error(path.string() + " is not a raw volume");
}

void write_volume(const LabelVolume& vol, const fs::path& path, int bytes_per_element) {
  int width = bytes_per_element;
  const Label top = vol.size() ? *std::max_element(vol.data().begin(), vol.data().end()) : 0;
  if (width == 0) {
    width = top <= std::numeric_limits<std::uint8_t>::max()    ? 1
            : top <= std::numeric_limits<std::uint16_t>::max() ? 2
            : top <= std::numeric_limits<std::uint32_t>::max() ? 4
                                                               : 8;
  }
  if (width != 1 && width != 2 && width != 4 && width != 8) {
    throw std::invalid_argument("unsupported element width " + std::to_string(width));
  }
  if (width < 8 && top >> (8 * width) != 0) {
    throw std::invalid_argument("label " + std::to_string(top) + " does not fit in " +
                                std::to_string(width) + " bytes");
  }
  std::vector<char> bytes(vol.size() * static_cast<std::size_t>(width));
  switch (width) {
    case 1: narrow_into<std::uint8_t>(vol.data(), bytes); break;
    case 2: narrow_into<std::uint16_t>(vol.data(), bytes); break;
    case 4: narrow_into<std::uint32_t>(vol.data(), bytes); break;
    default: narrow_into<std::uint64_t>(vol.data(), bytes); break;
  }
  write_file(path, bytes, sidecar_json(vol.shape(), "label", width, vol.voxel_size()));
}

void write_volume(const RawVolume& vol, const fs::path& path) {
  std::vector<char> bytes(vol.size() * sizeof(float));
  std::memcpy(bytes.data(), vol.data().data(), bytes.size());
  write_file(path, bytes, sidecar_json(vol.shape(), "raw", 4, vol.voxel_size()));
}

}  // namespace segfix
