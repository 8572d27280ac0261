#pragma once

#include <cstdint>
#include <vector>

#include "segfix/volume.hpp"

namespace segfix {

/// Summed-volume table over a box of a larger grid. Counts of an indicator
/// over any sub-box are answered in O(1) by inclusion-exclusion.
class BoxSum {
 public:
  /// `indicator(i)` is queried with the flat index of each voxel of `extent`
  /// in the grid of shape `grid`.
  template <typename Indicator>
  BoxSum(const Shape3& grid, const Box3& extent, Indicator&& indicator)
      : extent_(extent),
        nx_(extent.max.x - extent.min.x + 1),
        ny_(extent.max.y - extent.min.y + 1),
        table_(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_) *
                   static_cast<std::size_t>(extent.max.z - extent.min.z + 1),
               0) {
    const std::size_t gx = static_cast<std::size_t>(grid.x);
    const std::size_t gxy = gx * static_cast<std::size_t>(grid.y);
    for (int z = extent.min.z; z < extent.max.z; ++z) {
      for (int y = extent.min.y; y < extent.max.y; ++y) {
        std::size_t g = static_cast<std::size_t>(z) * gxy + static_cast<std::size_t>(y) * gx +
                        static_cast<std::size_t>(extent.min.x);
        const int lz = z - extent.min.z + 1, ly = y - extent.min.y + 1;
        for (int lx = 1; lx < nx_; ++lx, ++g) {
          const std::uint32_t v = indicator(g) ? 1u : 0u;
          at(lx, ly, lz) = v + at(lx - 1, ly, lz) + at(lx, ly - 1, lz) + at(lx, ly, lz - 1) -
                           at(lx - 1, ly - 1, lz) - at(lx - 1, ly, lz - 1) -
                           at(lx, ly - 1, lz - 1) + at(lx - 1, ly - 1, lz - 1);
        }
      }
    }
  }

  /// Count over `box` intersected with the table's extent.
  std::uint32_t sum(const Box3& box) const {
    const Box3 b = box.intersect(extent_);
    if (b.empty()) return 0;
    const int x0 = b.min.x - extent_.min.x, x1 = b.max.x - extent_.min.x;
    const int y0 = b.min.y - extent_.min.y, y1 = b.max.y - extent_.min.y;
    const int z0 = b.min.z - extent_.min.z, z1 = b.max.z - extent_.min.z;
    return at(x1, y1, z1) - at(x0, y1, z1) - at(x1, y0, z1) - at(x1, y1, z0) + at(x0, y0, z1) +
           at(x0, y1, z0) + at(x1, y0, z0) - at(x0, y0, z0);
  }

  const Box3& extent() const { return extent_; }

 private:
  std::uint32_t& at(int x, int y, int z) {
    return table_[(static_cast<std::size_t>(z) * static_cast<std::size_t>(ny_) +
                   static_cast<std::size_t>(y)) *
                      static_cast<std::size_t>(nx_) +
                  static_cast<std::size_t>(x)];
  }
  std::uint32_t at(int x, int y, int z) const {
    return table_[(static_cast<std::size_t>(z) * static_cast<std::size_t>(ny_) +
                   static_cast<std::size_t>(y)) *
                      static_cast<std::size_t>(nx_) +
                  static_cast<std::size_t>(x)];
  }

  Box3 extent_;
  int nx_;
  int ny_;
  std::vector<std::uint32_t> table_;
};

/// Box of `window` around `c`, without clipping.
inline Box3 centered_box(const Point3& c, const Shape3& window) {
  const int rx = window.x / 2, ry = window.y / 2, rz = window.z / 2;
  return Box3{{c.x - rx, c.y - ry, c.z - rz}, {c.x + rx + 1, c.y + ry + 1, c.z + rz + 1}};
}

}  // namespace segfix
