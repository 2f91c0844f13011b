#include "vp3d/simd/kernels.hpp"

#include <algorithm>

namespace vp3d::simd {
namespace {

void squared_distances_2d(const double* xs, const double* ys, std::size_t n, double qx, double qy, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    out[i] = dx * dx + dy * dy;
  }
}

void squared_distances_3d(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                          double qy, double qz, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double dz = zs[i] - qz;
    out[i] = dx * dx + dy * dy + dz * dz;
  }
}

// Neighbour naming follows Zhang & Suen:
//   p9 p2 p3
//   p8 p1 p4
//   p7 p6 p5
void zhang_suen_row(const std::uint8_t* above, const std::uint8_t* row, const std::uint8_t* below, std::size_t n,
                    int pass, std::uint8_t* deletable) {
  for (std::size_t x = 0; x < n; ++x) {
    deletable[x] = 0;
    if (!row[x]) continue;
    const int p2 = above[x], p3 = above[x + 1], p4 = row[x + 1], p5 = below[x + 1];
    const int p6 = below[x], p7 = below[x - 1], p8 = row[x - 1], p9 = above[x - 1];
    const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
    if (b < 3 || b > 6) continue;
    const int a = (!p2 && p3) + (!p3 && p4) + (!p4 && p5) + (!p5 && p6) + (!p6 && p7) + (!p7 && p8) +
                  (!p8 && p9) + (!p9 && p2);
    if (a != 1) continue;
    if (pass == 0) {
      if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
    } else {
      if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
    }
    deletable[x] = 1;
  }
}

void capsule_fill_row(std::uint8_t* row, std::size_t x_begin, std::size_t x_end, double y, const Capsule& c,
                      std::uint8_t value) {
  const double py = y - c.ay;
  for (std::size_t x = x_begin; x < x_end; ++x) {
    const double px = static_cast<double>(x) - c.ax;
    const double t_raw = (px * c.dx + py * c.dy) * c.inv_len2;
    if (c.flat_end && t_raw > 1.0) continue;
    const double t = std::min(std::max(t_raw, 0.0), 1.0);
    const double ex = px - t * c.dx;
    const double ey = py - t * c.dy;
    if (ex * ex + ey * ey <= c.radius2) row[x] = std::min(row[x], value);
  }
}

}  // namespace

namespace detail {
const KernelTable scalar_table{&squared_distances_2d, &squared_distances_3d, &zhang_suen_row, &capsule_fill_row};
}

}  // namespace vp3d::simd
