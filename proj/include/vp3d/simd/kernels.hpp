#pragma once
// Data-parallel inner loops used by perception, registration and lifting.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2 variant. The variant is picked once at runtime from
// CPUID; the environment variable VP3D_SIMD=scalar forces the reference path.
// All variants are required to produce bit-identical output (no FMA
// contraction, same operation order), which tests/test_simd.cpp enforces.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace vp3d::simd {

enum class Isa { scalar, avx2 };

// A 2D capsule (segment swept by a disc) in pixel coordinates. Pixel (x, y)
// has its center at integer coordinates. With flat_end set, the cap at the
// segment's end point is cut off perpendicular to the segment.
struct Capsule {
  double ax = 0, ay = 0;   // start point
  double dx = 0, dy = 0;   // end - start
  double inv_len2 = 0;     // 1 / |d|^2, or 0 for a degenerate segment
  double radius2 = 0;
  bool flat_end = false;

  static Capsule make(double ax, double ay, double bx, double by, double radius, bool flat_end = false);
};

struct KernelTable {
  // out[i] = (xs[i] - qx)^2 + (ys[i] - qy)^2
  void (*squared_distances_2d)(const double* xs, const double* ys, std::size_t n,
                               double qx, double qy, double* out);
  // out[i] = (xs[i] - qx)^2 + (ys[i] - qy)^2 + (zs[i] - qz)^2
  void (*squared_distances_3d)(const double* xs, const double* ys, const double* zs, std::size_t n,
                               double qx, double qy, double qz, double* out);
  // One Zhang-Suen sub-iteration over a row of a zero-padded 0/1 image.
  // `above`, `row`, `below` point at interior column 0; index -1 and n must be
  // readable. deletable[x] = 1 iff row[x] is set and the sub-iteration
  // (pass 0 or 1) removes it. The neighbour count bound is 3 <= B <= 6
  // (the Lu-Wang form), which keeps the ends of two-pixel diagonal strokes.
  void (*zhang_suen_row)(const std::uint8_t* above, const std::uint8_t* row, const std::uint8_t* below,
                         std::size_t n, int pass, std::uint8_t* deletable);
  // row[x] = min(row[x], value) for x in [x_begin, x_end) covered by the capsule at height y.
  void (*capsule_fill_row)(std::uint8_t* row, std::size_t x_begin, std::size_t x_end, double y,
                           const Capsule& capsule, std::uint8_t value);
};

bool isa_available(Isa isa);
std::string_view isa_name(Isa isa);

// Kernel table of the ISA selected at startup.
const KernelTable& kernels();
Isa active_isa();

// Kernel table of a specific ISA; throws std::runtime_error if the CPU or
// build lacks it. Used by the equivalence tests and benchmarks.
const KernelTable& kernels(Isa isa);

// Convenience wrappers over the active table.
void squared_distances(std::span<const double> xs, std::span<const double> ys, double qx, double qy,
                       std::span<double> out);
void squared_distances(std::span<const double> xs, std::span<const double> ys, std::span<const double> zs,
                       double qx, double qy, double qz, std::span<double> out);

namespace detail {
extern const KernelTable scalar_table;
#if defined(VP3D_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace vp3d::simd
