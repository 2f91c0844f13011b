#include "vp3d/simd/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace vp3d::simd {

Capsule Capsule::make(double ax, double ay, double bx, double by, double radius, bool flat_end) {
  Capsule c;
  c.ax = ax;
  c.ay = ay;
  c.dx = bx - ax;
  c.dy = by - ay;
  const double len2 = c.dx * c.dx + c.dy * c.dy;
  c.inv_len2 = len2 > 0.0 ? 1.0 / len2 : 0.0;
  c.radius2 = radius * radius;
  c.flat_end = flat_end;
  return c;
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(VP3D_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

namespace {

Isa select_isa() {
  if (const char* forced = std::getenv("VP3D_SIMD"); forced && std::string(forced) == "scalar") return Isa::scalar;
  return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

}  // namespace

Isa active_isa() {
  static const Isa isa = select_isa();
  return isa;
}

const KernelTable& kernels(Isa isa) {
  if (!isa_available(isa)) throw std::runtime_error("SIMD kernels unavailable: " + std::string(isa_name(isa)));
#if defined(VP3D_HAVE_AVX2)
  if (isa == Isa::avx2) return detail::avx2_table;
#endif
  return detail::scalar_table;
}

const KernelTable& kernels() {
  static const KernelTable& table = kernels(active_isa());
  return table;
}

void squared_distances(std::span<const double> xs, std::span<const double> ys, double qx, double qy,
                       std::span<double> out) {
  if (ys.size() != xs.size() || out.size() < xs.size())
    throw std::invalid_argument("squared_distances: size mismatch");
  kernels().squared_distances_2d(xs.data(), ys.data(), xs.size(), qx, qy, out.data());
}

void squared_distances(std::span<const double> xs, std::span<const double> ys, std::span<const double> zs,
                       double qx, double qy, double qz, std::span<double> out) {
  if (ys.size() != xs.size() || zs.size() != xs.size() || out.size() < xs.size())
    throw std::invalid_argument("squared_distances: size mismatch");
  kernels().squared_distances_3d(xs.data(), ys.data(), zs.data(), xs.size(), qx, qy, qz, out.data());
}

}  // namespace vp3d::simd
