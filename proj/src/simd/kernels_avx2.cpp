#include "vp3d/simd/kernels.hpp"

#include <immintrin.h>

namespace vp3d::simd {
namespace {

void squared_distances_2d(const double* xs, const double* ys, std::size_t n, double qx, double qy, double* out) {
  const __m256d vqx = _mm256_set1_pd(qx);
  const __m256d vqy = _mm256_set1_pd(qy);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vqx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vqy);
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)));
  }
  for (; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    out[i] = dx * dx + dy * dy;
  }
}

void squared_distances_3d(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                          double qy, double qz, double* out) {
  const __m256d vqx = _mm256_set1_pd(qx);
  const __m256d vqy = _mm256_set1_pd(qy);
  const __m256d vqz = _mm256_set1_pd(qz);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vqx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vqy);
    const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), vqz);
    const __m256d s = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    _mm256_storeu_pd(out + i, _mm256_add_pd(s, _mm256_mul_pd(dz, dz)));
  }
  for (; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double dz = zs[i] - qz;
    out[i] = dx * dx + dy * dy + dz * dz;
  }
}

inline __m256i load(const std::uint8_t* p) { return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p)); }

// (!a && b) on 0/1 bytes
inline __m256i rising(__m256i a, __m256i b) { return _mm256_andnot_si256(a, b); }

void zhang_suen_row(const std::uint8_t* above, const std::uint8_t* row, const std::uint8_t* below, std::size_t n,
                    int pass, std::uint8_t* deletable) {
  const __m256i zero = _mm256_setzero_si256();
  const __m256i one = _mm256_set1_epi8(1);
  const __m256i two = _mm256_set1_epi8(2);
  const __m256i seven = _mm256_set1_epi8(7);
  std::size_t x = 0;
  for (; x + 32 <= n; x += 32) {
    const __m256i p1 = load(row + x);
    const __m256i p2 = load(above + x);
    const __m256i p3 = load(above + x + 1);
    const __m256i p4 = load(row + x + 1);
    const __m256i p5 = load(below + x + 1);
    const __m256i p6 = load(below + x);
    const __m256i p7 = load(below + x - 1);
    const __m256i p8 = load(row + x - 1);
    const __m256i p9 = load(above + x - 1);

    __m256i b = _mm256_add_epi8(_mm256_add_epi8(p2, p3), _mm256_add_epi8(p4, p5));
    b = _mm256_add_epi8(b, _mm256_add_epi8(_mm256_add_epi8(p6, p7), _mm256_add_epi8(p8, p9)));

    __m256i a = _mm256_add_epi8(rising(p2, p3), rising(p3, p4));
    a = _mm256_add_epi8(a, _mm256_add_epi8(rising(p4, p5), rising(p5, p6)));
    a = _mm256_add_epi8(a, _mm256_add_epi8(rising(p6, p7), rising(p7, p8)));
    a = _mm256_add_epi8(a, _mm256_add_epi8(rising(p8, p9), rising(p9, p2)));

    __m256i m1, m2;
    if (pass == 0) {
      m1 = _mm256_and_si256(_mm256_and_si256(p2, p4), p6);
      m2 = _mm256_and_si256(_mm256_and_si256(p4, p6), p8);
    } else {
      m1 = _mm256_and_si256(_mm256_and_si256(p2, p4), p8);
      m2 = _mm256_and_si256(_mm256_and_si256(p2, p6), p8);
    }

    __m256i keep = _mm256_cmpeq_epi8(p1, one);
    keep = _mm256_and_si256(keep, _mm256_cmpgt_epi8(b, two));
    keep = _mm256_and_si256(keep, _mm256_cmpgt_epi8(seven, b));
    keep = _mm256_and_si256(keep, _mm256_cmpeq_epi8(a, one));
    keep = _mm256_and_si256(keep, _mm256_cmpeq_epi8(m1, zero));
    keep = _mm256_and_si256(keep, _mm256_cmpeq_epi8(m2, zero));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(deletable + x), _mm256_and_si256(keep, one));
  }
  if (x < n) detail::scalar_table.zhang_suen_row(above + x, row + x, below + x, n - x, pass, deletable + x);
}

void capsule_fill_row(std::uint8_t* row, std::size_t x_begin, std::size_t x_end, double y, const Capsule& c,
                      std::uint8_t value) {
  const double py_s = y - c.ay;
  const __m256d py = _mm256_set1_pd(py_s);
  const __m256d ax = _mm256_set1_pd(c.ax);
  const __m256d dx = _mm256_set1_pd(c.dx);
  const __m256d dy = _mm256_set1_pd(c.dy);
  const __m256d inv = _mm256_set1_pd(c.inv_len2);
  const __m256d r2 = _mm256_set1_pd(c.radius2);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d pydy = _mm256_mul_pd(py, dy);
  std::size_t x = x_begin;
  for (; x + 4 <= x_end; x += 4) {
    const double xd = static_cast<double>(x);
    const __m256d xs = _mm256_set_pd(xd + 3.0, xd + 2.0, xd + 1.0, xd);
    const __m256d px = _mm256_sub_pd(xs, ax);
    const __m256d t_raw = _mm256_mul_pd(_mm256_add_pd(_mm256_mul_pd(px, dx), pydy), inv);
    const __m256d t = _mm256_min_pd(_mm256_max_pd(t_raw, zero), one);
    const __m256d ex = _mm256_sub_pd(px, _mm256_mul_pd(t, dx));
    const __m256d ey = _mm256_sub_pd(py, _mm256_mul_pd(t, dy));
    __m256d hit = _mm256_cmp_pd(_mm256_add_pd(_mm256_mul_pd(ex, ex), _mm256_mul_pd(ey, ey)), r2, _CMP_LE_OQ);
    if (c.flat_end) hit = _mm256_and_pd(hit, _mm256_cmp_pd(t_raw, one, _CMP_LE_OQ));
    const int mask = _mm256_movemask_pd(hit);
    if (mask == 0) continue;
    for (int k = 0; k < 4; ++k) {
      if ((mask >> k) & 1) row[x + k] = row[x + k] < value ? row[x + k] : value;
    }
  }
  if (x < x_end) detail::scalar_table.capsule_fill_row(row, x, x_end, y, c, value);
}

}  // namespace

namespace detail {
const KernelTable avx2_table{&squared_distances_2d, &squared_distances_3d, &zhang_suen_row, &capsule_fill_row};
}

}  // namespace vp3d::simd
