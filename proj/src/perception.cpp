#include "vp3d/perception.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>

#include "vp3d/errors.hpp"
#include "vp3d/simd/kernels.hpp"

namespace vp3d {

// ---------------------------------------------------------------------------
// Rendering

namespace {

void fill_capsule(GrayImage& img, const Vec2& a, const Vec2& b, double radius, bool flat_end, std::uint8_t value) {
  const auto capsule = simd::Capsule::make(a.x(), a.y(), b.x(), b.y(), radius, flat_end);
  const double x_lo = std::min(a.x(), b.x()) - radius, x_hi = std::max(a.x(), b.x()) + radius;
  const double y_lo = std::min(a.y(), b.y()) - radius, y_hi = std::max(a.y(), b.y()) + radius;
  const int x0 = std::max(0, static_cast<int>(std::floor(x_lo)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(x_hi)));
  const int y0 = std::max(0, static_cast<int>(std::floor(y_lo)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(y_hi)));
  if (x0 > x1 || y0 > y1) return;
  const auto& k = simd::kernels();
  for (int y = y0; y <= y1; ++y)
    k.capsule_fill_row(&img.at(0, y), static_cast<std::size_t>(x0), static_cast<std::size_t>(x1) + 1, y, capsule, value);
}

// Projects a camera-frame segment and its radius; false if either end is behind the camera.
bool project_segment(const Vec3& a, const Vec3& b, double radius_mm, const CameraModel& cam, Vec2& pa, Vec2& pb,
                     double& radius_px) {
  const double za = depth(a, cam), zb = depth(b, cam);
  if (!(za > 0.0) || !(zb > 0.0)) return false;
  pa = project_camera(a, cam);
  pb = project_camera(b, cam);
  radius_px = radius_mm * cam.focal() / (0.5 * (za + zb));
  return true;
}

void check_in_lumen(const VesselTree& tree, std::span<const Vec3> body) {
  if (body.empty()) return;
  std::vector<double> xs, ys, zs, rs;
  for (const auto& [id, b] : tree.branches())
    for (const auto& p : b.points) {
      xs.push_back(p.position.x());
      ys.push_back(p.position.y());
      zs.push_back(p.position.z());
      rs.push_back(p.radius);
    }
  const double slack = 0.5 * tree.max_gap() + 1e-9;
  std::vector<double> d2(xs.size());
  for (const Vec3& v : body) {
    simd::squared_distances(xs, ys, zs, v.x(), v.y(), v.z(), d2);
    bool inside = false;
    for (std::size_t i = 0; i < d2.size() && !inside; ++i) inside = std::sqrt(d2[i]) <= rs[i] + slack;
    if (!inside) throw SimulationIntegrityError("guidewire vertex outside every vessel lumen");
  }
}

}  // namespace

FluoroFrame render(const VesselTree& tree, std::span<const Vec3> wire_body, const Pose& tree_to_camera,
                   const CameraModel& cam, const NoiseSpec& noise, std::uint64_t seed, const RenderStyle& style,
                   int frame_index) {
  check_in_lumen(tree, wire_body);
  FluoroFrame frame;
  frame.cam = cam;
  frame.frame_index = frame_index;
  frame.pixels = GrayImage(cam.width, cam.height, style.background);

  Vec2 pa, pb;
  double rpx = 0.0;
  for (const auto& [id, b] : tree.branches()) {
    for (std::size_t k = 1; k < b.points.size(); ++k) {
      const auto& p0 = b.points[k - 1];
      const auto& p1 = b.points[k];
      if (project_segment(tree_to_camera * p0.position, tree_to_camera * p1.position, 0.5 * (p0.radius + p1.radius),
                          cam, pa, pb, rpx))
        fill_capsule(frame.pixels, pa, pb, rpx, false, style.vessel);
    }
  }
  if (style.sheath_length > 0.0 && wire_body.size() >= 2 && (wire_body[0] - wire_body[1]).norm() > 0.0) {
    const Vec3 back = wire_body[0] + (wire_body[0] - wire_body[1]).normalized() * style.sheath_length;
    if (project_segment(tree_to_camera * back, tree_to_camera * wire_body[0], style.wire_radius, cam, pa, pb, rpx))
      fill_capsule(frame.pixels, pa, pb, rpx, false, style.wire);
  }
  for (std::size_t k = 1; k < wire_body.size(); ++k) {
    if (project_segment(tree_to_camera * wire_body[k - 1], tree_to_camera * wire_body[k], style.wire_radius, cam, pa,
                        pb, rpx))
      fill_capsule(frame.pixels, pa, pb, rpx, k + 1 == wire_body.size(), style.wire);
  }
  if (wire_body.size() >= 2) {
    const Vec3 tip = tree_to_camera * wire_body.back();
    if (depth(tip, cam) > 0.0) frame.truth = project_camera(tip, cam);
  }

  if (noise.sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise.sigma);
    for (auto& v : frame.pixels.pixels) v = static_cast<std::uint8_t>(std::clamp(std::lround(v + gauss(rng)), 0L, 255L));
  }
  return frame;
}

FluoroFrame render(const VesselTree& tree, const GuidewireState& wire, const Pose& tree_to_camera,
                   const CameraModel& cam, const NoiseSpec& noise, std::uint64_t seed, const RenderStyle& style,
                   int frame_index) {
  return render(tree, std::span<const Vec3>(wire.body), tree_to_camera, cam, noise, seed, style, frame_index);
}

// ---------------------------------------------------------------------------
// Otsu

Histogram histogram(const GrayImage& image) {
  Histogram h{};
  for (auto v : image.pixels) ++h[v];
  return h;
}

namespace {

// Between-class variance is proportional to D^2 / (n0 * n1) with
// D = s0 * N - S * n0. Candidates are compared exactly in 128-bit integers
// when the image is small enough, otherwise in long double.
struct OtsuScore {
  std::int64_t d = 0;
  std::uint64_t n0n1 = 1;
};

bool better(const OtsuScore& a, const OtsuScore& b, bool exact) {
  if (exact) {
    const unsigned __int128 da = static_cast<unsigned __int128>(a.d < 0 ? -a.d : a.d);
    const unsigned __int128 db = static_cast<unsigned __int128>(b.d < 0 ? -b.d : b.d);
    return da * da * b.n0n1 > db * db * a.n0n1;
  }
  const long double fa = static_cast<long double>(a.d) * a.d / a.n0n1;
  const long double fb = static_cast<long double>(b.d) * b.d / b.n0n1;
  return fa > fb;
}

}  // namespace

int otsu_threshold(const Histogram& hist) {
  std::uint64_t n = 0, sum = 0;
  int levels = 0;
  for (int v = 0; v < 256; ++v) {
    n += hist[v];
    sum += hist[v] * static_cast<std::uint64_t>(v);
    levels += hist[v] ? 1 : 0;
  }
  if (levels < 2) throw NoThresholdError("image has a single gray level");
  const bool exact = n <= (std::uint64_t{1} << 19);

  std::uint64_t n0 = 0, s0 = 0;
  int best = -1;
  OtsuScore best_score;
  for (int t = 0; t < 255; ++t) {
    n0 += hist[t];
    s0 += hist[t] * static_cast<std::uint64_t>(t);
    if (n0 == 0 || n0 == n) continue;
    OtsuScore s;
    s.d = static_cast<std::int64_t>(s0 * n) - static_cast<std::int64_t>(sum * n0);
    s.n0n1 = n0 * (n - n0);
    if (best < 0 || better(s, best_score, exact)) {
      best = t;
      best_score = s;
    }
  }
  return best;
}

ThresholdResult otsu_threshold(const GrayImage& image) {
  ThresholdResult r;
  r.threshold = otsu_threshold(histogram(image));
  r.mask = GrayImage(image.width, image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) r.mask.pixels[i] = image.pixels[i] <= r.threshold ? 1 : 0;
  return r;
}

ThresholdResult otsu_threshold(const FluoroFrame& frame) { return otsu_threshold(frame.pixels); }

// ---------------------------------------------------------------------------
// Thinning

namespace {

// Two perpendicular 4-neighbours set, the other two clear, and the diagonal
// opposite the corner clear. Removing such a pixel keeps its neighbours
// 8-adjacent and cannot shorten a stroke.
bool staircase_corner(const std::uint8_t* p, int stride) {
  const int n = p[-stride], e = p[1], s = p[stride], w = p[-1];
  if (n + e + s + w != 2) return false;
  if (n && e) return !p[stride - 1];
  if (e && s) return !p[-stride - 1];
  if (s && w) return !p[-stride + 1];
  if (w && n) return !p[stride + 1];
  return false;
}

// Exactly two 8-neighbours that touch each other: the blunt end of a stroke.
bool stroke_nub(const std::uint8_t* p, int stride) {
  const int offs[8][2] = {{0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}};
  int found[2][2];
  int count = 0;
  for (const auto& o : offs) {
    if (!p[o[1] * stride + o[0]]) continue;
    if (count == 2) return false;
    found[count][0] = o[0];
    found[count][1] = o[1];
    ++count;
  }
  if (count != 2) return false;
  return std::abs(found[0][0] - found[1][0]) + std::abs(found[0][1] - found[1][1]) == 1;
}

// A pixel of a 2x2 block that is 8-simple (Yokoi connectivity number 1) and
// not an end. Zhang-Suen's crossing-number test is 4-connected, so it leaves
// such pixels at T-junctions.
bool block_simple(const std::uint8_t* p, int stride) {
  // E, NE, N, NW, W, SW, S, SE
  const int x[8] = {p[1], p[1 - stride], p[-stride], p[-1 - stride], p[-1], p[stride - 1], p[stride], p[stride + 1]};
  auto block = [&](int a, int b, int c) { return x[a] && x[b] && x[c]; };
  if (!(block(0, 1, 2) || block(2, 3, 4) || block(4, 5, 6) || block(6, 7, 0))) return false;
  int count = 0, yokoi = 0;
  for (int k = 0; k < 8; ++k) count += x[k];
  if (count < 2) return false;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - x[k], b = 1 - x[(k + 1) % 8], c = 1 - x[(k + 2) % 8];
    yokoi += a - a * b * c;
  }
  return yokoi == 1;
}

}  // namespace

SkeletonMask thin(const GrayImage& mask) {
  const int w = mask.width, h = mask.height;
  const int pw = w + 2;
  std::vector<std::uint8_t> img(static_cast<std::size_t>(pw) * (h + 2), 0);
  int y_lo = h, y_hi = -1;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.at(x, y)) {
        img[static_cast<std::size_t>(y + 1) * pw + x + 1] = 1;
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }

  const auto& k = simd::kernels();
  const auto& ref = simd::kernels(simd::Isa::scalar);
  std::vector<std::uint8_t> flags(static_cast<std::size_t>(pw) * (h + 2), 0);
  auto zhang_suen_sweep = [&] {
    bool changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      for (int y = y_lo; y <= y_hi; ++y) {
        const std::size_t row = static_cast<std::size_t>(y + 1) * pw + 1;
        k.zhang_suen_row(&img[row - pw], &img[row], &img[row + pw], static_cast<std::size_t>(w), pass, &flags[row]);
      }
      // Removal in raster order, each flagged pixel re-tested against the
      // partially updated image; parallel removal alone can erase 2x2 blocks.
      for (int y = y_lo; y <= y_hi; ++y) {
        const std::size_t row = static_cast<std::size_t>(y + 1) * pw + 1;
        for (int x = 0; x < w; ++x) {
          if (!flags[row + x]) continue;
          std::uint8_t still = 0;
          ref.zhang_suen_row(&img[row - pw + x], &img[row + x], &img[row + pw + x], 1, pass, &still);
          if (still) {
            img[row + x] = 0;
            changed = true;
          }
        }
      }
    }
    return changed;
  };
  auto raster_remove = [&](bool (*test)(const std::uint8_t*, int)) {
    bool changed = false;
    for (int y = y_lo; y <= y_hi; ++y) {
      const std::size_t row = static_cast<std::size_t>(y + 1) * pw + 1;
      for (int x = 0; x < w; ++x)
        if (img[row + x] && test(&img[row + x], pw)) {
          img[row + x] = 0;
          changed = true;
        }
    }
    return changed;
  };

  // Nubs are only trimmed from a converged skeleton; trimming them earlier
  // would eat two-pixel staircases from their ends.
  bool outer = y_hi >= 0;
  while (outer) {
    bool inner = true;
    while (inner) {
      inner = zhang_suen_sweep();
      inner = raster_remove(&staircase_corner) || inner;
    }
    outer = raster_remove(&block_simple);
    outer = raster_remove(&stroke_nub) || outer;
  }

  SkeletonMask out{GrayImage(w, h)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.mask.at(x, y) = img[static_cast<std::size_t>(y + 1) * pw + x + 1];
  return out;
}

std::vector<Vec2> endpoint_candidates(const SkeletonMask& skeleton) {
  const GrayImage& m = skeleton.mask;
  std::vector<Vec2> out;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      int neighbours = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if ((dx || dy) && m.inside(x + dx, y + dy) && m.at(x + dx, y + dy)) ++neighbours;
      if (neighbours == 1) out.emplace_back(x, y);
    }
  return out;
}

std::vector<Vec2> foreground_points(const GrayImage& mask) {
  std::vector<Vec2> out;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y)) out.emplace_back(x, y);
  return out;
}

// ---------------------------------------------------------------------------
// Tracking

TrackedEndpoint track(std::span<const Vec2> candidates, const TrackedEndpoint& previous, const TrackerParams& params,
                      int frame_index) {
  const int frame = frame_index >= 0 ? frame_index : previous.frame_index + 1;
  const Vec2* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const Vec2& c : candidates) {
    const double d = (c - previous.position).norm();
    if (d < best_d) {
      best_d = d;
      best = &c;
    }
  }
  if (!best || best_d > params.gate) return {previous.position, 0.0, frame};
  return {*best, std::exp(-best_d / params.tau), frame};
}

// ---------------------------------------------------------------------------
// Full per-frame pipeline

SkeletonMask prune_spurs(const SkeletonMask& skeleton, int max_length) {
  const GrayImage& sk = skeleton.mask;
  auto degree = [&](int x, int y) {
    int n = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if ((dx || dy) && sk.inside(x + dx, y + dy) && sk.at(x + dx, y + dy)) ++n;
    return n;
  };
  SkeletonMask out = skeleton;
  for (const Vec2& e : endpoint_candidates(skeleton)) {
    std::vector<std::pair<int, int>> path{{static_cast<int>(e.x()), static_cast<int>(e.y())}};
    int px = -2, py = -2;
    bool spur = false;
    while (static_cast<int>(path.size()) <= max_length) {
      const auto [x, y] = path.back();
      int nx = 0, ny = 0, n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int cx = x + dx, cy = y + dy;
          if ((dx || dy) && !(cx == px && cy == py) && sk.inside(cx, cy) && sk.at(cx, cy)) {
            nx = cx;
            ny = cy;
            ++n;
          }
        }
      if (n != 1) break;  // isolated end or an unexpected fork right at the start
      if (degree(nx, ny) >= 3) {
        spur = true;
        break;
      }
      if (degree(nx, ny) < 2) break;  // the whole component is a short stroke
      px = x;
      py = y;
      path.push_back({nx, ny});
    }
    if (spur)
      for (const auto& [x, y] : path) out.mask.at(x, y) = 0;
  }
  return thin(out.mask);
}

Vec2 refine_tip(const GrayImage& mask, const SkeletonMask& skeleton, const Vec2& endpoint) {
  constexpr int kWalk = 14;          // skeleton steps used for the stroke direction
  constexpr double kReach = 6.0;    // px searched around the end point
  constexpr double kBand = 3.0;     // px of stroke behind the end averaged for the centre line
  const GrayImage& sk = skeleton.mask;
  int x = static_cast<int>(endpoint.x()), y = static_cast<int>(endpoint.y());
  if (!sk.inside(x, y) || !sk.at(x, y)) return endpoint;

  // Walk back along the skeleton while the path is unbranched.
  int px = x, py = y, steps = 0;
  for (; steps < kWalk; ++steps) {
    int nx = 0, ny = 0, n = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int cx = x + dx, cy = y + dy;
        if ((dx || dy) && !(cx == px && cy == py) && sk.inside(cx, cy) && sk.at(cx, cy)) {
          nx = cx;
          ny = cy;
          ++n;
        }
      }
    if (n != 1) break;
    px = x;
    py = y;
    x = nx;
    y = ny;
  }
  if (steps < 2) return endpoint;
  const Vec2 dir = (endpoint - Vec2(x, y)).normalized();

  const Vec2 normal(-dir.y(), dir.x());

  // Mask pixels 8-connected to the end point within the reach disc.
  std::vector<Vec2> near{endpoint};
  std::vector<std::pair<int, int>> seen{{static_cast<int>(endpoint.x()), static_cast<int>(endpoint.y())}};
  for (std::size_t k = 0; k < near.size(); ++k)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const Vec2 q = near[k] + Vec2(dx, dy);
        const int qx = static_cast<int>(q.x()), qy = static_cast<int>(q.y());
        if (!mask.inside(qx, qy) || !mask.at(qx, qy) || (q - endpoint).squaredNorm() > kReach * kReach) continue;
        if (std::find(seen.begin(), seen.end(), std::pair{qx, qy}) != seen.end()) continue;
        seen.push_back({qx, qy});
        near.push_back(q);
      }
  double far = 0.0;
  for (const Vec2& q : near) far = std::max(far, (q - endpoint).dot(dir));
  double lateral = 0.0;
  int count = 0;
  for (const Vec2& q : near)
    if ((q - endpoint).dot(dir) >= far - kBand) {
      lateral += (q - endpoint).dot(normal);
      ++count;
    }
  // Pixel centres stop half a pixel short of the stroke's edge on average.
  return endpoint + dir * (far + 0.5) + normal * (lateral / count);
}

PerceptionResult perceive(const FluoroFrame& frame, const PerceptionParams& params) {
  PerceptionResult r;
  const auto vessels = otsu_threshold(frame.pixels);
  r.vessel_threshold = vessels.threshold;
  r.vessel_mask = vessels.mask;

  // Second pass on the dark population separates the wire from the vessels.
  Histogram dark{};
  for (auto v : frame.pixels.pixels)
    if (v <= vessels.threshold) ++dark[v];
  r.wire_mask = GrayImage(frame.pixels.width, frame.pixels.height);
  try {
    const int t = otsu_threshold(dark);
    std::uint64_t n0 = 0, n1 = 0;
    double s0 = 0, s1 = 0;
    for (int v = 0; v <= vessels.threshold; ++v) {
      if (v <= t) {
        n0 += dark[v];
        s0 += static_cast<double>(dark[v]) * v;
      } else {
        n1 += dark[v];
        s1 += static_cast<double>(dark[v]) * v;
      }
    }
    if (n0 && n1 && s1 / n1 - s0 / n0 >= params.min_wire_contrast) {
      r.wire_threshold = t;
      for (std::size_t i = 0; i < frame.pixels.pixels.size(); ++i) r.wire_mask.pixels[i] = frame.pixels.pixels[i] <= t;
    }
  } catch (const NoThresholdError&) {
  }

  r.vessel_skeleton = thin(r.vessel_mask);
  r.wire_skeleton = thin(r.wire_mask);
  if (params.spur_length > 0) r.wire_skeleton = prune_spurs(r.wire_skeleton, params.spur_length);
  r.centerline = foreground_points(r.vessel_skeleton.mask);
  r.candidates = endpoint_candidates(r.wire_skeleton);
  if (params.refine_tips)
    for (Vec2& c : r.candidates) c = refine_tip(r.wire_mask, r.wire_skeleton, c);
  return r;
}

}  // namespace vp3d
