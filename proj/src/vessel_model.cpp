#include "vp3d/vessel_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vp3d/errors.hpp"

namespace vp3d {

std::string to_string(const Address& a) { return std::to_string(a.branch) + ":" + std::to_string(a.index); }

Address parse_address(std::string_view text, int last_marker) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("address must be branch:index, got '" + std::string(text) + "'");
  Address a;
  const auto b = text.substr(0, colon);
  const auto i = text.substr(colon + 1);
  auto [pb, eb] = std::from_chars(b.data(), b.data() + b.size(), a.branch);
  if (eb != std::errc{} || pb != b.data() + b.size()) throw std::invalid_argument("bad branch id in '" + std::string(text) + "'");
  if (i == "last") {
    a.index = last_marker;
    return a;
  }
  auto [pi, ei] = std::from_chars(i.data(), i.data() + i.size(), a.index);
  if (ei != std::errc{} || pi != i.data() + i.size() || a.index < 0)
    throw std::invalid_argument("bad point index in '" + std::string(text) + "'");
  return a;
}

// ---------------------------------------------------------------------------
// VesselTree

VesselTree::VesselTree(std::map<BranchId, Branch> branches, BranchId root)
    : branches_(std::move(branches)), root_(root) {
  auto fail = [](const std::string& why) { throw std::invalid_argument("invalid vessel tree: " + why); };
  if (branches_.empty()) fail("no branches");
  if (!branches_.count(root_)) fail("root branch missing");
  for (auto& [id, b] : branches_) {
    if (b.id != id) fail("branch id mismatch for " + std::to_string(id));
    if (b.points.size() < 2) fail("branch " + std::to_string(id) + " has fewer than 2 points");
    for (std::size_t k = 0; k < b.points.size(); ++k) {
      const auto& p = b.points[k];
      if (!(p.radius > 0.0) || !std::isfinite(p.radius)) fail("non-positive radius on branch " + std::to_string(id));
      if (!p.position.allFinite()) fail("non-finite position on branch " + std::to_string(id));
      if (p.arc_index != static_cast<int>(k)) fail("arc_index out of order on branch " + std::to_string(id));
    }
    if (id == root_) {
      if (b.parent) fail("root has a parent");
      if (b.attach_index != -1) fail("root has an attach index");
      continue;
    }
    if (!b.parent) fail("second root " + std::to_string(id));
    auto pit = branches_.find(*b.parent);
    if (pit == branches_.end()) fail("branch " + std::to_string(id) + " has unknown parent");
    const Branch& parent = pit->second;
    if (std::count(parent.children.begin(), parent.children.end(), id) != 1)
      fail("parent of " + std::to_string(id) + " does not list it exactly once");
    if (b.attach_index < 0 || b.attach_index >= static_cast<int>(parent.points.size()))
      fail("attach index out of range on branch " + std::to_string(id));
    if ((b.points.front().position - parent.points[b.attach_index].position).norm() > 1e-9)
      fail("branch " + std::to_string(id) + " does not start at its attach point");
  }
  for (auto& [id, b] : branches_) {
    for (BranchId c : b.children) {
      auto cit = branches_.find(c);
      if (cit == branches_.end() || cit->second.parent != id)
        fail("child link " + std::to_string(id) + "->" + std::to_string(c) + " not mirrored");
    }
  }
  // Walk from the root; every branch must be reached exactly once.
  std::deque<BranchId> queue{root_};
  depth_[root_] = 0;
  std::size_t visited = 0;
  while (!queue.empty()) {
    const BranchId id = queue.front();
    queue.pop_front();
    ++visited;
    for (BranchId c : branches_.at(id).children) {
      if (depth_.count(c)) fail("cycle through branch " + std::to_string(c));
      depth_[c] = depth_[id] + 1;
      queue.push_back(c);
    }
  }
  if (visited != branches_.size()) fail("branches unreachable from root");

  for (auto& [id, b] : branches_) {
    std::vector<double> s(b.points.size(), 0.0);
    for (std::size_t k = 1; k < b.points.size(); ++k)
      s[k] = s[k - 1] + (b.points[k].position - b.points[k - 1].position).norm();
    arcs_[id] = std::move(s);
  }
}

const Branch& VesselTree::branch(BranchId id) const {
  auto it = branches_.find(id);
  if (it == branches_.end()) throw AddressError("no branch " + std::to_string(id));
  return it->second;
}

bool VesselTree::contains(const Address& a) const {
  auto it = branches_.find(a.branch);
  return it != branches_.end() && a.index >= 0 && a.index < static_cast<int>(it->second.points.size());
}

const CenterlinePoint& VesselTree::point(const Address& a) const {
  if (!contains(a)) throw AddressError("no centerline point at " + to_string(a));
  return branches_.at(a.branch).points[a.index];
}

int VesselTree::depth(BranchId id) const {
  auto it = depth_.find(id);
  if (it == depth_.end()) throw AddressError("no branch " + std::to_string(id));
  return it->second;
}

const std::vector<double>& VesselTree::arc_lengths(BranchId id) const {
  auto it = arcs_.find(id);
  if (it == arcs_.end()) throw AddressError("no branch " + std::to_string(id));
  return it->second;
}

double VesselTree::total_length() const {
  double total = 0.0;
  for (const auto& [id, s] : arcs_) total += s.back();
  return total;
}

std::size_t VesselTree::point_count() const {
  std::size_t n = 0;
  for (const auto& [id, b] : branches_) n += b.points.size();
  return n;
}

double VesselTree::max_gap() const {
  double gap = 0.0;
  for (const auto& [id, b] : branches_)
    for (std::size_t k = 1; k < b.points.size(); ++k)
      gap = std::max(gap, (b.points[k].position - b.points[k - 1].position).norm());
  return gap;
}

std::vector<BranchId> VesselTree::children_at(BranchId id, int index) const {
  std::vector<BranchId> out;
  for (BranchId c : branch(id).children)
    if (branches_.at(c).attach_index == index) out.push_back(c);
  return out;
}

Address VesselTree::resolve(Address a) const {
  if (a.index < 0) a.index = last_index(a.branch);
  if (!contains(a)) throw AddressError("no centerline point at " + to_string(a));
  return a;
}

bool operator==(const Branch& a, const Branch& b) {
  if (a.id != b.id || a.parent != b.parent || a.children != b.children || a.attach_index != b.attach_index ||
      a.points.size() != b.points.size())
    return false;
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    const auto& p = a.points[k];
    const auto& q = b.points[k];
    if (p.position != q.position || p.radius != q.radius || p.arc_index != q.arc_index) return false;
  }
  return true;
}

bool operator==(const VesselTree& a, const VesselTree& b) {
  return a.root_ == b.root_ && a.branches_ == b.branches_;
}

// ---------------------------------------------------------------------------
// Phantom generation

void PhantomSpec::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("invalid phantom spec: " + why); };
  if (depth < 1) fail("depth must be >= 1");
  if (branching < 0) fail("branching must be >= 0");
  if (!(length_min > 0.0) || !(length_max > 0.0)) fail("segment lengths must be positive");
  if (length_min > length_max) fail("length_min exceeds length_max");
  if (root_length < 0.0) fail("root_length must be non-negative");
  if (!(radius_root > 0.0) || !(radius_min > 0.0)) fail("radii must be positive");
  if (!(radius_decay > 0.0)) fail("radius_decay must be positive");
  if (!(spacing > 0.0)) fail("spacing must be positive");
  if (spread_min_deg < 0.0 || spread_min_deg > spread_max_deg) fail("spread range is empty");
  if (max_curvature < 0.0 || max_elevation_deg < 0.0) fail("curvature bounds must be non-negative");
}

namespace {

struct Heading {
  double azimuth;    // in-plane angle, radians
  double elevation;  // out-of-plane angle, radians

  Vec3 direction() const {
    return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation)};
  }
};

double level_radius(const PhantomSpec& spec, int level) {
  return std::max(spec.radius_root * std::pow(spec.radius_decay, level), spec.radius_min);
}

}  // namespace

VesselTree generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const double deg = std::numbers::pi / 180.0;
  const double max_elev = spec.max_elevation_deg * deg;

  std::map<BranchId, Branch> branches;
  struct Pending {
    BranchId id;
    std::optional<BranchId> parent;
    Vec3 start;
    Heading heading;
    int level;
  };
  std::deque<Pending> queue{{0, std::nullopt, Vec3::Zero(), {std::numbers::pi / 2, 0.0}, 0}};
  BranchId next_id = 1;

  while (!queue.empty()) {
    Pending job = queue.front();
    queue.pop_front();

    const double length = (job.level == 0 && spec.root_length > 0.0) ? spec.root_length
                                                                      : uniform(spec.length_min, spec.length_max);
    const int steps = std::max(1, static_cast<int>(std::ceil(length / spec.spacing - 1e-9)));
    const double step = length / steps;
    const double r0 = level_radius(spec, job.level);
    const double r1 = level_radius(spec, job.level + 1);

    Branch b;
    b.id = job.id;
    b.parent = job.parent;
    b.points.reserve(steps + 1);
    Vec3 p = job.start;
    Heading h = job.heading;
    for (int k = 0; k <= steps; ++k) {
      const double f = static_cast<double>(k) / steps;
      b.points.push_back({p, r0 + (r1 - r0) * f, k});
      if (k == steps) break;
      p += step * h.direction();
      h.azimuth += uniform(-spec.max_curvature, spec.max_curvature) * step;
      h.elevation = std::clamp(h.elevation + 0.5 * uniform(-spec.max_curvature, spec.max_curvature) * step,
                               -max_elev, max_elev);
    }

    if (job.level + 1 < spec.depth && spec.branching > 0) {
      const int n = spec.branching;
      const double spread = uniform(spec.spread_min_deg, spec.spread_max_deg) * deg;
      for (int c = 0; c < n; ++c) {
        const double offset = n == 1 ? 0.0 : spread * (2.0 * c / (n - 1) - 1.0) * (n == 2 ? 1.0 : 1.5);
        Heading child{h.azimuth + offset + uniform(-0.1, 0.1), uniform(-max_elev, max_elev)};
        const BranchId cid = next_id++;
        b.children.push_back(cid);
        queue.push_back({cid, b.id, p, child, job.level + 1});
      }
    }
    branches.emplace(b.id, std::move(b));
  }
  for (auto& [id, b] : branches)
    if (b.parent) b.attach_index = static_cast<int>(branches.at(*b.parent).points.size()) - 1;
  return VesselTree(std::move(branches), 0);
}

// ---------------------------------------------------------------------------
// Resampling

VesselTree resample_centerlines(const VesselTree& tree, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("resample spacing must be positive");
  std::map<BranchId, Branch> out;
  std::map<BranchId, std::map<int, int>> index_map;  // old anchor index -> new index

  for (const auto& [id, b] : tree.branches()) {
    std::set<int> anchors{0, static_cast<int>(b.points.size()) - 1};
    for (BranchId c : b.children) anchors.insert(tree.branch(c).attach_index);
    const auto& s = tree.arc_lengths(id);

    Branch nb;
    nb.id = id;
    nb.parent = b.parent;
    nb.children = b.children;
    auto emit = [&](const Vec3& pos, double radius) {
      nb.points.push_back({pos, radius, static_cast<int>(nb.points.size())});
    };
    std::vector<int> anchor_list(anchors.begin(), anchors.end());
    emit(b.points.front().position, b.points.front().radius);
    index_map[id][0] = 0;
    for (std::size_t a = 0; a + 1 < anchor_list.size(); ++a) {
      const int i0 = anchor_list[a], i1 = anchor_list[a + 1];
      const double len = s[i1] - s[i0];
      const int n = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
      int seg = i0;
      for (int m = 1; m < n; ++m) {
        const double target = s[i0] + len * m / n;
        while (seg + 1 < i1 && s[seg + 1] < target) ++seg;
        const double span = s[seg + 1] - s[seg];
        const double f = span > 0.0 ? (target - s[seg]) / span : 0.0;
        const auto& p0 = b.points[seg];
        const auto& p1 = b.points[seg + 1];
        emit(p0.position + f * (p1.position - p0.position), p0.radius + f * (p1.radius - p0.radius));
      }
      emit(b.points[i1].position, b.points[i1].radius);
      index_map[id][i1] = static_cast<int>(nb.points.size()) - 1;
    }
    out.emplace(id, std::move(nb));
  }
  for (auto& [id, nb] : out)
    if (nb.parent) nb.attach_index = index_map.at(*nb.parent).at(tree.branch(id).attach_index);
  return VesselTree(std::move(out), tree.root());
}

// ---------------------------------------------------------------------------
// Text serialization

namespace {

void put_double(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  std::size_t offset() const { return pos_; }

  std::string_view token() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) throw ParseError(start, "unexpected end of input");
    return text_.substr(start, pos_ - start);
  }

  void expect(std::string_view word) {
    const std::size_t at = next_offset();
    const auto t = token();
    if (t != word) throw ParseError(at, "expected '" + std::string(word) + "', found '" + std::string(t) + "'");
  }

  template <class T>
  T number() {
    const std::size_t at = next_offset();
    const auto t = token();
    T v{};
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size())
      throw ParseError(at, "malformed number '" + std::string(t) + "'");
    return v;
  }

  std::size_t next_offset() {
    skip_space();
    return pos_;
  }

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const VesselTree& tree) {
  std::string out = "VTREE 1\n";
  out += "root " + std::to_string(tree.root()) + "\n";
  out += "branches " + std::to_string(tree.branches().size()) + "\n";
  for (const auto& [id, b] : tree.branches()) {
    out += "branch " + std::to_string(id) + " parent ";
    out += b.parent ? std::to_string(*b.parent) : std::string("none");
    out += " attach " + std::to_string(b.attach_index);
    out += " children " + std::to_string(b.children.size());
    for (BranchId c : b.children) out += " " + std::to_string(c);
    out += "\npoints " + std::to_string(b.points.size()) + "\n";
    for (const auto& p : b.points) {
      put_double(out, p.position.x());
      out += ' ';
      put_double(out, p.position.y());
      out += ' ';
      put_double(out, p.position.z());
      out += ' ';
      put_double(out, p.radius);
      out += '\n';
    }
    out += "end\n";
  }
  return out;
}

VesselTree deserialize(std::string_view text) {
  Reader in(text);
  in.expect("VTREE");
  const std::size_t version_at = in.next_offset();
  if (in.number<int>() != 1) throw ParseError(version_at, "unsupported VTREE version");
  in.expect("root");
  const BranchId root = in.number<BranchId>();
  in.expect("branches");
  const std::size_t count_at = in.next_offset();
  const long count = in.number<long>();
  if (count < 1) throw ParseError(count_at, "branch count must be positive");

  std::map<BranchId, Branch> branches;
  for (long n = 0; n < count; ++n) {
    const std::size_t branch_at = in.next_offset();
    in.expect("branch");
    Branch b;
    b.id = in.number<BranchId>();
    in.expect("parent");
    const std::size_t parent_at = in.next_offset();
    const auto parent = in.token();
    if (parent != "none") {
      BranchId pid{};
      auto [p, ec] = std::from_chars(parent.data(), parent.data() + parent.size(), pid);
      if (ec != std::errc{} || p != parent.data() + parent.size()) throw ParseError(parent_at, "malformed parent id");
      b.parent = pid;
    }
    in.expect("attach");
    b.attach_index = in.number<int>();
    in.expect("children");
    const std::size_t nc_at = in.next_offset();
    const long nc = in.number<long>();
    if (nc < 0) throw ParseError(nc_at, "negative child count");
    for (long c = 0; c < nc; ++c) b.children.push_back(in.number<BranchId>());
    in.expect("points");
    const std::size_t np_at = in.next_offset();
    const long np = in.number<long>();
    if (np < 0) throw ParseError(np_at, "negative point count");
    for (long k = 0; k < np; ++k) {
      CenterlinePoint p;
      p.position.x() = in.number<double>();
      p.position.y() = in.number<double>();
      p.position.z() = in.number<double>();
      p.radius = in.number<double>();
      p.arc_index = static_cast<int>(k);
      b.points.push_back(p);
    }
    in.expect("end");
    const BranchId id = b.id;
    if (!branches.emplace(id, std::move(b)).second) throw ParseError(branch_at, "duplicate branch id");
  }
  if (!in.at_end()) throw ParseError(in.offset(), "trailing data after last branch");
  try {
    return VesselTree(std::move(branches), root);
  } catch (const std::invalid_argument& e) {
    throw ParseError(text.size(), e.what());
  }
}

VesselTree load_tree(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open map file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

void save_tree(const VesselTree& tree, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write map file: " + path);
  f << serialize(tree);
  if (!f) throw std::runtime_error("failed writing map file: " + path);
}

}  // namespace vp3d
