#include "casegraph/layout.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <unordered_map>

#include "casegraph/error.hpp"

namespace casegraph::layout {

using nlohmann::json;

namespace {

constexpr int kMaxDepth = 48;

double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

bool finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

}  // namespace

void Params::validate() const {
  const auto bad = [](const std::string& what) { throw Error(ErrorCode::invalid_argument, what); };
  if (!(theta >= 0.0) || !std::isfinite(theta)) bad("theta must be >= 0");
  if (!(velocity_decay > 0.0 && velocity_decay < 1.0)) bad("velocity_decay must lie in (0, 1)");
  if (!(time_step > 0.0) || !std::isfinite(time_step)) bad("time_step must be > 0");
  for (const double v : {charge, link_strength, rest_length, centering}) {
    if (!std::isfinite(v)) bad("force constants must be finite");
  }
  if (rest_length < 0) bad("rest_length must be >= 0");
}

json Params::to_json() const {
  return {{"charge", charge},     {"link_strength", link_strength}, {"rest_length", rest_length},
          {"centering", centering}, {"theta", theta},                 {"time_step", time_step},
          {"velocity_decay", velocity_decay}, {"iterations", iterations}, {"seed", seed}};
}

Params Params::from_json(const json& j) {
  Params p;
  p.charge = j.value("charge", p.charge);
  p.link_strength = j.value("link_strength", p.link_strength);
  p.rest_length = j.value("rest_length", p.rest_length);
  p.centering = j.value("centering", p.centering);
  p.theta = j.value("theta", p.theta);
  p.time_step = j.value("time_step", p.time_step);
  p.velocity_decay = j.value("velocity_decay", p.velocity_decay);
  p.iterations = j.value("iterations", p.iterations);
  p.seed = j.value("seed", p.seed);
  p.validate();
  return p;
}

std::pair<Vec2, Vec2> State::bounding_box() const {
  if (position.empty()) return {};
  Vec2 lo = position.front();
  Vec2 hi = lo;
  for (const auto& p : position) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  return {lo, hi};
}

json State::to_json() const {
  json out = json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.push_back({{"id", ids[i].value}, {"x", position[i].x}, {"y", position[i].y}});
  }
  return out;
}

State initialize(const std::vector<ItemId>& ids, std::uint64_t seed) {
  if (ids.empty()) throw Error(ErrorCode::invalid_argument, "cannot lay out an empty node set");
  State s;
  s.ids = ids;
  s.position.resize(ids.size());
  s.velocity.assign(ids.size(), Vec2{});
  if (ids.size() == 1) return s;
  std::mt19937_64 rng(seed);
  const double radius = 10.0 * std::sqrt(static_cast<double>(ids.size()));
  for (auto& p : s.position) {
    const double angle = 2.0 * std::numbers::pi * unit_double(rng);
    const double r = radius * std::sqrt(unit_double(rng));
    p = {r * std::cos(angle), r * std::sin(angle)};
  }
  return s;
}

// -- quadtree ------------------------------------------------------------------

QuadTree::QuadTree(std::span<const Vec2> points) {
  const auto n = static_cast<std::uint32_t>(points.size());
  order_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) order_[i] = i;
  rank_.assign(n, 0);
  if (n == 0) return;
  double x0 = points[0].x, y0 = points[0].y, x1 = x0, y1 = y0;
  for (const auto& p : points) {
    x0 = std::min(x0, p.x), y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x), y1 = std::max(y1, p.y);
  }
  const double size = std::max({x1 - x0, y1 - y0, kMinDistance}) * (1.0 + 1e-9) + 1e-12;
  cells_.reserve(2 * n);
  build(points, 0, n, x0, y0, size, 0);
  for (std::uint32_t r = 0; r < n; ++r) rank_[order_[r]] = r;
}

std::int32_t QuadTree::build(std::span<const Vec2> points, std::uint32_t begin, std::uint32_t end, double x0,
                             double y0, double size, int depth) {
  const auto index = static_cast<std::int32_t>(cells_.size());
  cells_.push_back({});
  {
    auto& c = cells_.back();
    c.x0 = x0, c.y0 = y0, c.size = size;
    c.begin = begin, c.end = end;
  }
  // Below the clamp distance subdividing buys nothing: the leaf sums its
  // points directly and every pair inside it is clamped anyway.
  if (end - begin > 1 && depth < kMaxDepth && size > kMinDistance) {
    const double half = size / 2;
    const double mx = x0 + half;
    const double my = y0 + half;
    auto* first = order_.data() + begin;
    auto* last = order_.data() + end;
    auto* split_y = std::partition(first, last, [&](std::uint32_t i) { return points[i].y < my; });
    auto* split_lo = std::partition(first, split_y, [&](std::uint32_t i) { return points[i].x < mx; });
    auto* split_hi = std::partition(split_y, last, [&](std::uint32_t i) { return points[i].x < mx; });
    const std::array<std::uint32_t, 5> bounds{begin, static_cast<std::uint32_t>(split_lo - order_.data()),
                                              static_cast<std::uint32_t>(split_y - order_.data()),
                                              static_cast<std::uint32_t>(split_hi - order_.data()), end};
    const std::array<std::pair<double, double>, 4> origin{{{x0, y0}, {mx, y0}, {x0, my}, {mx, my}}};
    for (int q = 0; q < 4; ++q) {
      if (bounds[q] == bounds[q + 1]) continue;
      const auto child =
          build(points, bounds[q], bounds[q + 1], origin[q].first, origin[q].second, half, depth + 1);
      cells_[index].child[q] = child;
    }
    auto& c = cells_[index];
    for (const auto ci : c.child) {
      if (ci < 0) continue;
      const auto& ch = cells_[ci];
      c.mass += ch.mass;
      c.cx += ch.mass * ch.cx;
      c.cy += ch.mass * ch.cy;
    }
    c.cx /= c.mass;
    c.cy /= c.mass;
  } else {
    auto& c = cells_[index];
    for (auto r = begin; r < end; ++r) {
      c.cx += points[order_[r]].x;
      c.cy += points[order_[r]].y;
    }
    c.mass = end - begin;
    c.cx /= c.mass;
    c.cy /= c.mass;
  }
  return index;
}

std::optional<std::string> QuadTree::validate(std::span<const Vec2> points, double tolerance) const {
  const auto close = [&](double a, double b) {
    return std::abs(a - b) <= tolerance * std::max({1.0, std::abs(a), std::abs(b)});
  };
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const auto& c = cells_[i];
    double mass = 0, cx = 0, cy = 0;
    if (c.leaf()) {
      for (auto r = c.begin; r < c.end; ++r) {
        mass += 1;
        cx += points[order_[r]].x;
        cy += points[order_[r]].y;
      }
    } else {
      for (const auto ci : c.child) {
        if (ci < 0) continue;
        const auto& ch = cells_[ci];
        mass += ch.mass;
        cx += ch.mass * ch.cx;
        cy += ch.mass * ch.cy;
      }
    }
    if (mass != c.mass) return "cell " + std::to_string(i) + ": mass does not equal the sum of its children";
    if (!close(cx / mass, c.cx) || !close(cy / mass, c.cy)) {
      return "cell " + std::to_string(i) + ": centroid is not the mass-weighted mean of its children";
    }
    for (auto r = c.begin; r < c.end; ++r) {
      const auto& p = points[order_[r]];
      // child corners are computed by halving, so allow a few ulps of slack
      const double slack = 1e-12 * (std::abs(c.x0) + std::abs(c.y0) + c.size);
      if (p.x < c.x0 - slack || p.y < c.y0 - slack || p.x >= c.x0 + c.size + slack ||
          p.y >= c.y0 + c.size + slack) {
        return "cell " + std::to_string(i) + ": point " + std::to_string(order_[r]) + " outside its bounds";
      }
    }
  }
  return std::nullopt;
}

Vec2 pair_force(Vec2 pi, Vec2 pj, double strength) {
  const double dx = pj.x - pi.x;
  const double dy = pj.y - pi.y;
  const double d2 = std::max(dx * dx + dy * dy, kMinDistance * kMinDistance);
  return {strength * dx / d2, strength * dy / d2};
}

Vec2 QuadTree::charge_force(std::uint32_t i, std::span<const Vec2> points, double strength, double theta) const {
  Vec2 f;
  if (cells_.empty()) return f;
  const Vec2 pi = points[i];
  const auto ri = rank_[i];
  const double theta2 = theta * theta;
  std::array<std::int32_t, 4 * kMaxDepth + 8> stack;
  std::size_t top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const auto& c = cells_[static_cast<std::size_t>(stack[--top])];
    if (c.leaf()) {
      for (auto r = c.begin; r < c.end; ++r) {
        if (r == ri) continue;
        const auto pf = pair_force(pi, points[order_[r]], strength);
        f.x += pf.x;
        f.y += pf.y;
      }
      continue;
    }
    const bool holds_self = ri >= c.begin && ri < c.end;
    const double dx = c.cx - pi.x;
    const double dy = c.cy - pi.y;
    const double d2 = dx * dx + dy * dy;
    if (holds_self || c.size * c.size > theta2 * d2) {
      for (int q = 3; q >= 0; --q) {
        if (c.child[q] >= 0) stack[top++] = c.child[q];
      }
      continue;
    }
    const double scale = strength * c.mass / std::max(d2, kMinDistance * kMinDistance);
    f.x += scale * dx;
    f.y += scale * dy;
  }
  return f;
}

std::vector<Vec2> charge_forces_direct(std::span<const Vec2> points, double strength) {
  std::vector<Vec2> f(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      const auto pf = pair_force(points[i], points[j], strength);
      f[i].x += pf.x;
      f[i].y += pf.y;
    }
  }
  return f;
}

std::vector<Vec2> charge_forces_barnes_hut(std::span<const Vec2> points, double strength, double theta,
                                           bool parallel) {
  const QuadTree tree(points);
  std::vector<Vec2> f(points.size());
  const auto n = static_cast<std::int64_t>(points.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t i = 0; i < n; ++i) {
      f[static_cast<std::size_t>(i)] = tree.charge_force(static_cast<std::uint32_t>(i), points, strength, theta);
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      f[static_cast<std::size_t>(i)] = tree.charge_force(static_cast<std::uint32_t>(i), points, strength, theta);
    }
  }
  return f;
}

// -- simulation ----------------------------------------------------------------

namespace {

struct Adjacency {
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> neighbours;
};

Adjacency adjacency_of(std::size_t n, const std::vector<Edge>& edges) {
  Adjacency adj;
  adj.offsets.assign(n + 1, 0);
  for (const auto& e : edges) {
    if (e.a >= n || e.b >= n) throw Error(ErrorCode::invalid_argument, "layout edge references an unknown node");
    if (e.a == e.b) continue;
    ++adj.offsets[e.a + 1];
    ++adj.offsets[e.b + 1];
  }
  for (std::size_t i = 0; i < n; ++i) adj.offsets[i + 1] += adj.offsets[i];
  adj.neighbours.resize(adj.offsets[n]);
  auto fill = adj.offsets;
  for (const auto& e : edges) {
    if (e.a == e.b) continue;
    adj.neighbours[fill[e.a]++] = e.b;
    adj.neighbours[fill[e.b]++] = e.a;
  }
  return adj;
}

StepStats step_with(State& state, const Adjacency& adj, const Params& params, StepOptions options) {
  const auto& pos = state.position;
  const auto n = static_cast<std::int64_t>(pos.size());
  auto force = options.kernel == Kernel::direct
                   ? charge_forces_direct(pos, params.charge)
                   : charge_forces_barnes_hut(pos, params.charge, params.theta, options.parallel);
  StepStats stats;
  for (const auto& f : force) {
    stats.net_charge_force.x += f.x;
    stats.net_charge_force.y += f.y;
  }

  const auto link_and_center = [&](std::int64_t idx) {
    const auto i = static_cast<std::size_t>(idx);
    Vec2 f = force[i];
    for (auto k = adj.offsets[i]; k < adj.offsets[i + 1]; ++k) {
      const auto& pj = pos[adj.neighbours[k]];
      const double dx = pj.x - pos[i].x;
      const double dy = pj.y - pos[i].y;
      const double d = std::max(std::sqrt(dx * dx + dy * dy), kMinDistance);
      const double s = params.link_strength * (d - params.rest_length) / d;
      f.x += s * dx;
      f.y += s * dy;
    }
    f.x -= params.centering * pos[i].x;
    f.y -= params.centering * pos[i].y;
    force[i] = f;
  };
  if (options.parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) link_and_center(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) link_and_center(i);
  }

  const double keep = 1.0 - params.velocity_decay;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    auto& v = state.velocity[i];
    auto& p = state.position[i];
    v.x = (v.x + params.time_step * force[i].x) * keep;
    v.y = (v.y + params.time_step * force[i].y) * keep;
    p.x += params.time_step * v.x;
    p.y += params.time_step * v.y;
    if (!finite(p) || !finite(v)) {
      throw Error(ErrorCode::layout_diverged,
                  "layout diverged at node " + std::to_string(state.ids[i].value) + ": non-finite position");
    }
    stats.max_displacement = std::max(stats.max_displacement, params.time_step * std::hypot(v.x, v.y));
  }
  return stats;
}

}  // namespace

StepStats step(State& state, const std::vector<Edge>& edges, const Params& params, StepOptions options) {
  params.validate();
  return step_with(state, adjacency_of(state.position.size(), edges), params, options);
}

State run(const std::vector<ItemId>& ids, const std::vector<Edge>& edges, const Params& params, StepOptions options) {
  params.validate();
  auto state = initialize(ids, params.seed);
  const auto adj = adjacency_of(ids.size(), edges);
  for (std::uint32_t it = 0; it < params.iterations; ++it) step_with(state, adj, params, options);
  return state;
}

State layout_view(const GraphState& state, const GraphView& view, const Params& params, StepOptions options) {
  std::unordered_map<ItemId, std::uint32_t, ItemIdHash> index;
  for (std::uint32_t i = 0; i < view.nodes.size(); ++i) index.emplace(view.nodes[i], i);
  std::vector<Edge> edges;
  for (const auto id : view.edges) {
    const auto* e = state.edge(id);
    if (!e) continue;
    const auto a = index.find(e->from);
    const auto b = index.find(e->to);
    if (a != index.end() && b != index.end()) edges.push_back({a->second, b->second});
  }
  return run(view.nodes, edges, params, options);
}

}  // namespace casegraph::layout
