#pragma once

// Force-directed layout: Barnes-Hut charge repulsion over a quadtree, link
// springs and a centering pull. The charge kernel exists in three flavours:
// the OpenMP one used by `step`, the same traversal run serially, and direct
// O(n^2) summation as the reference.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "casegraph/graph_store.hpp"

namespace casegraph::layout {

struct Vec2 {
  double x = 0;
  double y = 0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline constexpr double kMinDistance = 1e-3;

struct Params {
  double charge = -30.0;  // < 0 repels
  double link_strength = 0.1;
  double rest_length = 30.0;
  double centering = 0.05;
  double theta = 0.8;
  double time_step = 1.0;
  double velocity_decay = 0.4;
  std::uint32_t iterations = 300;
  std::uint64_t seed = 7;

  // Throws Error(invalid_argument).
  void validate() const;
  nlohmann::json to_json() const;
  static Params from_json(const nlohmann::json& j);
};

struct Edge {
  std::uint32_t a = 0;  // node indices
  std::uint32_t b = 0;
};

struct State {
  std::vector<ItemId> ids;
  std::vector<Vec2> position;
  std::vector<Vec2> velocity;

  std::pair<Vec2, Vec2> bounding_box() const;  // (min, max)
  nlohmann::json to_json() const;              // [{id, x, y}]
};

// Seeded positions on a disc, zero velocities; a single node sits at the
// origin. Throws Error(invalid_argument) for an empty node set.
State initialize(const std::vector<ItemId>& ids, std::uint64_t seed);

class QuadTree {
 public:
  struct Cell {
    double x0 = 0, y0 = 0, size = 0;  // square [x0, x0+size) x [y0, y0+size)
    double mass = 0;
    double cx = 0, cy = 0;            // centroid
    std::int32_t child[4] = {-1, -1, -1, -1};
    std::uint32_t begin = 0, end = 0;  // range in order()
    bool leaf() const { return child[0] < 0 && child[1] < 0 && child[2] < 0 && child[3] < 0; }
  };

  explicit QuadTree(std::span<const Vec2> points);

  const std::vector<Cell>& cells() const noexcept { return cells_; }
  const std::vector<std::uint32_t>& order() const noexcept { return order_; }
  std::uint32_t rank(std::uint32_t point) const { return rank_[point]; }

  // Checks mass and centroid aggregation at every cell; returns a
  // description of the first violation.
  std::optional<std::string> validate(std::span<const Vec2> points, double tolerance = 1e-9) const;

  // Barnes-Hut charge force on point i.
  Vec2 charge_force(std::uint32_t i, std::span<const Vec2> points, double strength, double theta) const;

 private:
  std::int32_t build(std::span<const Vec2> points, std::uint32_t begin, std::uint32_t end, double x0, double y0,
                     double size, int depth);

  std::vector<Cell> cells_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint32_t> rank_;
};

// Force on i exerted by j (strength * (pj - pi) / max(d^2, eps^2)).
Vec2 pair_force(Vec2 pi, Vec2 pj, double strength);

std::vector<Vec2> charge_forces_direct(std::span<const Vec2> points, double strength);
std::vector<Vec2> charge_forces_barnes_hut(std::span<const Vec2> points, double strength, double theta,
                                           bool parallel = true);

enum class Kernel { barnes_hut, direct };

struct StepOptions {
  Kernel kernel = Kernel::barnes_hut;
  bool parallel = true;
};

struct StepStats {
  Vec2 net_charge_force;  // zero for exact pairwise summation
  double max_displacement = 0;
};

// One iteration. Throws Error(layout_diverged) naming the first node whose
// position or velocity became non-finite.
StepStats step(State& state, const std::vector<Edge>& edges, const Params& params, StepOptions options = {});

State run(const std::vector<ItemId>& ids, const std::vector<Edge>& edges, const Params& params,
          StepOptions options = {});

// Lays out the nodes and edges of a view (edges whose endpoints are both in
// the view).
State layout_view(const GraphState& state, const GraphView& view, const Params& params, StepOptions options = {});

}  // namespace casegraph::layout
