#pragma once

// Constraint graph: hidden states and the changes allowed between them.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gccd {

using StateId = std::size_t;
using EdgeId = std::size_t;

enum class Direction { up, down };

[[nodiscard]] std::string_view to_string(Direction d);
[[nodiscard]] Direction opposite(Direction d);

struct State {
  StateId id = 0;
  std::string name;

  bool operator==(const State&) const = default;
};

/// A permitted change from `source` to `target`. An up edge requires the
/// next segment mean to be at least `gap` above the current one; a down
/// edge at least `gap` below. Taking the edge costs `penalty`.
struct Edge {
  StateId source = 0;
  StateId target = 0;
  Direction direction = Direction::up;
  double gap = 0.0;
  double penalty = 0.0;

  bool operator==(const Edge&) const = default;
};

struct ConstraintGraph {
  std::vector<State> states;
  std::vector<Edge> edges;
  StateId baseline_state = 0;
  StateId rpeak_state = 0;

  bool operator==(const ConstraintGraph&) const = default;

  [[nodiscard]] std::size_t state_count() const { return states.size(); }
  /// Throws std::out_of_range for unknown names.
  [[nodiscard]] StateId state_by_name(std::string_view name) const;
  [[nodiscard]] std::vector<EdgeId> in_edges(StateId s) const;
  [[nodiscard]] std::vector<EdgeId> out_edges(StateId s) const;
};

/// Two states B (baseline) and R (R peak): B -> R up, R -> B down.
ConstraintGraph initial_graph(double gap_up, double gap_down, double penalty);

struct Violation {
  std::string subject;  // e.g. "state 2 (W1)" or "edge 0 (B->R)"
  std::string rule;

  bool operator==(const Violation&) const = default;
};

/// Empty iff the graph satisfies every structural rule. Never throws.
std::vector<Violation> validate(const ConstraintGraph& g);

class GraphParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GraphValidationError : public std::runtime_error {
 public:
  explicit GraphValidationError(std::vector<Violation> violations);
  [[nodiscard]] const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Parses and validates a graph JSON document.
ConstraintGraph parse_graph(std::string_view document);
std::string serialize_graph(const ConstraintGraph& g);

ConstraintGraph load_graph_file(const std::string& path);
void save_graph_file(const ConstraintGraph& g, const std::string& path);

}  // namespace gccd
