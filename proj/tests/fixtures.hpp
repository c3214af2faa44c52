#pragma once

// Random inputs shared by the unit tests and the acceptance suite.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gccd/graph.hpp"
#include "gccd/solver.hpp"

namespace fixture {

// A few integer levels (at least two) with Gaussian noise; N samples.
inline std::vector<double> random_levels(std::mt19937_64& rng, std::size_t n, double noise = 0.3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, noise);
  std::vector<double> y(n);
  double level = 0.0;
  double first = 0.0;
  bool moved = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || u(rng) < 0.12) level = std::round(8.0 * u(rng) - 4.0);
    if (i == 0) first = level;
    moved = moved || level != first;
    // at least two distinct levels, so the range is never just noise
    if (i == n / 2 && !moved) level = first > 0 ? first - 3.0 : first + 3.0;
    y[i] = level + z(rng);
  }
  return y;
}

// Strongly connected graph on `states` states: a ring B -> R -> S2 -> ... -> B
// with random directions, plus up to two chords. Gaps are whole multiples
// of `gap_unit` (min_units .. 2 * gap_scale / gap_unit of them); penalties
// in [0.5, 6).
inline gccd::ConstraintGraph random_graph(std::mt19937_64& rng, std::size_t states,
                                          double gap_unit, double gap_scale, int min_units = 0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  gccd::ConstraintGraph g;
  for (std::size_t s = 0; s < states; ++s) {
    std::string name = s == 0 ? "B" : s == 1 ? "R" : "S" + std::to_string(s);
    g.states.push_back({s, name});
  }
  g.baseline_state = 0;
  g.rpeak_state = 1;
  const auto max_units = static_cast<int>(2.0 * gap_scale / gap_unit);
  auto edge = [&](std::size_t a, std::size_t b, gccd::Direction d) {
    std::uniform_int_distribution<int> units(min_units, std::max(min_units, max_units));
    g.edges.push_back({a, b, d, units(rng) * gap_unit, 0.5 + 5.5 * u(rng)});
  };
  edge(0, 1, gccd::Direction::up);
  for (std::size_t s = 1; s < states; ++s) {
    const std::size_t next = (s + 1) % states;
    edge(s, next, u(rng) < 0.5 ? gccd::Direction::up : gccd::Direction::down);
  }
  const int chords = static_cast<int>(u(rng) * 3.0);
  for (int c = 0; c < chords && states > 2; ++c) {
    std::uniform_int_distribution<std::size_t> pick(0, states - 1);
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    if (a == b) b = (a + 2) % states;
    const auto d = u(rng) < 0.5 ? gccd::Direction::up : gccd::Direction::down;
    bool dup = false;
    for (const auto& e : g.edges) dup = dup || (e.source == a && e.target == b && e.direction == d);
    if (!dup && a != b) edge(a, b, d);
  }
  return g;
}

}  // namespace fixture
