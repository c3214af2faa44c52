#pragma once

// Graph-constrained changepoint detection for piecewise-constant means.
//
// Minimizes  sum_i (y_i - m_i)^2 + sum of penalties of the edges taken
// subject to: no change keeps both mean and state; a change along edge e
// moves the state from source(e) to target(e) and moves the mean in e's
// direction by at least gap(e).

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gccd/graph.hpp"

namespace gccd {

struct Signal {
  std::vector<double> samples;
  double sample_rate = 360.0;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
};

/// Throws std::invalid_argument when the signal is too short, has
/// non-finite samples or a non-positive rate.
void check_signal(const Signal& s);

struct Segmentation {
  /// 1-based: boundary k sits between samples boundaries[k] and
  /// boundaries[k] + 1, so the segment after it starts at 0-based index
  /// boundaries[k].
  std::vector<std::size_t> boundaries;
  std::vector<EdgeId> edges_taken;
  std::vector<double> means;
  std::vector<StateId> states;
  double total_cost = 0.0;

  std::size_t max_pieces = 0;
  double mean_pieces = 0.0;

  [[nodiscard]] std::size_t segment_count() const { return means.size(); }
  /// 0-based half-open sample range of segment k.
  [[nodiscard]] std::size_t segment_begin(std::size_t k) const {
    return k == 0 ? 0 : boundaries[k - 1];
  }
  [[nodiscard]] std::size_t segment_end(std::size_t k, std::size_t n) const {
    return k + 1 < means.size() ? boundaries[k] : n;
  }
};

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, StateId state, std::size_t t)
      : std::runtime_error(what), state_(state), t_(t) {}
  [[nodiscard]] StateId state() const { return state_; }
  /// 1-based time index.
  [[nodiscard]] std::size_t time() const { return t_; }

 private:
  StateId state_;
  std::size_t t_;
};

/// The interval means are optimized over: the data range widened by 1% on
/// each side (by 1.0 when the signal is constant).
std::pair<double, double> mean_domain(std::span<const double> y);

/// Globally optimal segmentation. `start_state` restricts the state of the
/// first segment; nullopt lets the solver choose.
///
/// Throws InfeasibleError when some edge's gap is at least as wide as the
/// mean domain, or when no state is feasible at the end of the signal;
/// std::invalid_argument for a bad signal, graph, or start state.
Segmentation solve(const Signal& signal, const ConstraintGraph& g,
                   std::optional<StateId> start_state = std::nullopt);

/// Cost of a segmentation recomputed from its means and edges.
double segmentation_cost(const Segmentation& seg, std::span<const double> y,
                         const ConstraintGraph& g);

/// Checks the structural and constraint invariants of a solver result;
/// returns a description of every failure (empty when consistent).
std::vector<std::string> check_segmentation(const Segmentation& seg, std::span<const double> y,
                                            const ConstraintGraph& g);

/// One 0-based sample index per R-state segment: the extreme sample in the
/// direction of the edge that entered it (max for up, min for down), ties
/// to the earliest sample.
std::vector<std::size_t> extract_rpeaks(const Segmentation& seg, const Signal& signal,
                                        const ConstraintGraph& g);

/// 0-based half-open sample spans of the R-state segments.
std::vector<std::pair<std::size_t, std::size_t>> rpeak_spans(const Segmentation& seg,
                                                             std::size_t n,
                                                             const ConstraintGraph& g);

}  // namespace gccd
