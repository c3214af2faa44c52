#include "gccd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "gccd/pwq.hpp"

namespace gccd {

namespace {

// Backtracking records. Each changepoint in the history of a cost-function
// piece is a node; `parent` is the history of the source piece the change
// came from. Piece labels index into the arena; 0 is the empty history.
// Nodes no piece can reach any more are reclaimed by mark and compact.
class TraceArena {
 public:
  struct Node {
    std::size_t start = 0;  // 0-based first sample of the segment opened here
    EdgeId edge = 0;
    pwq::Derivation derivation = pwq::Derivation::flat;
    double anchor = 0.0;
    std::uint32_t parent = 0;
  };

  TraceArena() : nodes_(1) {}

  [[nodiscard]] const Node& at(std::uint32_t label) const { return nodes_[label]; }

  // Replaces envelope-derived provenance with fresh nodes; identical
  // provenance within one step shares a node.
  void stamp(pwq::PiecewiseQuad& f, std::size_t t) {
    made_.clear();
    bool touched = false;
    for (pwq::QuadPiece& p : f.mutable_pieces()) {
      if (!p.feasible || p.prov.derivation == pwq::Derivation::carried) continue;
      touched = true;
      std::uint32_t id = 0;
      for (const auto& [key, node] : made_) {
        if (key == p.prov) {
          id = node;
          break;
        }
      }
      if (id == 0) {
        if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max()) {
          throw std::length_error("too many changepoint records");
        }
        id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back({t, static_cast<EdgeId>(p.prov.branch), p.prov.derivation, p.prov.anchor,
                          p.prov.label});
        made_.emplace_back(p.prov, id);
      }
      p.prov = {id, pwq::Derivation::carried, 0.0, -1};
    }
    if (touched) f.canonicalize();
  }

  // Reclaims unreachable nodes once the arena has doubled since the last
  // collection.
  void maybe_collect(std::vector<pwq::PiecewiseQuad>& roots) {
    if (nodes_.size() < threshold_) return;
    std::vector<std::uint32_t> remap(nodes_.size(), 0);
    constexpr std::uint32_t kLive = 1;
    for (const auto& f : roots) {
      for (const auto& p : f.pieces()) {
        for (std::uint32_t k = p.prov.label; k != 0 && remap[k] == 0; k = nodes_[k].parent) {
          remap[k] = kLive;
        }
      }
    }
    std::uint32_t next = 1;
    for (std::size_t k = 1; k < nodes_.size(); ++k) {
      if (remap[k] == 0) continue;
      remap[k] = next;
      Node n = nodes_[k];
      n.parent = remap[n.parent];  // parents precede children
      nodes_[next++] = n;
    }
    nodes_.resize(next);
    for (auto& f : roots) {
      for (auto& p : f.mutable_pieces()) p.prov.label = remap[p.prov.label];
    }
    threshold_ = std::max<std::size_t>(kMinThreshold, 2 * nodes_.size());
  }

 private:
  static constexpr std::size_t kMinThreshold = std::size_t{1} << 16;
  std::vector<Node> nodes_;
  std::vector<std::pair<pwq::Provenance, std::uint32_t>> made_;
  std::size_t threshold_ = kMinThreshold;
};

}  // namespace

void check_signal(const Signal& s) {
  if (s.samples.size() < 2) throw std::invalid_argument("signal needs at least 2 samples");
  if (!(s.sample_rate > 0.0) || !std::isfinite(s.sample_rate)) {
    throw std::invalid_argument("sample rate must be positive");
  }
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    if (!std::isfinite(s.samples[i])) {
      throw std::invalid_argument("sample " + std::to_string(i) + " is not finite");
    }
  }
}

std::pair<double, double> mean_domain(std::span<const double> y) {
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  const double range = *mx - *mn;
  const double eps = range > 0.0 ? 0.01 * range : 1.0;
  return {*mn - eps, *mx + eps};
}

Segmentation solve(const Signal& signal, const ConstraintGraph& g,
                   std::optional<StateId> start_state) {
  check_signal(signal);
  if (auto v = validate(g); !v.empty()) throw GraphValidationError(std::move(v));
  const std::size_t nstates = g.state_count();
  if (start_state && *start_state >= nstates) {
    throw std::invalid_argument("start state " + std::to_string(*start_state) +
                                " is not in the graph");
  }

  const std::span<const double> y = signal.samples;
  const std::size_t n = y.size();
  const auto [lo, hi] = mean_domain(y);
  for (EdgeId e = 0; e < g.edges.size(); ++e) {
    if (g.edges[e].gap >= hi - lo) {
      const StateId s = g.edges[e].target;
      throw InfeasibleError("edge " + std::to_string(e) + " gap " + std::to_string(g.edges[e].gap) +
                                " excludes every mean in [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]; state " + g.states[s].name +
                                " infeasible at t=1",
                            s, 1);
    }
  }

  std::vector<std::vector<EdgeId>> in_edges(nstates);
  for (StateId v = 0; v < nstates; ++v) in_edges[v] = g.in_edges(v);

  std::vector<pwq::PiecewiseQuad> cost(nstates);
  std::vector<pwq::PiecewiseQuad> next(nstates);
  for (StateId v = 0; v < nstates; ++v) {
    if (!start_state || *start_state == v) {
      cost[v] = pwq::PiecewiseQuad::quadratic(lo, hi, 1.0, -2.0 * y[0], y[0] * y[0]);
    } else {
      cost[v] = pwq::PiecewiseQuad::infeasible(lo, hi);
    }
  }

  TraceArena arena;
  pwq::PiecewiseQuad env;
  pwq::PiecewiseQuad changed;
  pwq::PiecewiseQuad merged;
  std::size_t max_pieces = 0;
  double piece_sum = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    for (StateId v = 0; v < nstates; ++v) {
      bool any_change = false;
      for (EdgeId e : in_edges[v]) {
        const Edge& edge = g.edges[e];
        const pwq::PiecewiseQuad& src = cost[edge.source];
        if (src.all_infeasible()) continue;
        if (edge.direction == Direction::up) {
          pwq::min_leq_envelope_into(src, edge.gap, env);
        } else {
          pwq::min_geq_envelope_into(src, edge.gap, env);
        }
        for (pwq::QuadPiece& p : env.mutable_pieces()) {
          p.prov.branch = static_cast<int>(e);
          if (p.feasible) p.c += edge.penalty;
        }
        if (any_change) {
          pwq::pointwise_min_into(changed, env, merged);
          std::swap(changed, merged);
        } else {
          std::swap(changed, env);
          any_change = true;
        }
      }
      if (any_change) {
        pwq::pointwise_min_into(cost[v], changed, next[v]);
      } else {
        next[v] = cost[v];
      }
      for (pwq::QuadPiece& p : next[v].mutable_pieces()) {
        if (!p.feasible) continue;
        p.a += 1.0;
        p.b -= 2.0 * y[t];
        p.c += y[t] * y[t];
      }
      arena.stamp(next[v], t);
      max_pieces = std::max(max_pieces, next[v].size());
      piece_sum += static_cast<double>(next[v].size());
    }
    std::swap(cost, next);
    if (std::all_of(cost.begin(), cost.end(),
                    [](const pwq::PiecewiseQuad& f) { return f.all_infeasible(); })) {
      throw InfeasibleError("no state is feasible at t=" + std::to_string(t + 1), 0, t + 1);
    }
    arena.maybe_collect(cost);
  }

  std::optional<pwq::Minimum> best;
  StateId best_state = 0;
  for (StateId v = 0; v < nstates; ++v) {
    if (cost[v].all_infeasible()) continue;
    const pwq::Minimum m = pwq::global_min(cost[v]);
    if (!best || m.value < best->value) {
      best = m;
      best_state = v;
    }
  }
  if (!best) throw InfeasibleError("no state is feasible at t=" + std::to_string(n), 0, n);

  Segmentation seg;
  seg.total_cost = best->value;
  seg.max_pieces = max_pieces;
  seg.mean_pieces = n > 1 ? piece_sum / static_cast<double>((n - 1) * nstates) : 1.0;

  double mean = best->argmin;
  StateId state = best_state;
  seg.means.push_back(mean);
  seg.states.push_back(state);
  for (std::uint32_t label = cost[best_state].pieces()[best->piece].prov.label; label != 0;) {
    const TraceArena::Node& node = arena.at(label);
    const Edge& edge = g.edges[node.edge];
    seg.boundaries.push_back(node.start);
    seg.edges_taken.push_back(node.edge);
    if (node.derivation == pwq::Derivation::flat) {
      mean = node.anchor;
    } else {
      mean = edge.direction == Direction::up ? mean - edge.gap : mean + edge.gap;
    }
    state = edge.source;
    seg.means.push_back(mean);
    seg.states.push_back(state);
    label = node.parent;
  }
  std::reverse(seg.boundaries.begin(), seg.boundaries.end());
  std::reverse(seg.edges_taken.begin(), seg.edges_taken.end());
  std::reverse(seg.means.begin(), seg.means.end());
  std::reverse(seg.states.begin(), seg.states.end());
  return seg;
}

double segmentation_cost(const Segmentation& seg, std::span<const double> y,
                         const ConstraintGraph& g) {
  double total = 0.0;
  for (std::size_t k = 0; k < seg.segment_count(); ++k) {
    const double m = seg.means[k];
    for (std::size_t i = seg.segment_begin(k); i < seg.segment_end(k, y.size()); ++i) {
      total += (y[i] - m) * (y[i] - m);
    }
  }
  for (EdgeId e : seg.edges_taken) total += g.edges.at(e).penalty;
  return total;
}

std::vector<std::string> check_segmentation(const Segmentation& seg, std::span<const double> y,
                                            const ConstraintGraph& g) {
  std::vector<std::string> problems;
  const std::size_t k = seg.boundaries.size();
  if (seg.means.size() != k + 1 || seg.states.size() != k + 1 || seg.edges_taken.size() != k) {
    problems.push_back("size mismatch between boundaries, edges, means and states");
    return problems;
  }
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t b = seg.boundaries[j];
    if (b < 1 || b >= y.size() || (j > 0 && b <= seg.boundaries[j - 1])) {
      problems.push_back("boundary " + std::to_string(j) + " out of order or range");
    }
    if (seg.edges_taken[j] >= g.edges.size()) {
      problems.push_back("boundary " + std::to_string(j) + " uses an unknown edge");
      continue;
    }
    const Edge& e = g.edges[seg.edges_taken[j]];
    if (seg.states[j] != e.source || seg.states[j + 1] != e.target) {
      problems.push_back("boundary " + std::to_string(j) + " states do not match its edge");
    }
    const double step = seg.means[j + 1] - seg.means[j];
    const double scale = std::max({1.0, std::abs(seg.means[j]), std::abs(seg.means[j + 1])});
    const bool ok = e.direction == Direction::up ? step >= e.gap - 1e-9 * scale
                                                 : -step >= e.gap - 1e-9 * scale;
    if (!ok) problems.push_back("boundary " + std::to_string(j) + " violates its gap constraint");
  }
  const double recomputed = segmentation_cost(seg, y, g);
  if (std::abs(recomputed - seg.total_cost) >
      1e-6 * std::max(1.0, std::abs(recomputed))) {
    problems.push_back("total_cost " + std::to_string(seg.total_cost) +
                       " differs from recomputed " + std::to_string(recomputed));
  }
  return problems;
}

std::vector<std::pair<std::size_t, std::size_t>> rpeak_spans(const Segmentation& seg,
                                                             std::size_t n,
                                                             const ConstraintGraph& g) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (std::size_t k = 0; k < seg.segment_count(); ++k) {
    if (seg.states[k] == g.rpeak_state) spans.emplace_back(seg.segment_begin(k), seg.segment_end(k, n));
  }
  return spans;
}

std::vector<std::size_t> extract_rpeaks(const Segmentation& seg, const Signal& signal,
                                        const ConstraintGraph& g) {
  std::vector<std::size_t> peaks;
  const auto& y = signal.samples;
  // Direction used when the record starts inside an R segment.
  Direction fallback = Direction::up;
  if (auto in = g.in_edges(g.rpeak_state); !in.empty()) fallback = g.edges[in.front()].direction;

  for (std::size_t k = 0; k < seg.segment_count(); ++k) {
    if (seg.states[k] != g.rpeak_state) continue;
    const Direction d = k > 0 ? g.edges.at(seg.edges_taken[k - 1]).direction : fallback;
    const std::size_t b = seg.segment_begin(k);
    const std::size_t e = seg.segment_end(k, y.size());
    std::size_t best = b;
    for (std::size_t i = b + 1; i < e; ++i) {
      if (d == Direction::up ? y[i] > y[best] : y[i] < y[best]) best = i;
    }
    peaks.push_back(best);
  }
  return peaks;
}

}  // namespace gccd
