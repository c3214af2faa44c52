#include "gccd/learn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <variant>

#include "json.hpp"

namespace gccd {

std::string_view to_string(EditKind k) {
  switch (k) {
    case EditKind::split_same_dir: return "split_same_dir";
    case EditKind::detour_before: return "detour_before";
    case EditKind::detour_after: return "detour_after";
    case EditKind::insert_two_bump: return "insert_two_bump";
    case EditKind::delete_merge_keep_in: return "delete_merge_keep_in";
    case EditKind::delete_merge_keep_out: return "delete_merge_keep_out";
    case EditKind::penalty_up: return "penalty_up";
    case EditKind::penalty_down: return "penalty_down";
    case EditKind::gap_up: return "gap_up";
    case EditKind::gap_down: return "gap_down";
  }
  return "unknown";
}

bool adds_states(EditKind k) {
  return k == EditKind::split_same_dir || k == EditKind::detour_before ||
         k == EditKind::detour_after || k == EditKind::insert_two_bump;
}

void check_config(const LearnConfig& cfg) {
  if (!(cfg.tolerance_ms >= 0.0)) throw std::invalid_argument("tolerance_ms must be >= 0");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must be in (0, 1)");
  }
  if (!(cfg.penalty_factor > 1.0)) throw std::invalid_argument("penalty_factor must be > 1");
  if (!(cfg.gap_factor > 1.0)) throw std::invalid_argument("gap_factor must be > 1");
  if (!(cfg.min_gap >= 0.0)) throw std::invalid_argument("min_gap must be >= 0");
}

namespace {

std::string fresh_name(const ConstraintGraph& g) {
  for (std::size_t k = g.states.size();; ++k) {
    std::string name = "S" + std::to_string(k);
    if (std::none_of(g.states.begin(), g.states.end(),
                     [&](const State& s) { return s.name == name; })) {
      return name;
    }
  }
}

StateId add_state(ConstraintGraph& g) {
  const StateId id = g.states.size();
  g.states.push_back({id, fresh_name(g)});
  return id;
}

// Replaces edge `at` with `path`, keeping the rest of the edge order.
void replace_edge(ConstraintGraph& g, EdgeId at, const std::vector<Edge>& path) {
  g.edges.erase(g.edges.begin() + static_cast<std::ptrdiff_t>(at));
  g.edges.insert(g.edges.begin() + static_cast<std::ptrdiff_t>(at), path.begin(), path.end());
}

std::optional<ConstraintGraph> insert_nodes(const ConstraintGraph& g, EdgeId at, EditKind kind) {
  ConstraintGraph out = g;
  const Edge e = g.edges[at];
  const Direction d = e.direction;
  const Direction r = opposite(d);
  const double gap0 = e.gap / 2.0;
  const double pen0 = e.penalty;
  switch (kind) {
    case EditKind::split_same_dir: {
      const StateId w = add_state(out);
      replace_edge(out, at, {{e.source, w, d, e.gap / 2.0, e.penalty / 2.0},
                             {w, e.target, d, e.gap / 2.0, e.penalty / 2.0}});
      break;
    }
    case EditKind::detour_before: {
      const StateId w = add_state(out);
      replace_edge(out, at, {{e.source, w, r, gap0, pen0}, {w, e.target, d, e.gap, e.penalty}});
      break;
    }
    case EditKind::detour_after: {
      const StateId w = add_state(out);
      replace_edge(out, at, {{e.source, w, d, e.gap, e.penalty}, {w, e.target, r, gap0, pen0}});
      break;
    }
    case EditKind::insert_two_bump: {
      const StateId w1 = add_state(out);
      const StateId w2 = add_state(out);
      replace_edge(out, at, {{e.source, w1, d, e.gap, e.penalty},
                             {w1, w2, r, gap0, pen0},
                             {w2, e.target, d, gap0, pen0}});
      break;
    }
    default:
      return std::nullopt;
  }
  return out;
}

// Removes state Vj = target(at) and bridges its predecessor to its successor.
std::variant<ConstraintGraph, std::string> delete_node(const ConstraintGraph& g, EdgeId at,
                                                       bool keep_in) {
  const Edge e = g.edges[at];
  const StateId vj = e.target;
  if (vj == g.baseline_state || vj == g.rpeak_state) return std::string("target state is protected");
  const auto in = g.in_edges(vj);
  const auto out_e = g.out_edges(vj);
  if (in.size() != 1 || out_e.size() != 1) {
    return std::string("target state needs in-degree 1 and out-degree 1");
  }
  const Edge succ = g.edges[out_e.front()];
  if (succ.target == e.source) return std::string("bridge would be a self-loop");

  Edge bridge = keep_in ? e : succ;
  bridge.source = e.source;
  bridge.target = succ.target;

  ConstraintGraph out = g;
  out.edges[at] = bridge;
  out.edges.erase(out.edges.begin() + static_cast<std::ptrdiff_t>(out_e.front()));
  out.states.erase(out.states.begin() + static_cast<std::ptrdiff_t>(vj));
  auto renumber = [vj](StateId s) { return s > vj ? s - 1 : s; };
  for (std::size_t k = 0; k < out.states.size(); ++k) out.states[k].id = k;
  for (Edge& x : out.edges) {
    x.source = renumber(x.source);
    x.target = renumber(x.target);
  }
  out.baseline_state = renumber(out.baseline_state);
  out.rpeak_state = renumber(out.rpeak_state);
  return out;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> pooled_samples(std::span<const LabeledRecord> windows) {
  std::vector<double> all;
  for (const LabeledRecord& w : windows) {
    all.insert(all.end(), w.signal.samples.begin(), w.signal.samples.end());
  }
  return all;
}

RecordCounts score_window(const ConstraintGraph& g, const LabeledRecord& w, const LearnConfig& cfg) {
  RecordCounts rc;
  rc.record_id = w.record_id;
  const auto [from, to] = w.scored_range();
  std::vector<std::size_t> labels;
  for (std::size_t a : w.rpeak_annotations) {
    if (a >= from && a < to) labels.push_back(a);
  }
  Segmentation seg;
  try {
    seg = solve(w.signal, g, cfg.start_state);
  } catch (const InfeasibleError&) {
    rc.infeasible = true;
    rc.counts.fn = labels.size();
    return rc;
  }
  std::vector<std::size_t> peaks;
  for (std::size_t p : extract_rpeaks(seg, w.signal, g)) {
    if (p >= from && p < to) peaks.push_back(p);
  }
  const MatchResult m =
      match(labels, peaks, tolerance_samples(cfg.tolerance_ms, w.signal.sample_rate));
  rc.counts = {m.tp, m.fp, m.fn};
  return rc;
}

double penalty_sum(const ConstraintGraph& g);

// Candidates compare by (errors, states, edges, penalty sum, enumeration
// index); the first match wins.
using Rank = std::tuple<std::size_t, std::size_t, double, std::size_t>;

Rank rank_of(const ConstraintGraph& g, std::size_t index) {
  return {g.states.size(), g.edges.size(), penalty_sum(g), index};
}

// The best fully scored candidate so far. A candidate can still win only
// with fewer errors, or as many errors and a better rank.
class Leader {
 public:
  explicit Leader(std::size_t must_beat) : errors_(must_beat), rank_(), set_(false) {}

  [[nodiscard]] bool can_win(std::size_t errors, const Rank& r) const {
    std::lock_guard lock(mu_);
    // before any candidate is scored, only the current graph's count matters
    if (!set_) return errors < errors_;
    return errors < errors_ || (errors == errors_ && r < rank_);
  }

  void offer(std::size_t errors, const Rank& r) {
    std::lock_guard lock(mu_);
    if (!set_ ? errors < errors_ : std::tie(errors, r) < std::tie(errors_, rank_)) {
      errors_ = errors;
      rank_ = r;
      set_ = true;
    }
  }

 private:
  mutable std::mutex mu_;
  std::size_t errors_;
  Rank rank_;
  bool set_;
};

// `start` plus the errors of g on windows[order[from..to)], or nullopt once
// the candidate can no longer win.
// Each window with errors bumps its entry in `trouble`.
std::optional<std::size_t> bounded_errors(const ConstraintGraph& g, const Rank& rank,
                                          std::span<const LabeledRecord> windows,
                                          std::span<const std::size_t> order, std::size_t from,
                                          std::size_t to, std::size_t start, const LearnConfig& cfg,
                                          const Leader& leader,
                                          std::vector<std::atomic<std::uint32_t>>& trouble) {
  std::size_t errors = start;
  if (!leader.can_win(errors, rank)) return std::nullopt;
  for (std::size_t k = from; k < to; ++k) {
    const std::size_t e = score_window(g, windows[order[k]], cfg).counts.errors();
    if (e > 0) {
      trouble[order[k]].fetch_add(1, std::memory_order_relaxed);
      errors += e;
      if (!leader.can_win(errors, rank)) return std::nullopt;
    }
  }
  return errors;
}

double penalty_sum(const ConstraintGraph& g) {
  double s = 0.0;
  for (const Edge& e : g.edges) s += e.penalty;
  return s;
}

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  }
}

nlohmann::ordered_json iteration_json(const IterationRecord& r) {
  nlohmann::ordered_json j;
  j["iteration"] = r.iteration;
  j["kind"] = r.kind ? nlohmann::ordered_json(std::string(to_string(*r.kind))) : nullptr;
  j["anchor_edge"] = r.anchor_edge ? nlohmann::ordered_json(*r.anchor_edge) : nullptr;
  j["train_errors"] = r.train_errors;
  j["validation_errors"] = r.validation_errors;
  j["graph"] = nlohmann::ordered_json::parse(serialize_graph(r.graph));
  return j;
}

}  // namespace

CandidateSet enumerate_candidates(const ConstraintGraph& g, const LearnConfig& cfg,
                                  double min_gap_step) {
  CandidateSet out;
  for (EdgeId at = 0; at < g.edges.size(); ++at) {
    const Edge& e = g.edges[at];
    for (EditKind kind : kEditKinds) {
      std::optional<ConstraintGraph> next;
      std::string reason;
      switch (kind) {
        case EditKind::split_same_dir:
        case EditKind::detour_before:
        case EditKind::detour_after:
        case EditKind::insert_two_bump:
          next = insert_nodes(g, at, kind);
          break;
        case EditKind::delete_merge_keep_in:
        case EditKind::delete_merge_keep_out: {
          auto r = delete_node(g, at, kind == EditKind::delete_merge_keep_in);
          if (auto* ok = std::get_if<ConstraintGraph>(&r)) {
            next = std::move(*ok);
          } else {
            reason = std::get<std::string>(r);
          }
          break;
        }
        case EditKind::penalty_up:
        case EditKind::penalty_down: {
          const double p = kind == EditKind::penalty_up ? e.penalty * cfg.penalty_factor
                                                        : e.penalty / cfg.penalty_factor;
          if (p == e.penalty) {
            reason = "no-op";
            break;
          }
          next = g;
          next->edges[at].penalty = p;
          break;
        }
        case EditKind::gap_up:
        case EditKind::gap_down: {
          double gap;
          if (kind == EditKind::gap_up) {
            gap = std::max(e.gap * cfg.gap_factor, min_gap_step);
          } else {
            gap = e.gap / cfg.gap_factor;
            if (gap < min_gap_step / 2.0) gap = 0.0;
          }
          if (gap == e.gap) {
            reason = "no-op";
            break;
          }
          next = g;
          next->edges[at].gap = gap;
          break;
        }
      }
      if (next) {
        if (auto v = validate(*next); !v.empty()) {
          reason = "invalid result: " + v.front().subject + ": " + v.front().rule;
          next.reset();
        }
      }
      if (next) {
        out.candidates.push_back({kind, at, std::move(*next)});
      } else {
        out.omitted.push_back({kind, at, reason});
      }
    }
  }
  return out;
}

GraphScore evaluate_graph(const ConstraintGraph& g, std::span<const LabeledRecord> windows,
                          const LearnConfig& cfg) {
  if (windows.empty()) throw std::invalid_argument("evaluate_graph: no windows");
  GraphScore s;
  for (const LabeledRecord& w : windows) s.report.add(score_window(g, w, cfg));
  s.errors = s.report.total.errors();
  return s;
}

ConstraintGraph default_initial_graph(std::span<const LabeledRecord> windows) {
  std::vector<double> diffs;
  for (const LabeledRecord& w : windows) {
    const auto& y = w.signal.samples;
    for (std::size_t i = 1; i < y.size(); ++i) diffs.push_back(y[i] - y[i - 1]);
  }
  if (diffs.empty()) throw std::invalid_argument("default_initial_graph: no samples");
  const double med = percentile(diffs, 0.5);
  std::vector<double> dev(diffs.size());
  std::transform(diffs.begin(), diffs.end(), dev.begin(), [&](double d) { return std::abs(d - med); });
  const double sigma = 1.4826 * percentile(dev, 0.5) / std::sqrt(2.0);
  const std::vector<double> all = pooled_samples(windows);
  const double gap = 0.3 * (percentile(all, 0.99) - percentile(all, 0.01));
  return initial_graph(gap, gap, 20.0 * sigma * sigma);
}

double default_min_gap_step(std::span<const LabeledRecord> windows) {
  const std::vector<double> all = pooled_samples(windows);
  return 0.05 * (percentile(all, 0.95) - percentile(all, 0.05));
}

LearnResult learn(const ConstraintGraph& initial, std::span<const LabeledRecord> windows,
                  const LearnConfig& cfg) {
  check_config(cfg);
  if (windows.empty()) throw std::invalid_argument("learn: no training windows");
  if (auto v = validate(initial); !v.empty()) throw GraphValidationError(std::move(v));

  // Deterministic train/validation split of the windows.
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t nval = 0;
  if (windows.size() >= 2) {
    nval = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.validation_fraction * windows.size())), 1,
        windows.size() - 1);
  }
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nval));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(nval), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::vector<LabeledRecord> train;
  std::vector<LabeledRecord> val;
  for (std::size_t i : train_idx) train.push_back(windows[i]);
  for (std::size_t i : val_idx) val.push_back(windows[i]);

  const double gap_step = cfg.min_gap > 0.0 ? cfg.min_gap : default_min_gap_step(train);
  auto val_errors = [&](const ConstraintGraph& g) -> std::size_t {
    return val.empty() ? 0 : evaluate_graph(g, val, cfg).errors;
  };

  LearnResult result;
  result.train_windows = train.size();
  result.validation_windows = val.size();
  ConstraintGraph current = initial;
  std::size_t current_errors = evaluate_graph(current, train, cfg).errors;
  std::size_t last_val = val_errors(current);
  result.trace.initial = {0, std::nullopt, std::nullopt, current_errors, last_val, current};

  ConstraintGraph best_val_graph = current;
  std::size_t best_val = last_val;
  std::size_t rising = 0;

  std::vector<std::atomic<std::uint32_t>> trouble(train.size());
  for (std::size_t it = 1; it <= cfg.max_iterations && current_errors > 0; ++it) {
    CandidateSet set = enumerate_candidates(current, cfg, gap_step);
    const auto& cands = set.candidates;

    // Windows the current graph gets wrong go first. Every candidate is
    // scored on the worst few of them, then finished in order of that
    // partial count, so a strong leader appears early and most losers stop
    // after a few windows. Pruning only drops candidates that cannot outrank
    // one already scored, so the pick does not depend on this order.
    // Remaining windows follow in order of how often they broke earlier
    // candidates.
    const GraphScore now = evaluate_graph(current, train, cfg);
    std::vector<std::pair<std::size_t, std::uint32_t>> key(train.size());
    for (std::size_t w = 0; w < train.size(); ++w) {
      key[w] = {now.report.records[w].counts.errors(), trouble[w].load()};
    }
    std::vector<std::size_t> worder(train.size());
    std::iota(worder.begin(), worder.end(), 0);
    std::stable_sort(worder.begin(), worder.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    const auto wrong = std::min<std::size_t>(
        16, static_cast<std::size_t>(std::count_if(now.report.records.begin(), now.report.records.end(),
                                                   [](const RecordCounts& rc) { return rc.counts.errors() > 0; })));

    std::vector<Rank> ranks;
    for (std::size_t i = 0; i < cands.size(); ++i) ranks.push_back(rank_of(cands[i].graph, i));
    Leader leader(current_errors);
    std::vector<std::optional<std::size_t>> errors(cands.size());
    parallel_for(cands.size(), cfg.threads, [&](std::size_t i) {
      errors[i] = bounded_errors(cands[i].graph, ranks[i], train, worder, 0, wrong, 0, cfg, leader, trouble);
      if (errors[i] && wrong == worder.size()) leader.offer(*errors[i], ranks[i]);
    });
    std::vector<std::size_t> corder;
    if (wrong < worder.size()) {
      for (std::size_t i = 0; i < cands.size(); ++i) {
        if (errors[i]) corder.push_back(i);
      }
    }
    std::sort(corder.begin(), corder.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(*errors[a], ranks[a]) < std::tie(*errors[b], ranks[b]);
    });
    parallel_for(corder.size(), cfg.threads, [&](std::size_t k) {
      const std::size_t i = corder[k];
      errors[i] = bounded_errors(cands[i].graph, ranks[i], train, worder, wrong, worder.size(), *errors[i],
                                 cfg, leader, trouble);
      if (errors[i]) leader.offer(*errors[i], ranks[i]);
    });

    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (!errors[i] || *errors[i] >= current_errors) continue;
      if (!pick || std::tie(*errors[i], ranks[i]) < std::tie(*errors[*pick], ranks[*pick])) pick = i;
    }
    if (!pick) break;

    current = cands[*pick].graph;
    current_errors = *errors[*pick];
    const std::size_t v = val_errors(current);
    result.trace.accepted.push_back(
        {it, cands[*pick].kind, cands[*pick].anchor_edge, current_errors, v, current});

    rising = v > last_val ? rising + 1 : 0;
    last_val = v;
    if (v < best_val) {
      best_val = v;
      best_val_graph = current;
    }
    if (rising >= 2) {
      result.early_stopped = true;
      break;
    }
  }
  result.best = result.early_stopped ? best_val_graph : current;
  return result;
}

std::string trace_to_jsonl(const LearnTrace& trace) {
  std::string out = iteration_json(trace.initial).dump() + "\n";
  for (const IterationRecord& r : trace.accepted) out += iteration_json(r).dump() + "\n";
  return out;
}

std::string trace_to_csv(const LearnTrace& trace) {
  std::ostringstream os;
  os << "iteration,train_errors,validation_errors\n";
  auto row = [&](const IterationRecord& r) {
    os << r.iteration << ',' << r.train_errors << ',' << r.validation_errors << '\n';
  };
  row(trace.initial);
  for (const IterationRecord& r : trace.accepted) row(r);
  return os.str();
}

}  // namespace gccd
