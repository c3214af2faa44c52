#pragma once

// Greedy constraint-graph learning by local graph edits.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gccd/eval.hpp"
#include "gccd/graph.hpp"

namespace gccd {

enum class EditKind {
  split_same_dir,
  detour_before,
  detour_after,
  insert_two_bump,
  delete_merge_keep_in,
  delete_merge_keep_out,
  penalty_up,
  penalty_down,
  gap_up,
  gap_down,
};

inline constexpr std::array<EditKind, 10> kEditKinds = {
    EditKind::split_same_dir,       EditKind::detour_before,         EditKind::detour_after,
    EditKind::insert_two_bump,      EditKind::delete_merge_keep_in,  EditKind::delete_merge_keep_out,
    EditKind::penalty_up,           EditKind::penalty_down,          EditKind::gap_up,
    EditKind::gap_down,
};

std::string_view to_string(EditKind k);
/// True for the kinds that add states.
bool adds_states(EditKind k);

struct EditCandidate {
  EditKind kind;
  EdgeId anchor_edge;
  ConstraintGraph graph;
};

struct Omission {
  EditKind kind;
  EdgeId anchor_edge;
  std::string reason;
};

struct CandidateSet {
  std::vector<EditCandidate> candidates;
  std::vector<Omission> omitted;
};

struct LearnConfig {
  std::size_t max_iterations = 20;
  double tolerance_ms = 100.0;
  double validation_fraction = 0.25;
  double penalty_factor = 2.0;
  double gap_factor = 2.0;
  /// Smallest non-zero gap a gap edit produces; 0 derives it from the data
  /// as 5% of the 5th-95th percentile amplitude spread.
  double min_gap = 0.0;
  std::uint64_t seed = 0;
  /// Worker threads for candidate scoring; 0 uses the hardware count.
  std::size_t threads = 0;
  std::optional<StateId> start_state;
};

/// Throws std::invalid_argument for out-of-range settings.
void check_config(const LearnConfig& cfg);

/// The ten edits of every edge. Edits that are inapplicable, no-ops or
/// would produce an invalid graph are listed in `omitted`.
CandidateSet enumerate_candidates(const ConstraintGraph& g, const LearnConfig& cfg,
                                  double min_gap_step);

struct GraphScore {
  std::size_t errors = 0;  // FN + FP
  DetectionReport report;
};

/// Detects R peaks in every window and scores them against the window's
/// labels inside its scored range. A window the graph cannot solve counts
/// all of its labels as missed.
GraphScore evaluate_graph(const ConstraintGraph& g, std::span<const LabeledRecord> windows,
                          const LearnConfig& cfg);

struct IterationRecord {
  std::size_t iteration = 0;  // 0 is the initial graph
  std::optional<EditKind> kind;
  std::optional<EdgeId> anchor_edge;
  std::size_t train_errors = 0;
  std::size_t validation_errors = 0;
  ConstraintGraph graph;
};

struct LearnTrace {
  IterationRecord initial;
  std::vector<IterationRecord> accepted;
};

struct LearnResult {
  ConstraintGraph best;
  LearnTrace trace;
  bool early_stopped = false;
  std::size_t train_windows = 0;
  std::size_t validation_windows = 0;
};

/// Hill-climbs from `initial`: each iteration scores every candidate on the
/// training windows and accepts the one with the fewest errors if it is
/// strictly better than the current graph.
LearnResult learn(const ConstraintGraph& initial, std::span<const LabeledRecord> windows,
                  const LearnConfig& cfg);

/// Initial B/R graph with data-derived edge values: penalty 20 * sigma^2
/// (sigma from the MAD of first differences) and both gaps
/// 0.3 * (p99 - p1) of the amplitudes.
ConstraintGraph default_initial_graph(std::span<const LabeledRecord> windows);

/// 0.05 * (p95 - p5) of the pooled amplitudes.
double default_min_gap_step(std::span<const LabeledRecord> windows);

/// One JSON object per line: the initial graph, then each accepted edit.
std::string trace_to_jsonl(const LearnTrace& trace);
/// iteration,train_errors,validation_errors
std::string trace_to_csv(const LearnTrace& trace);

}  // namespace gccd
