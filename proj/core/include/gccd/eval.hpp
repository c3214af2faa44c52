#pragma once

// Detection scoring (Sen / PPR / DER) and cycle-level data splitting.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gccd/data.hpp"

namespace gccd {

struct MatchResult {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  /// (label index, detection index) pairs, in label order.
  std::vector<std::pair<std::size_t, std::size_t>> matched_pairs;
};

/// Greedy one-to-one matching of sorted label and detection positions,
/// closest pairs first, within +-tolerance samples. Throws
/// std::invalid_argument if either list is unsorted.
MatchResult match(std::span<const std::size_t> labels, std::span<const std::size_t> detections,
                  std::size_t tolerance_samples);

/// As match(), but each detection is a half-open sample span and a label's
/// distance to it is zero inside the span.
MatchResult match_bands(std::span<const std::size_t> labels,
                        std::span<const std::pair<std::size_t, std::size_t>> spans,
                        std::size_t tolerance_samples);

std::size_t tolerance_samples(double tolerance_ms, double sample_rate);

/// Percentages; nullopt where the denominator is zero.
struct Metrics {
  std::optional<double> sen;
  std::optional<double> ppr;
  std::optional<double> der;
};

Metrics metrics(std::size_t tp, std::size_t fp, std::size_t fn);

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  [[nodiscard]] std::size_t errors() const { return fp + fn; }
  bool operator==(const Counts&) const = default;
};

struct RecordCounts {
  std::string record_id;
  Counts counts;
  bool infeasible = false;
};

struct DetectionReport {
  std::vector<RecordCounts> records;
  Counts total;
  Metrics metrics;

  void add(RecordCounts rc);
};

std::string to_json(const DetectionReport& r);
/// Fixed-column "Method  Sen (%)  PPR (%)  DER (%)" table.
std::string to_table(const std::vector<std::pair<std::string, Metrics>>& rows);

/// One heartbeat: the half-open span between the midpoints around an
/// annotation. The first and last cycles extend to the record ends.
struct Cycle {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t annotation = 0;  // index into rpeak_annotations
};

std::vector<Cycle> cycles_of(const LabeledRecord& r);

/// Maximal runs of selected cycles, each cut out with half of the
/// neighbouring cycle as unscored context on either side.
std::vector<LabeledRecord> cut_windows(const LabeledRecord& r, const std::vector<Cycle>& cycles,
                                       const std::vector<bool>& selected);

struct CycleSplit {
  std::vector<bool> is_test;  // per cycle
  std::vector<LabeledRecord> train;
  std::vector<LabeledRecord> test;
};

/// Random 3:1 train/test assignment of a record's cycles. Needs >= 4 cycles.
CycleSplit split_cycles(const LabeledRecord& r, std::uint64_t seed, double test_fraction = 0.25);

struct FoldPlan {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> fold_of;  // [record][cycle]
};

/// Each record's cycles are shuffled and dealt round-robin into k folds.
FoldPlan make_fold_plan(std::span<const LabeledRecord> records, std::size_t k, std::uint64_t seed);

}  // namespace gccd
