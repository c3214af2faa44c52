#pragma once

// k-fold cross-validation of graph learning over labeled records.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gccd/eval.hpp"
#include "gccd/learn.hpp"

namespace gccd {

struct CvOptions {
  std::size_t k = 5;
  LearnConfig learn;
  /// Graph every learner starts from; unset derives one per training set
  /// with default_initial_graph().
  std::optional<ConstraintGraph> initial;
  /// Learn one graph over all records' training cycles instead of one per
  /// record.
  bool pooled = false;
  /// Skip learning and score `initial` directly.
  bool frozen = false;
};

struct FoldResult {
  std::size_t fold = 0;
  DetectionReport report;
  /// Learned graphs, one per record (or one when pooled), with their ids.
  std::vector<std::pair<std::string, ConstraintGraph>> graphs;
  std::vector<LearnTrace> traces;
};

struct CvReport {
  FoldPlan plan;
  std::vector<FoldResult> folds;
  Counts pooled;
  Metrics pooled_metrics;
  /// Mean over folds of each fold's metrics (folds where a metric is
  /// undefined are skipped).
  Metrics fold_average;
};

CvReport cross_validate(std::span<const LabeledRecord> records, const CvOptions& opts);

std::string to_json(const CvReport& r);

}  // namespace gccd
