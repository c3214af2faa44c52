#pragma once

// Labeled ECG records: text ingestion and a synthetic generator.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gccd/solver.hpp"

namespace gccd {

struct LabeledRecord {
  std::string record_id;
  Signal signal;
  std::vector<std::size_t> rpeak_annotations;  // 0-based, strictly increasing
  std::string lead;
  /// Half-open sample range in which detections are scored. Windows cut
  /// from a longer record carry context outside this range; whole records
  /// leave it unset.
  std::optional<std::pair<std::size_t, std::size_t>> scored;

  [[nodiscard]] std::pair<std::size_t, std::size_t> scored_range() const {
    return scored.value_or(std::make_pair(std::size_t{0}, signal.size()));
  }

  bool operator==(const LabeledRecord& o) const {
    return record_id == o.record_id && signal.samples == o.signal.samples &&
           signal.sample_rate == o.signal.sample_rate &&
           rpeak_annotations == o.rpeak_annotations && lead == o.lead && scored == o.scored;
  }
};

class RecordFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws RecordFormatError naming the violated invariant.
void check_record(const LabeledRecord& r);

/// Reads `sample_index,amplitude` CSV (header required).
Signal load_signal(const std::string& signal_path, double sample_rate = 360.0);

/// Reads `sample_index,amplitude` CSV (header required) and an annotation
/// file with one 0-based sample index per line. Errors carry file and line.
LabeledRecord load_record(const std::string& signal_path, const std::string& annotation_path,
                          double sample_rate = 360.0, std::string lead = "MLII");

void save_record(const LabeledRecord& r, const std::string& signal_path,
                 const std::string& annotation_path);

struct SynthConfig {
  std::size_t n_cycles = 10;
  double heart_rate_bpm = 72.0;
  double sample_rate = 360.0;
  double r_amplitude = 10.0;
  double noise_sigma = 0.0;
  double baseline_wander_amp = 0.0;
  double baseline_wander_hz = 0.15;
  double pre_r_dip = 0.0;
  bool invert_qrs = false;
  /// Relative jitter of each cycle length.
  double rr_jitter = 0.05;
  std::uint64_t seed = 0;
};

/// Gaussian-bump R waves (30 ms FWHM), optional pre-R dip, sinusoidal
/// wander and white noise. Annotations are the bump centers.
LabeledRecord generate_synthetic(const SynthConfig& cfg);

/// The generator's output without the white-noise term.
std::vector<double> synthetic_clean(const SynthConfig& cfg);

}  // namespace gccd
