#include "gccd/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string_view>

namespace gccd {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_line(const std::string& path, std::size_t line, const std::string& what) {
  throw RecordFormatError(path + ":" + std::to_string(line) + ": " + what);
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_real(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace

void check_record(const LabeledRecord& r) {
  if (!(r.signal.sample_rate > 0.0)) throw RecordFormatError("sample rate must be positive");
  const std::size_t n = r.signal.size();
  for (std::size_t k = 0; k < r.rpeak_annotations.size(); ++k) {
    const std::size_t a = r.rpeak_annotations[k];
    if (a >= n) {
      throw RecordFormatError("annotation " + std::to_string(a) + " outside signal of " +
                              std::to_string(n) + " samples");
    }
    if (k > 0 && a <= r.rpeak_annotations[k - 1]) {
      throw RecordFormatError("annotations must be strictly increasing (at " + std::to_string(a) +
                              ")");
    }
  }
  if (r.scored && (r.scored->first > r.scored->second || r.scored->second > n)) {
    throw RecordFormatError("scored range outside the signal");
  }
}

Signal load_signal(const std::string& signal_path, double sample_rate) {
  Signal s;
  s.sample_rate = sample_rate;
  std::ifstream sig(signal_path);
  if (!sig) throw RecordFormatError("cannot open signal file '" + signal_path + "'");
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(sig, line)) bad_line(signal_path, 1, "missing header");
  ++lineno;
  if (trim(line) != "sample_index,amplitude") {
    bad_line(signal_path, lineno, "expected header 'sample_index,amplitude'");
  }
  while (std::getline(sig, line)) {
    ++lineno;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) bad_line(signal_path, lineno, "expected two columns");
    std::size_t index = 0;
    double amp = 0.0;
    if (!parse_number(row.substr(0, comma), index)) {
      bad_line(signal_path, lineno, "malformed sample index");
    }
    if (!parse_number(row.substr(comma + 1), amp) || !std::isfinite(amp)) {
      bad_line(signal_path, lineno, "malformed amplitude");
    }
    if (index != s.samples.size()) {
      bad_line(signal_path, lineno,
               "sample index " + std::to_string(index) + " out of sequence (expected " +
                   std::to_string(s.samples.size()) + ")");
    }
    s.samples.push_back(amp);
  }
  return s;
}

LabeledRecord load_record(const std::string& signal_path, const std::string& annotation_path,
                          double sample_rate, std::string lead) {
  LabeledRecord r;
  r.lead = std::move(lead);
  {
    const auto slash = signal_path.find_last_of('/');
    std::string base = slash == std::string::npos ? signal_path : signal_path.substr(slash + 1);
    if (auto dot = base.find_last_of('.'); dot != std::string::npos) base.resize(dot);
    r.record_id = base;
  }
  r.signal = load_signal(signal_path, sample_rate);

  std::string line;
  std::size_t lineno = 0;
  std::ifstream ann(annotation_path);
  if (!ann) throw RecordFormatError("cannot open annotation file '" + annotation_path + "'");
  lineno = 0;
  while (std::getline(ann, line)) {
    ++lineno;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    std::size_t a = 0;
    if (!parse_number(row, a)) bad_line(annotation_path, lineno, "malformed sample index");
    if (a >= r.signal.size()) {
      bad_line(annotation_path, lineno,
               "annotation " + std::to_string(a) + " outside signal of " +
                   std::to_string(r.signal.size()) + " samples");
    }
    if (!r.rpeak_annotations.empty() && a <= r.rpeak_annotations.back()) {
      bad_line(annotation_path, lineno, "annotations must be strictly increasing");
    }
    r.rpeak_annotations.push_back(a);
  }
  check_record(r);
  return r;
}

void save_record(const LabeledRecord& r, const std::string& signal_path,
                 const std::string& annotation_path) {
  std::ofstream sig(signal_path, std::ios::binary);
  if (!sig) throw RecordFormatError("cannot write '" + signal_path + "'");
  sig << "sample_index,amplitude\n";
  for (std::size_t i = 0; i < r.signal.size(); ++i) {
    sig << i << ',' << format_real(r.signal.samples[i]) << '\n';
  }
  std::ofstream ann(annotation_path, std::ios::binary);
  if (!ann) throw RecordFormatError("cannot write '" + annotation_path + "'");
  for (std::size_t a : r.rpeak_annotations) ann << a << '\n';
}

namespace {

struct Layout {
  std::size_t n = 0;
  std::vector<std::size_t> centers;
  double wander_phase = 0.0;
};

Layout layout(const SynthConfig& cfg, std::mt19937_64& rng) {
  Layout l;
  const double cycle = cfg.sample_rate * 60.0 / cfg.heart_rate_bpm;
  l.n = static_cast<std::size_t>(std::llround(static_cast<double>(cfg.n_cycles) * cycle));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t k = 0; k < cfg.n_cycles; ++k) {
    const double c = (static_cast<double>(k) + 0.5) * cycle + cfg.rr_jitter * cycle * unit(rng);
    l.centers.push_back(static_cast<std::size_t>(std::llround(c)));
  }
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  l.wander_phase = phase(rng);
  return l;
}

void check_synth(const SynthConfig& cfg) {
  if (cfg.n_cycles == 0 || !(cfg.heart_rate_bpm > 0.0) || !(cfg.sample_rate > 0.0) ||
      !(cfg.r_amplitude > 0.0) || !(cfg.noise_sigma >= 0.0) || !(cfg.baseline_wander_amp >= 0.0) ||
      !(cfg.pre_r_dip >= 0.0) || !(cfg.rr_jitter >= 0.0 && cfg.rr_jitter < 0.5)) {
    throw std::invalid_argument("invalid synthetic record configuration");
  }
}

std::vector<double> render(const SynthConfig& cfg, const Layout& l) {
  constexpr double kFwhmToSigma = 2.3548200450309493;
  const double r_sd = 0.030 * cfg.sample_rate / kFwhmToSigma;
  const double dip_sd = 0.040 * cfg.sample_rate / kFwhmToSigma;
  const double dip_offset = 0.050 * cfg.sample_rate;
  const double sign = cfg.invert_qrs ? -1.0 : 1.0;
  const auto reach = static_cast<std::ptrdiff_t>(std::ceil(8.0 * std::max(r_sd, dip_sd) + dip_offset));

  std::vector<double> y(l.n, 0.0);
  const double w = 2.0 * std::numbers::pi * cfg.baseline_wander_hz / cfg.sample_rate;
  for (std::size_t i = 0; i < l.n; ++i) {
    y[i] = cfg.baseline_wander_amp * std::sin(w * static_cast<double>(i) + l.wander_phase);
  }
  for (std::size_t c : l.centers) {
    const auto center = static_cast<std::ptrdiff_t>(c);
    const std::ptrdiff_t from = std::max<std::ptrdiff_t>(0, center - reach);
    const std::ptrdiff_t to = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(l.n), center + reach);
    for (std::ptrdiff_t i = from; i < to; ++i) {
      const double dr = static_cast<double>(i - center);
      double v = cfg.r_amplitude * std::exp(-0.5 * dr * dr / (r_sd * r_sd));
      if (cfg.pre_r_dip > 0.0) {
        const double dd = dr + dip_offset;
        v -= cfg.pre_r_dip * std::exp(-0.5 * dd * dd / (dip_sd * dip_sd));
      }
      y[static_cast<std::size_t>(i)] += sign * v;
    }
  }
  return y;
}

}  // namespace

std::vector<double> synthetic_clean(const SynthConfig& cfg) {
  check_synth(cfg);
  std::mt19937_64 rng(cfg.seed);
  return render(cfg, layout(cfg, rng));
}

LabeledRecord generate_synthetic(const SynthConfig& cfg) {
  check_synth(cfg);
  std::mt19937_64 rng(cfg.seed);
  const Layout l = layout(cfg, rng);
  LabeledRecord r;
  r.record_id = "synth-" + std::to_string(cfg.seed);
  r.lead = "synthetic";
  r.signal.sample_rate = cfg.sample_rate;
  r.signal.samples = render(cfg, l);
  if (cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (double& v : r.signal.samples) v += noise(rng);
  }
  r.rpeak_annotations = l.centers;
  check_record(r);
  return r;
}

}  // namespace gccd
