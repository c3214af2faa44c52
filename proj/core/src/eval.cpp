#include "gccd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace gccd {

namespace {

template <class T>
void require_sorted(std::span<const T> v, const char* what) {
  if (!std::is_sorted(v.begin(), v.end())) {
    throw std::invalid_argument(std::string(what) + " must be sorted ascending");
  }
}

struct Candidate {
  std::size_t distance;
  std::size_t label;
  std::size_t detection;
  bool operator<(const Candidate& o) const {
    return std::tie(distance, label, detection) < std::tie(o.distance, o.label, o.detection);
  }
};

MatchResult resolve(std::vector<Candidate> pairs, std::size_t nlabels, std::size_t ndet) {
  std::sort(pairs.begin(), pairs.end());
  std::vector<char> label_used(nlabels, 0);
  std::vector<char> det_used(ndet, 0);
  MatchResult out;
  for (const Candidate& c : pairs) {
    if (label_used[c.label] || det_used[c.detection]) continue;
    label_used[c.label] = det_used[c.detection] = 1;
    out.matched_pairs.emplace_back(c.label, c.detection);
  }
  std::sort(out.matched_pairs.begin(), out.matched_pairs.end());
  out.tp = out.matched_pairs.size();
  out.fn = nlabels - out.tp;
  out.fp = ndet - out.tp;
  return out;
}

std::size_t absdiff(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

}  // namespace

MatchResult match(std::span<const std::size_t> labels, std::span<const std::size_t> detections,
                  std::size_t tolerance_samples) {
  require_sorted(labels, "labels");
  require_sorted(detections, "detections");
  std::vector<Candidate> pairs;
  std::size_t first = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    while (first < detections.size() && detections[first] + tolerance_samples < labels[i]) ++first;
    for (std::size_t j = first; j < detections.size() && detections[j] <= labels[i] + tolerance_samples;
         ++j) {
      pairs.push_back({absdiff(labels[i], detections[j]), i, j});
    }
  }
  return resolve(std::move(pairs), labels.size(), detections.size());
}

MatchResult match_bands(std::span<const std::size_t> labels,
                        std::span<const std::pair<std::size_t, std::size_t>> spans,
                        std::size_t tolerance_samples) {
  require_sorted(labels, "labels");
  require_sorted(spans, "spans");
  std::vector<Candidate> pairs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < spans.size(); ++j) {
      const auto [b, e] = spans[j];
      std::size_t d = 0;
      if (labels[i] < b) {
        d = b - labels[i];
      } else if (e > b && labels[i] >= e) {
        d = labels[i] - (e - 1);
      }
      if (d <= tolerance_samples) pairs.push_back({d, i, j});
    }
  }
  return resolve(std::move(pairs), labels.size(), spans.size());
}

std::size_t tolerance_samples(double tolerance_ms, double sample_rate) {
  if (!(tolerance_ms >= 0.0) || !(sample_rate > 0.0)) {
    throw std::invalid_argument("tolerance and sample rate must be non-negative / positive");
  }
  return static_cast<std::size_t>(std::llround(tolerance_ms * sample_rate / 1000.0));
}

Metrics metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  Metrics m;
  const auto d = [](std::size_t x) { return static_cast<double>(x); };
  if (tp + fn > 0) {
    m.sen = d(tp) / d(tp + fn) * 100.0;
    m.der = d(fn + fp) / d(tp + fn) * 100.0;
  }
  if (tp + fp > 0) m.ppr = d(tp) / d(tp + fp) * 100.0;
  return m;
}

void DetectionReport::add(RecordCounts rc) {
  total += rc.counts;
  records.push_back(std::move(rc));
  metrics = gccd::metrics(total.tp, total.fp, total.fn);
}

namespace {

nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  put("sen", m.sen);
  put("ppr", m.ppr);
  put("der", m.der);
  return j;
}

}  // namespace

std::string to_json(const DetectionReport& r) {
  nlohmann::ordered_json j;
  j["records"] = nlohmann::ordered_json::array();
  for (const RecordCounts& rc : r.records) {
    j["records"].push_back({{"record_id", rc.record_id},
                            {"tp", rc.counts.tp},
                            {"fp", rc.counts.fp},
                            {"fn", rc.counts.fn},
                            {"infeasible", rc.infeasible}});
  }
  j["total"] = {{"tp", r.total.tp}, {"fp", r.total.fp}, {"fn", r.total.fn}};
  j["metrics"] = metrics_json(r.metrics);
  return j.dump(2) + "\n";
}

std::string to_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
  std::size_t width = 6;
  for (const auto& [name, m] : rows) width = std::max(width, name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "Method" << std::right << std::setw(10)
     << "Sen (%)" << std::setw(10) << "PPR (%)" << std::setw(10) << "DER (%)" << '\n';
  auto cell = [&](const std::optional<double>& v) {
    if (v) {
      os << std::setw(10) << std::fixed << std::setprecision(2) << *v;
    } else {
      os << std::setw(10) << "n/a";
    }
  };
  for (const auto& [name, m] : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << name << std::right;
    cell(m.sen);
    cell(m.ppr);
    cell(m.der);
    os << '\n';
  }
  return os.str();
}

std::vector<Cycle> cycles_of(const LabeledRecord& r) {
  const auto& a = r.rpeak_annotations;
  std::vector<Cycle> out;
  out.reserve(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    Cycle c;
    c.annotation = k;
    c.begin = k == 0 ? 0 : (a[k - 1] + a[k] + 1) / 2;
    c.end = k + 1 == a.size() ? r.signal.size() : (a[k] + a[k + 1] + 1) / 2;
    out.push_back(c);
  }
  return out;
}

std::vector<LabeledRecord> cut_windows(const LabeledRecord& r, const std::vector<Cycle>& cycles,
                                       const std::vector<bool>& selected) {
  if (selected.size() != cycles.size()) {
    throw std::invalid_argument("cut_windows: selection size differs from cycle count");
  }
  std::vector<LabeledRecord> windows;
  std::size_t k = 0;
  while (k < cycles.size()) {
    if (!selected[k]) {
      ++k;
      continue;
    }
    std::size_t j = k;
    while (j + 1 < cycles.size() && selected[j + 1]) ++j;
    const std::size_t owned_begin = cycles[k].begin;
    const std::size_t owned_end = cycles[j].end;
    const std::size_t left = k > 0 ? (cycles[k - 1].end - cycles[k - 1].begin) / 2 : 0;
    const std::size_t right = j + 1 < cycles.size() ? (cycles[j + 1].end - cycles[j + 1].begin) / 2 : 0;
    const std::size_t from = owned_begin - left;
    const std::size_t to = owned_end + right;

    LabeledRecord w;
    w.record_id = r.record_id + "#" + std::to_string(k);
    w.lead = r.lead;
    w.signal.sample_rate = r.signal.sample_rate;
    w.signal.samples.assign(r.signal.samples.begin() + static_cast<std::ptrdiff_t>(from),
                            r.signal.samples.begin() + static_cast<std::ptrdiff_t>(to));
    for (std::size_t c = k; c <= j; ++c) {
      w.rpeak_annotations.push_back(r.rpeak_annotations[cycles[c].annotation] - from);
    }
    w.scored = std::make_pair(owned_begin - from, owned_end - from);
    windows.push_back(std::move(w));
    k = j + 1;
  }
  return windows;
}

CycleSplit split_cycles(const LabeledRecord& r, std::uint64_t seed, double test_fraction) {
  const std::vector<Cycle> cycles = cycles_of(r);
  if (cycles.size() < 4) {
    throw std::invalid_argument("split_cycles: record '" + r.record_id + "' has " +
                                std::to_string(cycles.size()) + " cycles, need at least 4");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("split_cycles: test fraction must be in (0, 1)");
  }
  const auto n = cycles.size();
  const auto ntest = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  CycleSplit s;
  s.is_test.assign(n, false);
  for (std::size_t k = 0; k < ntest; ++k) s.is_test[order[k]] = true;
  std::vector<bool> is_train(n);
  for (std::size_t k = 0; k < n; ++k) is_train[k] = !s.is_test[k];
  s.train = cut_windows(r, cycles, is_train);
  s.test = cut_windows(r, cycles, s.is_test);
  return s;
}

FoldPlan make_fold_plan(std::span<const LabeledRecord> records, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("cross-validation needs k >= 2");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  std::mt19937_64 rng(seed);
  for (const LabeledRecord& r : records) {
    const std::size_t n = r.rpeak_annotations.size();
    if (n < k) {
      throw std::invalid_argument("record '" + r.record_id + "' has " + std::to_string(n) +
                                  " cycles, fewer than k=" + std::to_string(k));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i % k;
    plan.fold_of.push_back(std::move(fold));
  }
  return plan;
}

}  // namespace gccd
