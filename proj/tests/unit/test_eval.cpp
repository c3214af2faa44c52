#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "gccd/crossval.hpp"
#include "gccd/data.hpp"
#include "gccd/eval.hpp"
#include "gccd/learn.hpp"

using namespace gccd;

namespace {

LabeledRecord clean_record(std::size_t cycles, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_cycles = cycles;
  cfg.seed = seed;
  auto r = generate_synthetic(cfg);
  r.record_id = "clean" + std::to_string(seed);
  return r;
}

// Independent recomputation of a match: best total over all one-to-one
// assignments is not needed, only the counts of a greedy pass written
// from scratch.
std::size_t brute_tp(const std::vector<std::size_t>& l, const std::vector<std::size_t>& d, std::size_t tol) {
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < l.size(); ++i) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      const std::size_t dist = l[i] > d[j] ? l[i] - d[j] : d[j] - l[i];
      if (dist <= tol) all.emplace_back(dist, i, j);
    }
  }
  std::sort(all.begin(), all.end());
  std::set<std::size_t> li;
  std::set<std::size_t> dj;
  for (const auto& [dist, i, j] : all) {
    if (li.count(i) || dj.count(j)) continue;
    li.insert(i);
    dj.insert(j);
  }
  return li.size();
}

}  // namespace

TEST_CASE("match examples") {
  std::vector<std::size_t> labels{100, 460};
  std::vector<std::size_t> det{105, 800};
  auto m = match(labels, det, 36);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  CHECK(m.matched_pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}});

  m = match(labels, labels, 36);
  CHECK(m.tp == 2);
  CHECK(m.fp + m.fn == 0);

  std::vector<std::size_t> one{100};
  std::vector<std::size_t> two{90, 120};
  m = match(one, two, 36);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.matched_pairs.front().second == 0);

  std::vector<std::size_t> unsorted{5, 1};
  CHECK_THROWS_AS(match(unsorted, one, 1), std::invalid_argument);
  CHECK_THROWS_AS(match(one, unsorted, 1), std::invalid_argument);
}

TEST_CASE("match is symmetric and single-use on random inputs") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pos(0, 2000);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::size_t> l(trial % 20);
    std::vector<std::size_t> d(trial % 17);
    for (auto& v : l) v = pos(rng);
    for (auto& v : d) v = pos(rng);
    std::sort(l.begin(), l.end());
    std::sort(d.begin(), d.end());
    const std::size_t tol = trial % 60;
    const auto a = match(l, d, tol);
    const auto b = match(d, l, tol);
    CHECK(a.tp == b.tp);
    CHECK(a.fp == b.fn);
    CHECK(a.fn == b.fp);
    CHECK(a.tp == a.matched_pairs.size());
    CHECK(a.tp == brute_tp(l, d, tol));
    std::set<std::size_t> li;
    std::set<std::size_t> dj;
    for (auto [i, j] : a.matched_pairs) {
      CHECK(li.insert(i).second);
      CHECK(dj.insert(j).second);
      CHECK((l[i] > d[j] ? l[i] - d[j] : d[j] - l[i]) <= tol);
    }
  }
}

TEST_CASE("band matching measures distance to the span") {
  std::vector<std::size_t> labels{100, 500};
  std::vector<std::pair<std::size_t, std::size_t>> spans{{90, 110}, {520, 530}, {900, 905}};
  const auto m = match_bands(labels, spans, 10);
  CHECK(m.tp == 1);
  CHECK(m.fn == 1);
  CHECK(m.fp == 2);
  CHECK(match_bands(labels, spans, 20).tp == 2);
}

TEST_CASE("tolerance in samples") {
  CHECK(tolerance_samples(100, 360) == 36);
  CHECK(tolerance_samples(50, 250) == 13);  // 12.5 rounds away from zero
  CHECK_THROWS_AS(tolerance_samples(-1, 360), std::invalid_argument);
}

TEST_CASE("metrics examples") {
  auto m = metrics(9964, 29, 36);
  CHECK(*m.sen == doctest::Approx(99.64).epsilon(1e-12));
  CHECK(*m.ppr == doctest::Approx(9964.0 / 9993.0 * 100.0).epsilon(1e-12));
  CHECK(*m.ppr == doctest::Approx(99.71).epsilon(1e-4));
  CHECK(*m.der == doctest::Approx(0.65).epsilon(1e-12));
  m = metrics(10, 0, 0);
  CHECK(*m.sen == 100.0);
  CHECK(*m.ppr == 100.0);
  CHECK(*m.der == 0.0);
  m = metrics(0, 5, 5);
  CHECK(*m.sen == 0.0);
  CHECK(*m.ppr == 0.0);
  CHECK(*m.der == 200.0);  // (5 + 5) / (0 + 5)
  m = metrics(0, 0, 0);
  CHECK(!m.sen);
  CHECK(!m.ppr);
  CHECK(!m.der);
  m = metrics(0, 3, 0);
  CHECK(!m.sen);
  CHECK(*m.ppr == 0.0);
}

TEST_CASE("metrics identities on random counts") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> c(0, 5000);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t tp = c(rng);
    const std::size_t fp = c(rng);
    const std::size_t fn = c(rng) + (tp == 0 ? 1 : 0);
    const auto m = metrics(tp, fp, fn);
    REQUIRE(m.sen);
    REQUIRE(m.der);
    CHECK(*m.sen >= 0.0);
    CHECK(*m.sen <= 100.0);
    CHECK(*m.der >= 0.0);
    const double expect = (100.0 - *m.sen) + static_cast<double>(fp) * 100.0 / static_cast<double>(tp + fn);
    CHECK(std::abs(*m.der - expect) <= 1e-9);
  }
}

TEST_CASE("report table and JSON") {
  DetectionReport r;
  r.add({"a", {10, 0, 0}, false});
  r.add({"b", {0, 0, 0}, true});
  CHECK(r.total.tp == 10);
  const std::string table = to_table({{"learned", r.metrics}, {"empty", metrics(0, 0, 0)}});
  CHECK(table.find("Method") != std::string::npos);
  CHECK(table.find("100.00") != std::string::npos);
  CHECK(table.find("0.00") != std::string::npos);
  CHECK(table.find("n/a") != std::string::npos);
  const std::string json = to_json(r);
  CHECK(json.find("\"infeasible\": true") != std::string::npos);
  CHECK(json.find("\"sen\": 100.0") != std::string::npos);
}

TEST_CASE("cycles run between annotation midpoints") {
  LabeledRecord r;
  r.signal.samples.assign(100, 0.0);
  r.rpeak_annotations = {10, 30, 61};
  const auto c = cycles_of(r);
  REQUIRE(c.size() == 3);
  CHECK(c[0].begin == 0);
  CHECK(c[0].end == 20);
  CHECK(c[1].begin == 20);
  CHECK(c[1].end == 46);
  CHECK(c[2].end == 100);
}

TEST_CASE("split sizes") {
  const auto eight = split_cycles(clean_record(8, 1), 3);
  CHECK(std::count(eight.is_test.begin(), eight.is_test.end(), true) == 2);
  const auto four = split_cycles(clean_record(4, 1), 3);
  CHECK(std::count(four.is_test.begin(), four.is_test.end(), true) == 1);
  CHECK_THROWS_AS(split_cycles(clean_record(3, 1), 3), std::invalid_argument);
}

TEST_CASE("split windows are deterministic and cover every label once") {
  const auto r = clean_record(20, 2);
  const auto a = split_cycles(r, 11);
  const auto b = split_cycles(r, 11);
  CHECK(a.is_test == b.is_test);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  std::size_t labels = 0;
  for (const auto* set : {&a.train, &a.test}) {
    for (const LabeledRecord& w : *set) {
      const auto [lo, hi] = w.scored_range();
      for (std::size_t x : w.rpeak_annotations) {
        CHECK(x >= lo);
        CHECK(x < hi);
      }
      labels += w.rpeak_annotations.size();
      CHECK_NOTHROW(check_record(w));
    }
  }
  CHECK(labels == r.rpeak_annotations.size());
  std::size_t ntest = 0;
  for (const auto& w : a.test) ntest += w.rpeak_annotations.size();
  CHECK(ntest == 5);
  CHECK(split_cycles(r, 12).is_test != a.is_test);
}

TEST_CASE("fold plans partition the cycles evenly") {
  std::vector<LabeledRecord> recs{clean_record(10, 1), clean_record(13, 2), clean_record(5, 3)};
  const auto plan = make_fold_plan(recs, 5, 42);
  REQUIRE(plan.fold_of.size() == 3);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    std::vector<std::size_t> size(5, 0);
    CHECK(plan.fold_of[i].size() == recs[i].rpeak_annotations.size());
    for (std::size_t f : plan.fold_of[i]) {
      REQUIRE(f < 5);
      ++size[f];
    }
    const auto [lo, hi] = std::minmax_element(size.begin(), size.end());
    CHECK(*hi - *lo <= 1);
  }
  CHECK(make_fold_plan(recs, 5, 42).fold_of == plan.fold_of);
  CHECK_THROWS_AS(make_fold_plan(recs, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_fold_plan(recs, 6, 0), std::invalid_argument);
}

TEST_CASE("frozen cross-validation of a clean corpus") {
  std::vector<LabeledRecord> recs{clean_record(10, 1), clean_record(12, 2)};
  CvOptions opts;
  opts.initial = initial_graph(3, 3, 200);
  opts.frozen = true;
  const auto cv = cross_validate(recs, opts);
  CHECK(cv.folds.size() == 5);
  CHECK(cv.pooled.tp == 22);
  CHECK(cv.pooled.fp == 0);
  CHECK(cv.pooled.fn == 0);
  CHECK(*cv.pooled_metrics.sen == 100.0);
  CHECK(*cv.pooled_metrics.der == 0.0);
  Counts sum;
  for (const auto& f : cv.folds) sum += f.report.total;
  CHECK(sum.tp == cv.pooled.tp);

  // same counts as scoring the whole records at once
  const auto whole = evaluate_graph(*opts.initial, recs, opts.learn);
  CHECK(whole.report.total.tp == cv.pooled.tp);
  CHECK(whole.report.total.fp == cv.pooled.fp);
  CHECK(whole.report.total.fn == cv.pooled.fn);
  CHECK(to_json(cv).find("fold_average_metrics") != std::string::npos);
}

TEST_CASE("frozen evaluation without a graph is rejected") {
  std::vector<LabeledRecord> recs{clean_record(10, 1)};
  CvOptions opts;
  opts.frozen = true;
  CHECK_THROWS_AS(cross_validate(recs, opts), std::invalid_argument);
}
