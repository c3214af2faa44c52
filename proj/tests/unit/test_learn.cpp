#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "gccd/data.hpp"
#include "gccd/learn.hpp"

using namespace gccd;

namespace {

LabeledRecord synth(std::size_t cycles, std::uint64_t seed, double dip = 0.0, double noise = 0.0,
                    double wander = 0.0) {
  SynthConfig cfg;
  cfg.n_cycles = cycles;
  cfg.seed = seed;
  cfg.pre_r_dip = dip;
  cfg.noise_sigma = noise;
  cfg.baseline_wander_amp = wander;
  return generate_synthetic(cfg);
}

std::vector<LabeledRecord> dip_windows() {
  return split_cycles(synth(40, 3, 5.0, 0.2, 3.0), 7).train;
}

bool same_trace(const LearnTrace& a, const LearnTrace& b) {
  auto same = [](const IterationRecord& x, const IterationRecord& y) {
    return x.iteration == y.iteration && x.kind == y.kind && x.anchor_edge == y.anchor_edge &&
           x.train_errors == y.train_errors && x.validation_errors == y.validation_errors &&
           x.graph == y.graph;
  };
  if (!same(a.initial, b.initial) || a.accepted.size() != b.accepted.size()) return false;
  for (std::size_t k = 0; k < a.accepted.size(); ++k) {
    if (!same(a.accepted[k], b.accepted[k])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("candidates of the initial graph") {
  const auto g = initial_graph(1, 1, 50);
  const auto set = enumerate_candidates(g, LearnConfig{}, 0.1);
  CHECK(set.candidates.size() == 16);
  CHECK(set.omitted.size() == 4);
  for (const auto& o : set.omitted) {
    CHECK((o.kind == EditKind::delete_merge_keep_in || o.kind == EditKind::delete_merge_keep_out));
    CHECK(o.reason == "target state is protected");
  }
  for (const auto& c : set.candidates) {
    CHECK(validate(c.graph).empty());
    CHECK(c.graph.states[c.graph.baseline_state].name == "B");
    CHECK(c.graph.states[c.graph.rpeak_state].name == "R");
    CHECK(c.graph.states.size() == 2 + (c.kind == EditKind::insert_two_bump ? 2 : adds_states(c.kind) ? 1 : 0));
  }
}

TEST_CASE("penalty_up doubles one penalty and nothing else") {
  const auto g = initial_graph(1, 1, 50);
  const auto set = enumerate_candidates(g, LearnConfig{}, 0.1);
  const auto it = std::find_if(set.candidates.begin(), set.candidates.end(), [](const EditCandidate& c) {
    return c.kind == EditKind::penalty_up && c.anchor_edge == 0;
  });
  REQUIRE(it != set.candidates.end());
  ConstraintGraph expect = g;
  expect.edges[0].penalty = 100;
  CHECK(it->graph == expect);
}

TEST_CASE("edit definitions on an up edge") {
  const auto g = initial_graph(2, 1, 8);
  const auto set = enumerate_candidates(g, LearnConfig{}, 0.1);
  auto get = [&](EditKind k) {
    return std::find_if(set.candidates.begin(), set.candidates.end(), [&](const EditCandidate& c) {
             return c.kind == k && c.anchor_edge == 0;
           })->graph;
  };
  const auto split = get(EditKind::split_same_dir);
  CHECK(split.edges[0] == Edge{0, 2, Direction::up, 1, 4});
  CHECK(split.edges[1] == Edge{2, 1, Direction::up, 1, 4});
  const auto before = get(EditKind::detour_before);
  CHECK(before.edges[0] == Edge{0, 2, Direction::down, 1, 8});
  CHECK(before.edges[1] == Edge{2, 1, Direction::up, 2, 8});
  const auto after = get(EditKind::detour_after);
  CHECK(after.edges[0] == Edge{0, 2, Direction::up, 2, 8});
  CHECK(after.edges[1] == Edge{2, 1, Direction::down, 1, 8});
  const auto bump = get(EditKind::insert_two_bump);
  CHECK(bump.edges[0] == Edge{0, 2, Direction::up, 2, 8});
  CHECK(bump.edges[1] == Edge{2, 3, Direction::down, 1, 8});
  CHECK(bump.edges[2] == Edge{3, 1, Direction::up, 1, 8});
  CHECK(get(EditKind::gap_up).edges[0].gap == 4);
  CHECK(get(EditKind::gap_down).edges[0].gap == 1);
  CHECK(get(EditKind::penalty_down).edges[0].penalty == 4);
}

TEST_CASE("gap edits respect the minimum step") {
  const auto g = initial_graph(0, 0.04, 8);
  const auto set = enumerate_candidates(g, LearnConfig{}, 0.1);
  for (const auto& c : set.candidates) {
    if (c.kind == EditKind::gap_up && c.anchor_edge == 0) CHECK(c.graph.edges[0].gap == 0.1);
    if (c.kind == EditKind::gap_down && c.anchor_edge == 1) CHECK(c.graph.edges[1].gap == 0.0);
  }
  const bool zero_down = std::any_of(set.omitted.begin(), set.omitted.end(), [](const Omission& o) {
    return o.kind == EditKind::gap_down && o.anchor_edge == 0 && o.reason == "no-op";
  });
  CHECK(zero_down);
}

TEST_CASE("delete edits remove an inserted state") {
  const auto g = initial_graph(2, 1, 8);
  const auto first = enumerate_candidates(g, LearnConfig{}, 0.1);
  const auto split = std::find_if(first.candidates.begin(), first.candidates.end(),
                                  [](const EditCandidate& c) { return c.kind == EditKind::split_same_dir; });
  const auto second = enumerate_candidates(split->graph, LearnConfig{}, 0.1);
  bool found = false;
  for (const auto& c : second.candidates) {
    if (c.kind == EditKind::delete_merge_keep_in && c.anchor_edge == 0) {
      found = true;
      CHECK(c.graph.states.size() == 2);
      CHECK(c.graph.edges[0] == Edge{0, 1, Direction::up, 1, 4});
    }
  }
  CHECK(found);
}

TEST_CASE("every graph within three edits of the initial graph is valid") {
  std::mt19937_64 rng(5);
  for (int walk = 0; walk < 60; ++walk) {
    ConstraintGraph g = initial_graph(1, 1, 10);
    for (int step = 0; step < 3; ++step) {
      const auto set = enumerate_candidates(g, LearnConfig{}, 0.1);
      REQUIRE(!set.candidates.empty());
      for (const auto& c : set.candidates) {
        CHECK(validate(c.graph).empty());
        CHECK(c.graph.baseline_state != c.graph.rpeak_state);
        CHECK(c.graph.states.at(c.graph.baseline_state).name == "B");
        CHECK(c.graph.states.at(c.graph.rpeak_state).name == "R");
      }
      std::uniform_int_distribution<std::size_t> pick(0, set.candidates.size() - 1);
      g = set.candidates[pick(rng)].graph;
    }
  }
}

TEST_CASE("evaluate_graph counts") {
  const auto r = synth(10, 1);
  std::vector<LabeledRecord> one{r};
  LearnConfig cfg;

  const auto good = evaluate_graph(initial_graph(3, 3, 200), one, cfg);
  CHECK(good.errors == 0);
  CHECK(good.report.total.tp == 10);

  // too expensive to ever change: no peaks at all
  const auto silent = evaluate_graph(initial_graph(3, 3, 1e12), one, cfg);
  CHECK(silent.errors == 10);
  CHECK(silent.report.total.fn == 10);
  CHECK(silent.report.total.fp == 0);

  // a gap wider than the signal range makes every window infeasible
  const auto none = evaluate_graph(initial_graph(100, 3, 1), one, cfg);
  CHECK(none.errors == 10);
  CHECK(none.report.total.fn == 10);
  CHECK(none.report.records.front().infeasible);

  CHECK_THROWS_AS(evaluate_graph(initial_graph(1, 1, 1), {}, cfg), std::invalid_argument);
}

TEST_CASE("detections outside the scored range are ignored") {
  const auto r = synth(12, 2);
  const auto split = split_cycles(r, 1);
  const auto g = initial_graph(3, 3, 200);
  const auto s = evaluate_graph(g, split.test, LearnConfig{});
  CHECK(s.report.total.tp == 3);
  CHECK(s.errors == 0);
}

TEST_CASE("zero iterations return the initial graph") {
  LearnConfig cfg;
  cfg.max_iterations = 0;
  const auto g = initial_graph(1, 1, 1);
  const auto res = learn(g, dip_windows(), cfg);
  CHECK(res.best == g);
  CHECK(res.trace.accepted.empty());
  CHECK(trace_to_csv(res.trace) == "iteration,train_errors,validation_errors\n0," +
                                       std::to_string(res.trace.initial.train_errors) + "," +
                                       std::to_string(res.trace.initial.validation_errors) + "\n");
}

TEST_CASE("a perfectly solved corpus is left alone") {
  const auto windows = split_cycles(synth(16, 4), 2).train;
  const auto g = initial_graph(3, 3, 200);
  const auto res = learn(g, windows, LearnConfig{});
  CHECK(res.trace.initial.train_errors == 0);
  CHECK(res.trace.accepted.empty());
  CHECK(res.best == g);
}

TEST_CASE("learning on the dip corpus") {
  const auto windows = dip_windows();
  const auto g0 = default_initial_graph(windows);
  LearnConfig cfg;
  cfg.seed = 9;
  cfg.threads = 1;
  const auto res = learn(g0, windows, cfg);
  REQUIRE(!res.trace.accepted.empty());

  std::size_t prev = res.trace.initial.train_errors;
  bool inserted = false;
  for (const auto& it : res.trace.accepted) {
    CHECK(it.train_errors < prev);
    prev = it.train_errors;
    inserted = inserted || adds_states(*it.kind);
    CHECK(it.graph.states.at(it.graph.baseline_state).name == "B");
    CHECK(it.graph.states.at(it.graph.rpeak_state).name == "R");
  }
  CHECK(inserted);
  CHECK(res.best.states.size() > 2);
  CHECK(res.best != g0);

  // the trace's training errors are the training windows' errors
  const auto& last = res.trace.accepted.back();
  CHECK(last.train_errors <= res.trace.initial.train_errors);

  SUBCASE("deterministic, also across thread counts") {
    const auto again = learn(g0, windows, cfg);
    CHECK(same_trace(res.trace, again.trace));
    CHECK(again.best == res.best);
    LearnConfig many = cfg;
    many.threads = 4;
    const auto threaded = learn(g0, windows, many);
    CHECK(same_trace(res.trace, threaded.trace));
    CHECK(trace_to_jsonl(threaded.trace) == trace_to_jsonl(res.trace));
  }
  SUBCASE("serialized trace") {
    const std::string jsonl = trace_to_jsonl(res.trace);
    CHECK(static_cast<std::size_t>(std::count(jsonl.begin(), jsonl.end(), '\n')) ==
          res.trace.accepted.size() + 1);
    const std::string csv = trace_to_csv(res.trace);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) ==
          res.trace.accepted.size() + 2);
  }
}

TEST_CASE("training errors never exceed the errors over all windows") {
  const auto windows = dip_windows();
  const auto g0 = default_initial_graph(windows);
  LearnConfig cfg;
  cfg.max_iterations = 2;
  cfg.threads = 1;
  const auto res = learn(g0, windows, cfg);
  // the training windows are a subset of all windows
  const auto all = evaluate_graph(g0, windows, cfg);
  CHECK(all.errors >= res.trace.initial.train_errors);
  for (const auto& it : res.trace.accepted) {
    const auto s = evaluate_graph(it.graph, windows, cfg);
    CHECK(s.errors >= it.train_errors);
  }
}

TEST_CASE("default initial graph and gap step") {
  const auto windows = dip_windows();
  const auto g = default_initial_graph(windows);
  CHECK(validate(g).empty());
  CHECK(g.edges[0].gap > 0);
  CHECK(g.edges[0].gap == g.edges[1].gap);
  CHECK(g.edges[0].penalty > 0);
  CHECK(default_min_gap_step(windows) > 0);
}

TEST_CASE("config checks") {
  LearnConfig cfg;
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(check_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.penalty_factor = 1.0;
  CHECK_THROWS_AS(check_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.gap_factor = 0.5;
  CHECK_THROWS_AS(check_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.tolerance_ms = -1;
  CHECK_THROWS_AS(check_config(cfg), std::invalid_argument);
  CHECK_THROWS_AS(learn(initial_graph(1, 1, 1), {}, LearnConfig{}), std::invalid_argument);
}
