#include "gccd/crossval.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace gccd {

namespace {

std::vector<LabeledRecord> windows_for(const LabeledRecord& r, const std::vector<Cycle>& cycles,
                                       const std::vector<std::size_t>& fold_of, std::size_t fold,
                                       bool held_out) {
  std::vector<bool> sel(cycles.size());
  for (std::size_t c = 0; c < cycles.size(); ++c) sel[c] = (fold_of[c] == fold) == held_out;
  return cut_windows(r, cycles, sel);
}

ConstraintGraph train_graph(std::span<const LabeledRecord> train, const CvOptions& opts,
                            std::uint64_t seed, FoldResult& fr, const std::string& id) {
  ConstraintGraph start = opts.initial ? *opts.initial : default_initial_graph(train);
  if (opts.frozen) {
    fr.graphs.emplace_back(id, start);
    return start;
  }
  LearnConfig cfg = opts.learn;
  cfg.seed = seed;
  LearnResult lr = learn(start, train, cfg);
  fr.graphs.emplace_back(id, lr.best);
  fr.traces.push_back(std::move(lr.trace));
  return fr.graphs.back().second;
}

void add_average(std::optional<double>& sum, std::size_t& n, const std::optional<double>& v) {
  if (!v) return;
  sum = sum.value_or(0.0) + *v;
  ++n;
}

}  // namespace

CvReport cross_validate(std::span<const LabeledRecord> records, const CvOptions& opts) {
  if (records.empty()) throw std::invalid_argument("cross_validate: no records");
  if (opts.frozen && !opts.initial) {
    throw std::invalid_argument("cross_validate: frozen evaluation needs a graph");
  }
  CvReport rep;
  rep.plan = make_fold_plan(records, opts.k, opts.learn.seed);
  std::vector<std::vector<Cycle>> cycles;
  for (const LabeledRecord& r : records) cycles.push_back(cycles_of(r));

  for (std::size_t f = 0; f < opts.k; ++f) {
    FoldResult fr;
    fr.fold = f;
    const std::uint64_t seed = opts.learn.seed + 7919 * (f + 1);
    std::optional<ConstraintGraph> shared;
    if (opts.pooled) {
      std::vector<LabeledRecord> train;
      for (std::size_t i = 0; i < records.size(); ++i) {
        auto w = windows_for(records[i], cycles[i], rep.plan.fold_of[i], f, false);
        train.insert(train.end(), w.begin(), w.end());
      }
      shared = train_graph(train, opts, seed, fr, "pooled");
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      const ConstraintGraph g =
          shared ? *shared
                 : train_graph(windows_for(records[i], cycles[i], rep.plan.fold_of[i], f, false), opts,
                               seed + i, fr, records[i].record_id);
      const auto test = windows_for(records[i], cycles[i], rep.plan.fold_of[i], f, true);
      const GraphScore s = evaluate_graph(g, test, opts.learn);
      fr.report.add({records[i].record_id, s.report.total,
                     std::any_of(s.report.records.begin(), s.report.records.end(),
                                 [](const RecordCounts& rc) { return rc.infeasible; })});
    }
    rep.pooled += fr.report.total;
    rep.folds.push_back(std::move(fr));
  }
  rep.pooled_metrics = metrics(rep.pooled.tp, rep.pooled.fp, rep.pooled.fn);

  std::size_t ns = 0;
  std::size_t np = 0;
  std::size_t nd = 0;
  for (const FoldResult& fr : rep.folds) {
    add_average(rep.fold_average.sen, ns, fr.report.metrics.sen);
    add_average(rep.fold_average.ppr, np, fr.report.metrics.ppr);
    add_average(rep.fold_average.der, nd, fr.report.metrics.der);
  }
  if (ns) *rep.fold_average.sen /= static_cast<double>(ns);
  if (np) *rep.fold_average.ppr /= static_cast<double>(np);
  if (nd) *rep.fold_average.der /= static_cast<double>(nd);
  return rep;
}

std::string to_json(const CvReport& r) {
  auto metrics_json = [](const Metrics& m) {
    nlohmann::ordered_json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
      j[key] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    put("sen", m.sen);
    put("ppr", m.ppr);
    put("der", m.der);
    return j;
  };
  nlohmann::ordered_json j;
  j["k"] = r.plan.k;
  j["seed"] = r.plan.seed;
  j["folds"] = nlohmann::ordered_json::array();
  for (const FoldResult& f : r.folds) {
    nlohmann::ordered_json fj;
    fj["fold"] = f.fold;
    fj["records"] = nlohmann::ordered_json::array();
    for (const RecordCounts& rc : f.report.records) {
      fj["records"].push_back({{"record_id", rc.record_id},
                               {"tp", rc.counts.tp},
                               {"fp", rc.counts.fp},
                               {"fn", rc.counts.fn},
                               {"infeasible", rc.infeasible}});
    }
    fj["total"] = {{"tp", f.report.total.tp}, {"fp", f.report.total.fp}, {"fn", f.report.total.fn}};
    fj["metrics"] = metrics_json(f.report.metrics);
    fj["graph_states"] = nlohmann::ordered_json::array();
    for (const auto& [id, g] : f.graphs) fj["graph_states"].push_back({{"id", id}, {"states", g.states.size()}});
    j["folds"].push_back(std::move(fj));
  }
  j["pooled"] = {{"tp", r.pooled.tp}, {"fp", r.pooled.fp}, {"fn", r.pooled.fn}};
  j["pooled_metrics"] = metrics_json(r.pooled_metrics);
  j["fold_average_metrics"] = metrics_json(r.fold_average);
  return j.dump(2) + "\n";
}

}  // namespace gccd
