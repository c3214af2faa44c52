// gccd: R-peak detection with learned constraint graphs.
//
//   gccd detect --signal rec.csv --graph g.json --out-dir out
//   gccd learn  --signal a.csv --annotations a.txt [...] --out-dir out
//   gccd eval   --signal a.csv --annotations a.txt --graph g.json --out-dir out
//   gccd cv     --signal a.csv --annotations a.txt [...] --k 5 --out-dir out
//   gccd synth  --out-dir out --cycles 60 --seed 1
//
// Exit codes: 0 success, 2 input error, 3 infeasible model, 4 internal error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gccd/crossval.hpp"
#include "gccd/data.hpp"
#include "gccd/eval.hpp"
#include "gccd/graph.hpp"
#include "gccd/learn.hpp"
#include "gccd/solver.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitInternal = 4;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::vector<std::string> signals;
  std::vector<std::string> annotations;
  std::string graph;
  std::string initial_graph;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  double tolerance_ms = 100.0;
  std::size_t max_iterations = 20;
  std::size_t k = 5;
  double validation_fraction = 0.25;
  std::string start_state;
  double sample_rate = 360.0;
  std::string lead = "MLII";
  std::size_t threads = 0;
  bool pooled = false;
  bool frozen = false;
  // synth
  gccd::SynthConfig synth;
  std::string name = "synth";
};

void progress(const std::string& msg) { std::cerr << "gccd: " << msg << '\n'; }

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write '" + p.string() + "'");
  out << body;
}

std::vector<gccd::LabeledRecord> load_records(const Options& o) {
  if (o.signals.empty()) throw InputError("at least one --signal is required");
  if (o.annotations.size() != o.signals.size()) {
    throw InputError("each --signal needs a matching --annotations (got " +
                     std::to_string(o.signals.size()) + " and " +
                     std::to_string(o.annotations.size()) + ")");
  }
  std::vector<gccd::LabeledRecord> recs;
  for (std::size_t i = 0; i < o.signals.size(); ++i) {
    recs.push_back(gccd::load_record(o.signals[i], o.annotations[i], o.sample_rate, o.lead));
  }
  return recs;
}

gccd::LearnConfig learn_config(const Options& o, const gccd::ConstraintGraph* g) {
  gccd::LearnConfig cfg;
  cfg.max_iterations = o.max_iterations;
  cfg.tolerance_ms = o.tolerance_ms;
  cfg.validation_fraction = o.validation_fraction;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  if (!o.start_state.empty()) {
    if (!g) throw InputError("--start-state needs an explicit graph");
    try {
      cfg.start_state = g->state_by_name(o.start_state);
    } catch (const std::out_of_range&) {
      throw InputError("--start-state '" + o.start_state + "' is not a state of the graph");
    }
  }
  try {
    gccd::check_config(cfg);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return cfg;
}

// Records what is about to run, before any computation.
void write_manifest(const std::string& command, const Options& o, const std::vector<std::string>& argv,
                    const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["tool_version"] = GCCD_VERSION;
  m["argv"] = argv;
  m["seed"] = o.seed;
  json cfg;
  cfg["sample_rate"] = o.sample_rate;
  cfg["lead"] = o.lead;
  cfg["tolerance_ms"] = o.tolerance_ms;
  cfg["max_iterations"] = o.max_iterations;
  cfg["k"] = o.k;
  cfg["validation_fraction"] = o.validation_fraction;
  cfg["start_state"] = o.start_state.empty() ? json(nullptr) : json(o.start_state);
  cfg["pooled"] = o.pooled;
  cfg["frozen"] = o.frozen;
  cfg["threads"] = o.threads;
  if (command == "synth") {
    cfg["cycles"] = o.synth.n_cycles;
    cfg["heart_rate_bpm"] = o.synth.heart_rate_bpm;
    cfg["r_amplitude"] = o.synth.r_amplitude;
    cfg["noise_sigma"] = o.synth.noise_sigma;
    cfg["baseline_wander_amp"] = o.synth.baseline_wander_amp;
    cfg["pre_r_dip"] = o.synth.pre_r_dip;
    cfg["invert_qrs"] = o.synth.invert_qrs;
  }
  m["config"] = cfg;
  json in;
  in["signals"] = o.signals;
  in["annotations"] = o.annotations;
  in["graph"] = o.graph.empty() ? json(nullptr) : json(o.graph);
  in["initial_graph"] = o.initial_graph.empty() ? json(nullptr) : json(o.initial_graph);
  m["inputs"] = in;
  m["outputs"] = outputs;
  fs::create_directories(o.out_dir);
  write_file(fs::path(o.out_dir) / "manifest.json", m.dump(2) + "\n");
}

std::string segmentation_json(const gccd::Segmentation& s, const gccd::ConstraintGraph& g,
                              const std::vector<std::size_t>& peaks) {
  json j;
  j["boundaries"] = s.boundaries;
  j["edges_taken"] = s.edges_taken;
  j["means"] = s.means;
  json names = json::array();
  for (gccd::StateId v : s.states) names.push_back(g.states[v].name);
  j["states"] = names;
  j["total_cost"] = s.total_cost;
  j["max_pieces"] = s.max_pieces;
  j["mean_pieces"] = s.mean_pieces;
  j["rpeaks"] = peaks;
  return j.dump(2) + "\n";
}

int cmd_detect(const Options& o, const std::vector<std::string>& argv) {
  if (o.signals.size() != 1) throw InputError("detect takes exactly one --signal");
  if (o.graph.empty()) throw InputError("detect needs --graph");
  const fs::path out(o.out_dir);
  write_manifest("detect", o, argv, {"segmentation.json", "peaks.txt"});
  const gccd::ConstraintGraph g = gccd::load_graph_file(o.graph);
  gccd::LabeledRecord r;
  if (!o.annotations.empty()) {
    r = gccd::load_record(o.signals[0], o.annotations[0], o.sample_rate, o.lead);
  } else {
    r.signal = gccd::load_signal(o.signals[0], o.sample_rate);
  }
  const gccd::LearnConfig cfg = learn_config(o, &g);
  progress("solving " + std::to_string(r.signal.size()) + " samples with " +
           std::to_string(g.states.size()) + " states");
  const gccd::Segmentation seg = gccd::solve(r.signal, g, cfg.start_state);
  const auto peaks = gccd::extract_rpeaks(seg, r.signal, g);
  write_file(out / "segmentation.json", segmentation_json(seg, g, peaks));
  std::string text;
  for (std::size_t p : peaks) text += std::to_string(p) + "\n";
  write_file(out / "peaks.txt", text);
  progress(std::to_string(peaks.size()) + " R peaks");
  if (!r.rpeak_annotations.empty()) {
    const auto m = gccd::match(r.rpeak_annotations, peaks,
                               gccd::tolerance_samples(o.tolerance_ms, r.signal.sample_rate));
    progress("against annotations: tp=" + std::to_string(m.tp) + " fp=" + std::to_string(m.fp) +
             " fn=" + std::to_string(m.fn));
  }
  return 0;
}

int cmd_learn(const Options& o, const std::vector<std::string>& argv) {
  const fs::path out(o.out_dir);
  write_manifest("learn", o, argv,
                 {"learned_graph.json", "trace.jsonl", "learning_curve.csv", "test_report.json",
                  "test_table.txt"});
  const auto recs = load_records(o);
  std::vector<gccd::LabeledRecord> train;
  std::vector<gccd::LabeledRecord> test;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    auto split = gccd::split_cycles(recs[i], o.seed + i);
    train.insert(train.end(), split.train.begin(), split.train.end());
    test.insert(test.end(), split.test.begin(), split.test.end());
  }
  const gccd::ConstraintGraph initial = o.initial_graph.empty()
                                            ? gccd::default_initial_graph(train)
                                            : gccd::load_graph_file(o.initial_graph);
  const gccd::LearnConfig cfg = learn_config(o, &initial);
  progress("learning on " + std::to_string(train.size()) + " windows from " +
           std::to_string(recs.size()) + " records");
  const auto res = gccd::learn(initial, train, cfg);
  for (const auto& it : res.trace.accepted) {
    progress("iteration " + std::to_string(it.iteration) + ": " + std::string(gccd::to_string(*it.kind)) +
             " on edge " + std::to_string(*it.anchor_edge) + ", train " +
             std::to_string(it.train_errors) + ", validation " + std::to_string(it.validation_errors));
  }
  gccd::save_graph_file(res.best, (out / "learned_graph.json").string());
  write_file(out / "trace.jsonl", gccd::trace_to_jsonl(res.trace));
  write_file(out / "learning_curve.csv", gccd::trace_to_csv(res.trace));
  const auto score = gccd::evaluate_graph(res.best, test, cfg);
  write_file(out / "test_report.json", gccd::to_json(score.report));
  write_file(out / "test_table.txt", gccd::to_table({{"learned", score.report.metrics}}));
  progress("held-out cycles: " + std::to_string(score.errors) + " errors");
  return 0;
}

int cmd_eval(const Options& o, const std::vector<std::string>& argv) {
  if (o.graph.empty()) throw InputError("eval needs --graph");
  const fs::path out(o.out_dir);
  write_manifest("eval", o, argv, {"report.json", "table.txt"});
  const gccd::ConstraintGraph g = gccd::load_graph_file(o.graph);
  const auto recs = load_records(o);
  const gccd::LearnConfig cfg = learn_config(o, &g);
  const auto score = gccd::evaluate_graph(g, recs, cfg);
  write_file(out / "report.json", gccd::to_json(score.report));
  const std::string table = gccd::to_table({{fs::path(o.graph).stem().string(), score.report.metrics}});
  write_file(out / "table.txt", table);
  std::cerr << table;
  return 0;
}

int cmd_cv(const Options& o, const std::vector<std::string>& argv) {
  const fs::path out(o.out_dir);
  write_manifest("cv", o, argv, {"cv_report.json", "cv_table.txt"});
  const auto recs = load_records(o);
  gccd::CvOptions cv;
  cv.k = o.k;
  cv.pooled = o.pooled;
  cv.frozen = o.frozen;
  if (!o.initial_graph.empty()) cv.initial = gccd::load_graph_file(o.initial_graph);
  if (o.frozen && !cv.initial) throw InputError("--frozen needs --initial-graph");
  cv.learn = learn_config(o, cv.initial ? &*cv.initial : nullptr);
  for (const auto& r : recs) {
    if (r.rpeak_annotations.size() < o.k) {
      throw InputError("record '" + r.record_id + "' has " + std::to_string(r.rpeak_annotations.size()) +
                       " annotated cycles, fewer than --k " + std::to_string(o.k));
    }
  }
  progress(std::to_string(o.k) + "-fold cross-validation over " + std::to_string(recs.size()) +
           " records");
  const auto rep = gccd::cross_validate(recs, cv);
  write_file(out / "cv_report.json", gccd::to_json(rep));
  const std::string table = gccd::to_table(
      {{"pooled", rep.pooled_metrics}, {"fold average", rep.fold_average}});
  write_file(out / "cv_table.txt", table);
  std::cerr << table;
  return 0;
}

int cmd_synth(const Options& o, const std::vector<std::string>& argv) {
  const fs::path out(o.out_dir);
  write_manifest("synth", o, argv, {o.name + ".csv", o.name + ".ann"});
  gccd::LabeledRecord r;
  try {
    r = gccd::generate_synthetic(o.synth);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  gccd::save_record(r, (out / (o.name + ".csv")).string(), (out / (o.name + ".ann")).string());
  progress(std::to_string(r.signal.size()) + " samples, " + std::to_string(r.rpeak_annotations.size()) +
           " beats");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"R-peak detection with learned constraint graphs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(GCCD_VERSION));
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", o.out_dir, "Directory for all outputs")->capture_default_str();
    sub->add_option("--seed", o.seed, "Seed for every random choice")->capture_default_str();
  };
  auto records = [&](CLI::App* sub) {
    sub->add_option("--signal", o.signals, "Signal CSV (sample_index,amplitude); repeatable");
    sub->add_option("--annotations", o.annotations, "R-peak annotation file; one per --signal");
    sub->add_option("--sample-rate", o.sample_rate, "Sampling rate in Hz")->capture_default_str();
    sub->add_option("--lead", o.lead, "Lead tag stored with each record")->capture_default_str();
    sub->add_option("--tolerance-ms", o.tolerance_ms, "Matching tolerance")->capture_default_str();
    sub->add_option("--start-state", o.start_state, "Name of the state the signal starts in");
  };
  auto learning = [&](CLI::App* sub) {
    sub->add_option("--initial-graph", o.initial_graph, "Graph to start from (default: derived from data)");
    sub->add_option("--max-iterations", o.max_iterations, "Learning iterations")->capture_default_str();
    sub->add_option("--validation-fraction", o.validation_fraction, "Share of windows held out")
        ->capture_default_str();
    sub->add_option("--threads", o.threads, "Worker threads (0: all cores)")->capture_default_str();
  };

  auto* detect = app.add_subcommand("detect", "Segment one signal and extract R peaks");
  common(detect);
  records(detect);
  detect->add_option("--graph", o.graph, "Constraint graph JSON")->required();

  auto* learn = app.add_subcommand("learn", "Learn a constraint graph from labeled records");
  common(learn);
  records(learn);
  learning(learn);

  auto* eval = app.add_subcommand("eval", "Score a graph on labeled records");
  common(eval);
  records(eval);
  eval->add_option("--graph", o.graph, "Constraint graph JSON")->required();

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation of learning");
  common(cv);
  records(cv);
  learning(cv);
  cv->add_option("--k", o.k, "Number of folds")->capture_default_str();
  cv->add_flag("--pooled", o.pooled, "Learn one graph across all records per fold");
  cv->add_flag("--frozen", o.frozen, "Score --initial-graph without learning");

  auto* synth = app.add_subcommand("synth", "Write a synthetic labeled record");
  common(synth);
  synth->add_option("--name", o.name, "File name stem")->capture_default_str();
  synth->add_option("--cycles", o.synth.n_cycles, "Beats")->capture_default_str();
  synth->add_option("--heart-rate", o.synth.heart_rate_bpm, "Beats per minute")->capture_default_str();
  synth->add_option("--sample-rate", o.synth.sample_rate, "Hz")->capture_default_str();
  synth->add_option("--amplitude", o.synth.r_amplitude, "R amplitude")->capture_default_str();
  synth->add_option("--noise", o.synth.noise_sigma, "White-noise sigma")->capture_default_str();
  synth->add_option("--wander", o.synth.baseline_wander_amp, "Baseline wander amplitude")
      ->capture_default_str();
  synth->add_option("--dip", o.synth.pre_r_dip, "Pre-R dip depth")->capture_default_str();
  synth->add_flag("--invert", o.synth.invert_qrs, "Negative QRS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }
  o.synth.seed = o.seed;
  const std::vector<std::string> args(argv, argv + argc);

  try {
    if (*detect) return cmd_detect(o, args);
    if (*learn) return cmd_learn(o, args);
    if (*eval) return cmd_eval(o, args);
    if (*cv) return cmd_cv(o, args);
    if (*synth) return cmd_synth(o, args);
  } catch (const gccd::InfeasibleError& e) {
    std::cerr << "gccd: infeasible model: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const InputError& e) {
    std::cerr << "gccd: " << e.what() << '\n';
    return kExitInput;
  } catch (const gccd::GraphParseError& e) {
    std::cerr << "gccd: " << e.what() << '\n';
    return kExitInput;
  } catch (const gccd::GraphValidationError& e) {
    std::cerr << "gccd: invalid graph: " << e.what() << '\n';
    return kExitInput;
  } catch (const gccd::RecordFormatError& e) {
    std::cerr << "gccd: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "gccd: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "gccd: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
