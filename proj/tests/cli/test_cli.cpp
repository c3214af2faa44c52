#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>
#include <sys/wait.h>

#include "gccd/data.hpp"
#include "gccd/graph.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(GCCD_TEST_SCRATCH) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args, const fs::path& dir) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + GCCD_CLI + "' " + args + " 2>stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const fs::path& p) {
  std::size_t n = 0;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

void write(const fs::path& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

void write_graph(const fs::path& p, double gap, double penalty) {
  write(p, gccd::serialize_graph(gccd::initial_graph(gap, gap, penalty)));
}

// 0 for 50 samples, 10 for 50, 0 for 50.
void write_step(const fs::path& p) {
  std::string s = "sample_index,amplitude\n";
  for (int i = 0; i < 150; ++i) s += std::to_string(i) + "," + (i >= 50 && i < 100 ? "10" : "0") + "\n";
  write(p, s);
}

void synth(const fs::path& dir, const std::string& name, const std::string& extra) {
  REQUIRE(run("synth --out-dir . --name " + name + " " + extra, dir) == 0);
}

}  // namespace

TEST_CASE("detect on a step finds one peak") {
  const auto d = scratch("step");
  write_step(d / "step.csv");
  write_graph(d / "g.json", 1.0, 5.0);
  REQUIRE(run("detect --signal step.csv --graph g.json --out-dir out", d) == 0);
  CHECK(count_lines(d / "out/peaks.txt") == 1);
  const auto seg = json::parse(slurp(d / "out/segmentation.json"));
  CHECK(seg["boundaries"] == json::array({50, 100}));
  CHECK(seg["states"] == json::array({"B", "R", "B"}));
  const auto m = json::parse(slurp(d / "out/manifest.json"));
  CHECK(m["command"] == "detect");
  CHECK(m["outputs"].size() == 2);
}

TEST_CASE("detect on the seven-sample step") {
  const auto d = scratch("step7");
  write(d / "s.csv", "sample_index,amplitude\n0,0\n1,0\n2,0\n3,10\n4,10\n5,0\n6,0\n");
  write_graph(d / "g.json", 1.0, 1.0);
  REQUIRE(run("detect --signal s.csv --graph g.json --start-state B --out-dir out", d) == 0);
  CHECK(slurp(d / "out/peaks.txt") == "3\n");
  const auto seg = json::parse(slurp(d / "out/segmentation.json"));
  CHECK(seg["boundaries"] == json::array({3, 5}));
  CHECK(std::abs(seg["total_cost"].get<double>() - 2.0) <= 1e-9);
  CHECK(run("detect --signal s.csv --graph g.json --start-state Q --out-dir out", d) == 2);
}

TEST_CASE("detect on a ten-cycle synthetic record finds every beat") {
  const auto d = scratch("ten");
  synth(d, "r", "--cycles 10 --heart-rate 60 --seed 2");
  write_graph(d / "g.json", 3.0, 200.0);
  REQUIRE(run("detect --signal r.csv --graph g.json --out-dir out", d) == 0);
  const auto truth = gccd::load_record((d / "r.csv").string(), (d / "r.ann").string());
  std::vector<std::size_t> peaks;
  std::istringstream in(slurp(d / "out/peaks.txt"));
  for (std::size_t p; in >> p;) peaks.push_back(p);
  REQUIRE(peaks.size() == 10);
  for (std::size_t k = 0; k < 10; ++k) {
    const auto diff = static_cast<long>(peaks[k]) - static_cast<long>(truth.rpeak_annotations[k]);
    CHECK(std::abs(diff) <= 36);  // 100 ms at 360 Hz
  }
}

TEST_CASE("an invalid graph exits with 2") {
  const auto d = scratch("invalid");
  write_step(d / "step.csv");
  write(d / "neg.json", R"({"states":[{"id":0,"name":"B"},{"id":1,"name":"R"}],
    "edges":[{"source":0,"target":1,"direction":"up","gap":1,"penalty":-1},
             {"source":1,"target":0,"direction":"down","gap":1,"penalty":1}],
    "baseline_state":0,"rpeak_state":1})");
  CHECK(run("detect --signal step.csv --graph neg.json --out-dir out", d) == 2);
  CHECK(slurp(d / "stderr.txt").find("penalty") != std::string::npos);
  write(d / "broken.json", "{");
  CHECK(run("detect --signal step.csv --graph broken.json --out-dir out", d) == 2);
  CHECK(run("detect --signal missing.csv --graph neg.json --out-dir out", d) == 2);
  CHECK(run("learn --signal step.csv --out-dir out", d) == 2);
  CHECK(run("frobnicate", d) == 2);
}

TEST_CASE("an infeasible graph exits with 3") {
  const auto d = scratch("infeasible");
  write_step(d / "step.csv");
  write_graph(d / "g.json", 100.0, 5.0);
  CHECK(run("detect --signal step.csv --graph g.json --out-dir out", d) == 3);
  CHECK(slurp(d / "stderr.txt").find("infeasible") != std::string::npos);
}

TEST_CASE("learn with zero iterations returns the initial graph") {
  const auto d = scratch("zero");
  synth(d, "r", "--cycles 12 --noise 0.2 --seed 1");
  write_graph(d / "g.json", 2.0, 30.0);
  REQUIRE(run("learn --signal r.csv --annotations r.ann --initial-graph g.json --max-iterations 0 "
              "--out-dir out --threads 1",
              d) == 0);
  CHECK(gccd::load_graph_file((d / "out/learned_graph.json").string()) ==
        gccd::load_graph_file((d / "g.json").string()));
  CHECK(count_lines(d / "out/learning_curve.csv") == 2);
  CHECK(count_lines(d / "out/trace.jsonl") == 1);
}

TEST_CASE("the learning curve has one row per accepted edit plus the initial graph") {
  const auto d = scratch("curve");
  synth(d, "r", "--cycles 24 --noise 0.2 --wander 3 --dip 5 --seed 2");
  REQUIRE(run("learn --signal r.csv --annotations r.ann --out-dir out --threads 1 --seed 5", d) == 0);
  const std::size_t jsonl = count_lines(d / "out/trace.jsonl");
  CHECK(jsonl >= 2);
  // header + initial + accepted
  CHECK(count_lines(d / "out/learning_curve.csv") == jsonl + 1);
  const auto report = json::parse(slurp(d / "out/test_report.json"));
  CHECK(report["records"].size() >= 1);
  const std::string trace = slurp(d / "out/trace.jsonl");
  const auto initial = gccd::parse_graph(json::parse(trace.substr(0, trace.find('\n')))["graph"].dump());
  CHECK(gccd::load_graph_file((d / "out/learned_graph.json").string()) != initial);
}

TEST_CASE("cv writes one entry per fold") {
  const auto d = scratch("cv");
  synth(d, "a", "--cycles 10 --noise 0.1 --seed 3");
  synth(d, "b", "--cycles 10 --noise 0.1 --seed 4");
  write_graph(d / "g.json", 3.0, 200.0);
  REQUIRE(run("cv --signal a.csv --annotations a.ann --signal b.csv --annotations b.ann --k 5 "
              "--initial-graph g.json --max-iterations 1 --threads 1 --out-dir out",
              d) == 0);
  const auto rep = json::parse(slurp(d / "out/cv_report.json"));
  CHECK(rep["k"] == 5);
  CHECK(rep["folds"].size() == 5);
  CHECK(fs::exists(d / "out/cv_table.txt"));
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& f : rep["folds"]) {
    tp += f["total"]["tp"].get<std::size_t>();
    fp += f["total"]["fp"].get<std::size_t>();
    fn += f["total"]["fn"].get<std::size_t>();
  }
  CHECK(rep["pooled"]["tp"] == tp);
  CHECK(rep["pooled"]["fp"] == fp);
  CHECK(rep["pooled"]["fn"] == fn);
  CHECK(tp + fn == 20);
  CHECK(run("cv --signal a.csv --annotations a.ann --k 11 --out-dir out2", d) == 2);
}

TEST_CASE("a clean corpus scores perfectly") {
  const auto d = scratch("perfect");
  synth(d, "a", "--cycles 16 --seed 4");
  synth(d, "b", "--cycles 16 --seed 5");
  write_graph(d / "g.json", 3.0, 200.0);
  REQUIRE(run("eval --signal a.csv --annotations a.ann --signal b.csv --annotations b.ann "
              "--graph g.json --out-dir out",
              d) == 0);
  const std::string table = slurp(d / "out/table.txt");
  CHECK(table.find("100.00    100.00      0.00") != std::string::npos);
  const auto rep = json::parse(slurp(d / "out/report.json"));
  CHECK(rep["total"]["tp"] == 32);
}

TEST_CASE("a manifest and seed reproduce a learning run") {
  const auto d = scratch("repro");
  synth(d, "r", "--cycles 20 --noise 0.2 --wander 3 --dip 5 --seed 6");
  REQUIRE(run("learn --signal r.csv --annotations r.ann --out-dir one --seed 11 --threads 1", d) == 0);
  const auto m = json::parse(slurp(d / "one/manifest.json"));
  CHECK(m["seed"] == 11);
  CHECK(m["tool_version"] == GCCD_VERSION);
  // replay the recorded arguments into a second directory
  std::string args;
  for (std::size_t i = 1; i < m["argv"].size(); ++i) {
    std::string a = m["argv"][i];
    if (a == "one") a = "two";
    args += "'" + a + "' ";
  }
  REQUIRE(run(args, d) == 0);
  for (const char* f : {"learned_graph.json", "trace.jsonl", "learning_curve.csv", "test_report.json"}) {
    CHECK(slurp(d / "one" / f) == slurp(d / "two" / f));
  }
  REQUIRE(run("synth --out-dir again --name r --cycles 20 --noise 0.2 --wander 3 --dip 5 --seed 6", d) == 0);
  CHECK(slurp(d / "r.csv") == slurp(d / "again/r.csv"));
}
