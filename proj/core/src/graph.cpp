#include "gccd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gccd {

using nlohmann::json;

std::string_view to_string(Direction d) { return d == Direction::up ? "up" : "down"; }

Direction opposite(Direction d) { return d == Direction::up ? Direction::down : Direction::up; }

StateId ConstraintGraph::state_by_name(std::string_view name) const {
  for (const State& s : states) {
    if (s.name == name) return s.id;
  }
  throw std::out_of_range("no state named '" + std::string(name) + "'");
}

std::vector<EdgeId> ConstraintGraph::in_edges(StateId s) const {
  std::vector<EdgeId> out;
  for (EdgeId e = 0; e < edges.size(); ++e) {
    if (edges[e].target == s) out.push_back(e);
  }
  return out;
}

std::vector<EdgeId> ConstraintGraph::out_edges(StateId s) const {
  std::vector<EdgeId> out;
  for (EdgeId e = 0; e < edges.size(); ++e) {
    if (edges[e].source == s) out.push_back(e);
  }
  return out;
}

ConstraintGraph initial_graph(double gap_up, double gap_down, double penalty) {
  if (!(gap_up >= 0.0) || !(gap_down >= 0.0) || !(penalty >= 0.0) || !std::isfinite(gap_up) ||
      !std::isfinite(gap_down) || !std::isfinite(penalty)) {
    throw std::invalid_argument("initial_graph: gaps and penalty must be finite and non-negative");
  }
  ConstraintGraph g;
  g.states = {{0, "B"}, {1, "R"}};
  g.edges = {{0, 1, Direction::up, gap_up, penalty}, {1, 0, Direction::down, gap_down, penalty}};
  g.baseline_state = 0;
  g.rpeak_state = 1;
  return g;
}

namespace {

std::string state_label(const ConstraintGraph& g, StateId s) {
  std::string out = "state " + std::to_string(s);
  if (s < g.states.size()) out += " (" + g.states[s].name + ")";
  return out;
}

std::string edge_label(const ConstraintGraph& g, EdgeId e) {
  const Edge& edge = g.edges[e];
  auto name = [&](StateId s) {
    return s < g.states.size() ? g.states[s].name : std::to_string(s);
  };
  return "edge " + std::to_string(e) + " (" + name(edge.source) + "->" + name(edge.target) + ")";
}

// Every state reaches every other state.
bool strongly_connected(const ConstraintGraph& g) {
  const std::size_t n = g.states.size();
  if (n == 0) return false;
  auto reach_all = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<StateId> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const StateId s = stack.back();
      stack.pop_back();
      for (const Edge& e : g.edges) {
        const StateId from = forward ? e.source : e.target;
        const StateId to = forward ? e.target : e.source;
        if (from == s && to < n && !seen[to]) {
          seen[to] = 1;
          stack.push_back(to);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reach_all(true) && reach_all(false);
}

}  // namespace

std::vector<Violation> validate(const ConstraintGraph& g) {
  std::vector<Violation> v;
  const std::size_t n = g.states.size();
  if (n == 0) {
    v.push_back({"graph", "must have at least one state"});
    return v;
  }
  std::set<std::string> names;
  for (std::size_t k = 0; k < n; ++k) {
    const State& s = g.states[k];
    if (s.id != k) v.push_back({state_label(g, k), "ids must be dense 0..|V|-1 in order"});
    if (s.name.empty()) v.push_back({state_label(g, k), "name must be non-empty"});
    if (!names.insert(s.name).second) {
      v.push_back({state_label(g, k), "duplicate state name '" + s.name + "'"});
    }
  }

  bool endpoints_ok = true;
  for (EdgeId e = 0; e < g.edges.size(); ++e) {
    const Edge& edge = g.edges[e];
    if (edge.source >= n || edge.target >= n) {
      v.push_back({"edge " + std::to_string(e), "source/target must name an existing state"});
      endpoints_ok = false;
      continue;
    }
    if (edge.source == edge.target) {
      v.push_back({edge_label(g, e), "self-loops are not allowed"});
    }
    if (!(edge.penalty >= 0.0) || !std::isfinite(edge.penalty)) {
      v.push_back({edge_label(g, e), "penalty must be finite and non-negative"});
    }
    if (!(edge.gap >= 0.0) || !std::isfinite(edge.gap)) {
      v.push_back({edge_label(g, e), "gap must be finite and non-negative"});
    }
    for (EdgeId f = 0; f < e; ++f) {
      if (g.edges[f] == edge) {
        v.push_back({edge_label(g, e), "duplicates edge " + std::to_string(f)});
        break;
      }
    }
  }

  if (endpoints_ok) {
    const std::size_t before = v.size();
    for (StateId s = 0; s < n; ++s) {
      if (g.out_edges(s).empty()) v.push_back({state_label(g, s), "has no outgoing edge"});
      if (g.in_edges(s).empty()) v.push_back({state_label(g, s), "has no incoming edge"});
    }
    // a source or sink already explains the disconnection
    if (v.size() == before && !strongly_connected(g)) {
      v.push_back({"graph", "must be strongly connected"});
    }
  }

  if (g.baseline_state >= n) v.push_back({"baseline_state", "must name an existing state"});
  if (g.rpeak_state >= n) v.push_back({"rpeak_state", "must name an existing state"});
  if (g.baseline_state == g.rpeak_state && g.rpeak_state < n) {
    v.push_back({"rpeak_state", "must differ from baseline_state"});
  }
  return v;
}

namespace {

std::string join_violations(const std::vector<Violation>& violations) {
  std::ostringstream os;
  os << "constraint graph is invalid:";
  for (const Violation& v : violations) os << "\n  " << v.subject << ": " << v.rule;
  return os.str();
}

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw GraphParseError("graph document: field '" + field + "': " + what);
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<std::string_view> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      fail(where + it.key(), "unknown field");
    }
  }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + key, "missing");
  return *it;
}

std::size_t as_index(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(field, "expected a non-negative integer");
  return j.get<std::size_t>();
}

double as_real(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  return j.get<double>();
}

}  // namespace

GraphValidationError::GraphValidationError(std::vector<Violation> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

ConstraintGraph parse_graph(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw GraphParseError(std::string("graph document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("<root>", "expected an object");
  reject_unknown(doc, "", {"states", "edges", "baseline_state", "rpeak_state"});

  ConstraintGraph g;
  const json& states = require(doc, "states", "");
  if (!states.is_array()) fail("states", "expected an array");
  for (std::size_t k = 0; k < states.size(); ++k) {
    const std::string where = "states[" + std::to_string(k) + "].";
    const json& s = states[k];
    if (!s.is_object()) fail(where.substr(0, where.size() - 1), "expected an object");
    reject_unknown(s, where, {"id", "name"});
    State st;
    st.id = as_index(require(s, "id", where), where + "id");
    const json& name = require(s, "name", where);
    if (!name.is_string()) fail(where + "name", "expected a string");
    st.name = name.get<std::string>();
    g.states.push_back(std::move(st));
  }

  const json& edges = require(doc, "edges", "");
  if (!edges.is_array()) fail("edges", "expected an array");
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const std::string where = "edges[" + std::to_string(k) + "].";
    const json& e = edges[k];
    if (!e.is_object()) fail(where.substr(0, where.size() - 1), "expected an object");
    reject_unknown(e, where, {"source", "target", "direction", "gap", "penalty"});
    Edge edge;
    edge.source = as_index(require(e, "source", where), where + "source");
    edge.target = as_index(require(e, "target", where), where + "target");
    const json& dir = require(e, "direction", where);
    if (!dir.is_string()) fail(where + "direction", "expected \"up\" or \"down\"");
    const std::string d = dir.get<std::string>();
    if (d == "up") {
      edge.direction = Direction::up;
    } else if (d == "down") {
      edge.direction = Direction::down;
    } else {
      fail(where + "direction", "expected \"up\" or \"down\", got \"" + d + "\"");
    }
    edge.gap = as_real(require(e, "gap", where), where + "gap");
    edge.penalty = as_real(require(e, "penalty", where), where + "penalty");
    g.edges.push_back(edge);
  }

  g.baseline_state = as_index(require(doc, "baseline_state", ""), "baseline_state");
  g.rpeak_state = as_index(require(doc, "rpeak_state", ""), "rpeak_state");

  if (auto violations = validate(g); !violations.empty()) {
    throw GraphValidationError(std::move(violations));
  }
  return g;
}

std::string serialize_graph(const ConstraintGraph& g) {
  nlohmann::ordered_json doc;
  doc["states"] = nlohmann::ordered_json::array();
  for (const State& s : g.states) doc["states"].push_back({{"id", s.id}, {"name", s.name}});
  doc["edges"] = nlohmann::ordered_json::array();
  for (const Edge& e : g.edges) {
    doc["edges"].push_back({{"source", e.source},
                            {"target", e.target},
                            {"direction", std::string(to_string(e.direction))},
                            {"gap", e.gap},
                            {"penalty", e.penalty}});
  }
  doc["baseline_state"] = g.baseline_state;
  doc["rpeak_state"] = g.rpeak_state;
  return doc.dump(2) + "\n";
}

ConstraintGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphParseError("cannot open graph file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_graph(ss.str());
}

void save_graph_file(const ConstraintGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph file '" + path + "'");
  out << serialize_graph(g);
}

}  // namespace gccd
