#include "reachsynth/config.hpp"

#include "reachsynth/ship.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace reachsynth {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

/* symbolic tokens for values that have no exact decimal form */
const struct {
  const char* token;
  double value;
} kTokens[] = {
    {"pi", M_PI},           {"-pi", -M_PI},          {"pi/2", M_PI / 2},
    {"-pi/2", -M_PI / 2},   {"pi/3", M_PI / 3},      {"-pi/3", -M_PI / 3},
    {"2pi/3", 2 * M_PI / 3}, {"-2pi/3", -2 * M_PI / 3}, {"inf", kInf},
    {"-inf", -kInf},
};

double parse_number(const json& v, const std::string& ctx) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    for (const auto& t : kTokens)
      if (s == t.token) return t.value;
    throw std::runtime_error("config: unknown numeric token '" + s + "' at " + ctx);
  }
  throw std::runtime_error("config: expected number or token at " + ctx);
}

json emit_number(double v) {
  for (const auto& t : kTokens)
    if (v == t.value) return json(t.token);
  return json(v);
}

Vec parse_vector(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw std::runtime_error("config: expected array at " + ctx);
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = parse_number(v[i], ctx);
  return out;
}

json emit_vector(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(emit_number(v[i]));
  return a;
}

VecI parse_int_vector(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw std::runtime_error("config: expected array at " + ctx);
  VecI out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer()) throw std::runtime_error("config: expected integer at " + ctx);
    out[i] = v[i].get<int>();
  }
  return out;
}

json emit_int_vector(const VecI& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Box parse_box(const json& v, const std::string& ctx) {
  if (!v.is_object()) throw std::runtime_error("config: expected box object at " + ctx);
  for (auto& [key, _] : v.items())
    if (key != "lo" && key != "hi")
      throw std::runtime_error("config: unknown key '" + key + "' in box at " + ctx);
  return Box(parse_vector(v.at("lo"), ctx + ".lo"), parse_vector(v.at("hi"), ctx + ".hi"));
}

json emit_box(const Box& b) {
  return json{{"lo", emit_vector(b.lo())}, {"hi", emit_vector(b.hi())}};
}

void expect_keys(const json& j, const std::set<std::string>& keys, const std::string& ctx) {
  if (!j.is_object()) throw std::runtime_error("config: expected object at " + ctx);
  for (auto& [key, _] : j.items())
    if (!keys.count(key))
      throw std::runtime_error("config: unknown key '" + key + "' at " + ctx);
  for (const auto& k : keys)
    if (!j.contains(k)) throw std::runtime_error("config: missing key '" + k + "' at " + ctx);
}

json emit_matrix(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(emit_number(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

Mat parse_matrix(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.empty()) throw std::runtime_error("config: expected matrix at " + ctx);
  Mat m(v.size(), v[0].size());
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != v[0].size())
      throw std::runtime_error("config: ragged matrix at " + ctx);
    for (size_t j = 0; j < v[i].size(); ++j) m(i, j) = parse_number(v[i][j], ctx);
  }
  return m;
}

}  // namespace

std::string ScenarioConfig::to_json_text() const {
  json j;
  j["schema_version"] = schema_version;
  j["name"] = name;
  j["model"] = model;
  j["sampling_period"] = emit_number(sampling_period);
  json spec;
  spec["mode"] = mode == SpecMonitor::Mode::reach_avoid ? "reach-avoid" : "reach-avoid-stay";
  spec["state_constraints"] = emit_box(state_constraints);
  json av = json::array();
  for (const Box& b : avoid) av.push_back(emit_box(b));
  spec["avoid"] = av;
  spec["reach"] = emit_box(reach);
  j["specification"] = spec;
  j["disturbances"] =
      json{{"concrete", emit_box(disturbance)}, {"abstract", emit_box(abstract_disturbance)}};
  json abs;
  abs["input_domain"] = emit_box(input_domain);
  abs["input_jump"] = emit_box(input_jump);
  abs["state_cells"] = emit_int_vector(state_cells);
  abs["input_values"] = emit_int_vector(input_values);
  abs["reach_steps"] = reach_steps;
  abs["inflation"] = emit_vector(inflation);
  j["abstraction"] = abs;
  json fun;
  fun["q_weight"] = emit_vector(q_weight);
  fun["r_weight"] = emit_vector(r_weight);
  fun["operating_point"] = json{{"xhat", emit_vector(operating_xhat)},
                                {"uhat", emit_vector(operating_uhat)}};
  fun["time_slope"] = emit_number(time_slope);
  fun["epsilon"] = epsilon ? emit_vector(*epsilon) : json(nullptr);
  json dims = json::array();
  for (int d : epsilon_dims) dims.push_back(d);
  fun["epsilon_dims"] = dims;
  j["funnel"] = fun;
  json sim;
  sim["steps_per_period"] = steps_per_period;
  sim["disturbance_switch_period"] = emit_number(disturbance_switch_period);
  sim["extra_periods"] = extra_periods;
  sim["random_abstract_disturbance"] = random_abstract_disturbance;
  j["simulation"] = sim;
  j["seed"] = seed;
  if (model == "ship") {
    ShipParams p = ShipParams::scale_model();
    j["model_parameters"] = json{{"inertia", emit_matrix(p.m)},
                                 {"damping", emit_matrix(p.d)},
                                 {"coriolis_gain", emit_matrix(p.coriolis_gain)}};
  }
  return j.dump(2) + "\n";
}

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& ex) {
    throw std::runtime_error(std::string("config: parse error: ") + ex.what());
  }
  std::set<std::string> top{"schema_version", "name",       "model",
                            "sampling_period", "specification", "disturbances",
                            "abstraction",     "funnel",        "simulation",
                            "seed"};
  if (j.contains("model_parameters")) top.insert("model_parameters");
  expect_keys(j, top, "document");

  ScenarioConfig c;
  c.schema_version = j.at("schema_version").get<int>();
  if (c.schema_version != 1) throw std::runtime_error("config: unsupported schema_version");
  c.name = j.at("name").get<std::string>();
  c.model = j.at("model").get<std::string>();
  c.sampling_period = parse_number(j.at("sampling_period"), "sampling_period");

  const json& spec = j.at("specification");
  expect_keys(spec, {"mode", "state_constraints", "avoid", "reach"}, "specification");
  std::string mode = spec.at("mode").get<std::string>();
  if (mode == "reach-avoid")
    c.mode = SpecMonitor::Mode::reach_avoid;
  else if (mode == "reach-avoid-stay")
    c.mode = SpecMonitor::Mode::reach_avoid_stay;
  else
    throw std::runtime_error("config: unknown mode '" + mode + "'");
  c.state_constraints = parse_box(spec.at("state_constraints"), "state_constraints");
  for (size_t i = 0; i < spec.at("avoid").size(); ++i)
    c.avoid.push_back(parse_box(spec.at("avoid")[i], "avoid[" + std::to_string(i) + "]"));
  c.reach = parse_box(spec.at("reach"), "reach");

  const json& dist = j.at("disturbances");
  expect_keys(dist, {"concrete", "abstract"}, "disturbances");
  c.disturbance = parse_box(dist.at("concrete"), "disturbances.concrete");
  c.abstract_disturbance = parse_box(dist.at("abstract"), "disturbances.abstract");

  const json& abs = j.at("abstraction");
  expect_keys(abs,
              {"input_domain", "input_jump", "state_cells", "input_values", "reach_steps",
               "inflation"},
              "abstraction");
  c.input_domain = parse_box(abs.at("input_domain"), "abstraction.input_domain");
  c.input_jump = parse_box(abs.at("input_jump"), "abstraction.input_jump");
  c.state_cells = parse_int_vector(abs.at("state_cells"), "abstraction.state_cells");
  c.input_values = parse_int_vector(abs.at("input_values"), "abstraction.input_values");
  c.reach_steps = abs.at("reach_steps").get<int>();
  c.inflation = parse_vector(abs.at("inflation"), "abstraction.inflation");

  const json& fun = j.at("funnel");
  expect_keys(fun,
              {"q_weight", "r_weight", "operating_point", "time_slope", "epsilon",
               "epsilon_dims"},
              "funnel");
  c.q_weight = parse_vector(fun.at("q_weight"), "funnel.q_weight");
  c.r_weight = parse_vector(fun.at("r_weight"), "funnel.r_weight");
  expect_keys(fun.at("operating_point"), {"xhat", "uhat"}, "funnel.operating_point");
  c.operating_xhat = parse_vector(fun.at("operating_point").at("xhat"), "operating_point.xhat");
  c.operating_uhat = parse_vector(fun.at("operating_point").at("uhat"), "operating_point.uhat");
  c.time_slope = parse_number(fun.at("time_slope"), "funnel.time_slope");
  if (!fun.at("epsilon").is_null()) c.epsilon = parse_vector(fun.at("epsilon"), "funnel.epsilon");
  for (const auto& d : fun.at("epsilon_dims")) c.epsilon_dims.push_back(d.get<int>());

  const json& sim = j.at("simulation");
  expect_keys(sim,
              {"steps_per_period", "disturbance_switch_period", "extra_periods",
               "random_abstract_disturbance"},
              "simulation");
  c.steps_per_period = sim.at("steps_per_period").get<int>();
  c.disturbance_switch_period =
      parse_number(sim.at("disturbance_switch_period"), "disturbance_switch_period");
  c.extra_periods = sim.at("extra_periods").get<int>();
  c.random_abstract_disturbance = sim.at("random_abstract_disturbance").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();

  if (c.model == "ship" && j.contains("model_parameters")) {
    const json& mp = j.at("model_parameters");
    expect_keys(mp, {"inertia", "damping", "coriolis_gain"}, "model_parameters");
    ShipParams p = ShipParams::scale_model();
    auto same = [](const Mat& a, const Mat& b) {
      return a.rows() == b.rows() && a.cols() == b.cols() &&
             (a.array() == b.array()).all();
    };
    if (!same(parse_matrix(mp.at("inertia"), "inertia"), p.m) ||
        !same(parse_matrix(mp.at("damping"), "damping"), p.d) ||
        !same(parse_matrix(mp.at("coriolis_gain"), "coriolis_gain"), p.coriolis_gain))
      throw std::runtime_error("config: model_parameters differ from the built-in ship model");
  }

  /* structural validation */
  if (c.sampling_period <= 0.0) throw std::runtime_error("config: sampling_period must be > 0");
  if (c.steps_per_period < 1) throw std::runtime_error("config: steps_per_period must be >= 1");
  if (c.reach_steps < 1) throw std::runtime_error("config: reach_steps must be >= 1");
  if (c.epsilon && c.epsilon->size() != static_cast<Eigen::Index>(c.epsilon_dims.size()))
    throw std::runtime_error("config: epsilon and epsilon_dims length mismatch");
  return c;
}

void ScenarioConfig::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << to_json_text();
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

std::uint64_t ScenarioConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : to_json_text()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::optional<Vec> ScenarioConfig::epsilon_full(Eigen::Index n_x) const {
  if (!epsilon) return std::nullopt;
  Vec full = Vec::Zero(n_x);
  for (size_t i = 0; i < epsilon_dims.size(); ++i) {
    int d = epsilon_dims[i];
    if (d < 0 || d >= n_x) throw std::runtime_error("config: epsilon_dims out of range");
    full[d] = (*epsilon)[i];
  }
  return full;
}

ScenarioConfig ship_scenario() {
  ScenarioConfig c;
  c.name = "ship-docking";
  c.model = "ship";
  c.sampling_period = 3.0;
  c.mode = SpecMonitor::Mode::reach_avoid;

  Vec xlo(6), xhi(6);
  xlo << 0.0, 0.0, -M_PI, -kInf, -kInf, -kInf;
  xhi << 10.0, 6.5, M_PI, kInf, kInf, kInf;
  c.state_constraints = Box(xlo, xhi);
  Vec a1lo(6), a1hi(6), a2lo(6), a2hi(6);
  a1lo << 2.0, 0.0, -M_PI, -kInf, -kInf, -kInf;
  a1hi << 2.5, 3.0, M_PI, kInf, kInf, kInf;
  a2lo << 5.0, 3.5, -M_PI, -kInf, -kInf, -kInf;
  a2hi << 5.5, 6.5, M_PI, kInf, kInf, kInf;
  c.avoid = {Box(a1lo, a1hi), Box(a2lo, a2hi)};
  Vec rlo(6), rhi(6);
  rlo << 7.0, 0.0, M_PI / 3, -kInf, -kInf, -kInf;
  rhi << 10.0, 6.5, 2 * M_PI / 3, kInf, kInf, kInf;
  c.reach = Box(rlo, rhi);

  Vec wlo(6), whi(6);
  wlo << -0.01, -0.01, -0.01, -0.01, -0.01, -0.05;
  whi << 0.01, 0.01, 0.01, 0.01, 0.01, 0.05;
  c.disturbance = Box(wlo, whi);
  c.abstract_disturbance = Box(Vec::Constant(3, -0.01), Vec::Constant(3, 0.01));

  Vec ulo(3), uhi(3);
  ulo << 0.0, -0.05, -0.1;
  uhi << 0.18, 0.05, 0.1;
  c.input_domain = Box(ulo, uhi);
  Vec dlo(3), dhi(3);
  dlo << -0.18, -0.1, -0.2;
  dhi << 0.18, 0.1, 0.2;
  c.input_jump = Box(dlo, dhi);

  c.state_cells = VecI::Constant(3, 20);
  c.input_values = VecI::Constant(3, 5);
  c.reach_steps = 50;
  c.inflation = Vec::Zero(3);

  c.q_weight = (Vec(6) << 10.0, 10.0, 10.0, 1.0, 1.0, 1.0).finished();
  c.r_weight = (Vec(3) << 0.05, 0.05, 0.05).finished();
  c.operating_xhat = (Vec(3) << 8.5, 3.25, M_PI / 2).finished();
  c.operating_uhat = (Vec(3) << 0.09, 0.0, 0.0).finished();
  c.time_slope = 1.0;
  c.epsilon = (Vec(3) << 0.427, 0.432, 0.235).finished();
  c.epsilon_dims = {0, 1, 2};

  c.steps_per_period = 100;
  c.disturbance_switch_period = 1.0;
  c.extra_periods = 5;
  c.random_abstract_disturbance = false;
  c.seed = 1;
  return c;
}

}  // namespace reachsynth
