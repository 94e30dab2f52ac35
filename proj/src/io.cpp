#include "lmdp/io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "lmdp/errors.hpp"

namespace lmdp::io {

std::string num(double x) { return fmt::format("{}", x); }

json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

json to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Mat mat_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("expected a matrix as an array of rows");
  if (j.empty()) return Mat(0, 0);
  const std::size_t cols = j.front().size();
  Mat m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ValidationError("ragged matrix in JSON");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

Vec vec_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("expected a vector as an array");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json to_json(const LinearMdp& mdp) {
  json j;
  j["S"] = mdp.num_states();
  j["A"] = mdp.num_actions();
  j["H"] = mdp.horizon();
  j["d"] = mdp.dim();
  j["features"] = to_json(Mat(mdp.features().transpose()));
  json p = json::array();
  for (const Mat& m : mdp.transitions()) p.push_back(to_json(m));
  j["transitions"] = p;
  json t = json::array();
  for (const Vec& v : mdp.thetas()) t.push_back(to_json(v));
  j["theta"] = t;
  const bool gauss = mdp.noise().kind == NoiseModel::Kind::truncated_gaussian;
  j["noise"] = {{"kind", gauss ? "gauss" : "bernoulli"}, {"sigma", mdp.noise().sigma}};
  j["s1"] = mdp.initial_state();
  return j;
}

LinearMdp mdp_from_json(const json& j) {
  try {
    const int S = j.at("S"), A = j.at("A"), H = j.at("H"), d = j.at("d");
    const Mat rows = mat_from_json(j.at("features"));
    if (rows.rows() != S * A || rows.cols() != d)
      throw DimensionError("features must list S*A rows of d entries");
    std::vector<Mat> P;
    for (const auto& m : j.at("transitions")) P.push_back(mat_from_json(m));
    std::vector<Vec> theta;
    for (const auto& v : j.at("theta")) theta.push_back(vec_from_json(v));
    NoiseModel noise;
    if (j.contains("noise")) {
      const std::string kind = j["noise"].at("kind");
      if (kind == "gauss")
        noise.kind = NoiseModel::Kind::truncated_gaussian;
      else if (kind != "bernoulli")
        throw ValidationError("unknown noise kind '" + kind + "'");
      noise.sigma = j["noise"].value("sigma", 0.0);
    }
    return LinearMdp(S, A, H, rows.transpose(), std::move(P), std::move(theta), noise, j.value("s1", 0));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed MDP JSON: ") + e.what());
  }
}

json to_json(const Policy& p) {
  json j;
  j["kind"] = p.kind();
  std::visit(
      [&](const auto& rep) {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, DeterministicPolicy>) {
          j["actions"] = rep.actions;
        } else if constexpr (std::is_same_v<T, StochasticPolicy>) {
          json probs = json::array();
          for (const Mat& m : rep.probs) probs.push_back(to_json(m));
          j["probs"] = probs;
        } else if constexpr (std::is_same_v<T, SoftmaxPolicy>) {
          j["temperature"] = rep.temperature;
          json w = json::array();
          for (const Vec& v : rep.weights) w.push_back(to_json(v));
          j["weights"] = w;
        } else {
          j["weights"] = rep.weights;
          json members = json::array();
          for (const Policy& m : rep.members) members.push_back(to_json(m));
          j["members"] = members;
        }
      },
      p.rep());
  return j;
}

Policy policy_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind");
    if (kind == "deterministic") return Policy(DeterministicPolicy{j.at("actions").get<std::vector<std::vector<int>>>()});
    if (kind == "stochastic") {
      StochasticPolicy p;
      for (const auto& m : j.at("probs")) p.probs.push_back(mat_from_json(m));
      return Policy(std::move(p));
    }
    if (kind == "softmax") {
      SoftmaxPolicy p;
      p.temperature = j.at("temperature");
      for (const auto& v : j.at("weights")) p.weights.push_back(vec_from_json(v));
      return Policy(std::move(p));
    }
    if (kind == "mixture") {
      MixturePolicy p;
      p.weights = j.at("weights").get<std::vector<double>>();
      for (const auto& m : j.at("members")) p.members.push_back(policy_from_json(m));
      return Policy(std::move(p));
    }
    throw ValidationError("unknown policy kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed policy JSON: ") + e.what());
  }
}

json to_json(const InstanceBundle& b) {
  json j = to_json(b.mdp);
  json meta;
  meta["name"] = b.name;
  json params = json::object();
  for (const auto& [k, v] : b.params) params[k] = v;
  meta["params"] = params;
  meta["v_star"] = b.v_star;
  meta["optimal"] = to_json(Policy(b.optimal));
  meta["linearity_residual"] = b.linearity_residual;
  meta["approximate"] = b.approximate;
  meta["logging"] = b.logging ? to_json(*b.logging) : json(nullptr);
  j["metadata"] = meta;
  return j;
}

InstanceBundle bundle_from_json(const json& j) {
  InstanceBundle b;
  b.mdp = mdp_from_json(j);
  b.name = "file";
  if (j.contains("metadata")) {
    const json& m = j["metadata"];
    b.name = m.value("name", std::string("file"));
    if (m.contains("params"))
      for (const auto& [k, v] : m["params"].items()) b.params[k] = v.get<double>();
    if (m.contains("logging") && !m["logging"].is_null()) b.logging = policy_from_json(m["logging"]);
  }
  // Ground truth is always recomputed rather than trusted from the file.
  finalize_bundle(b);
  b.approximate = !validate(b.mdp).exactly_linear(1e-9);
  return b;
}

json to_json(const VisitationProfile& p) {
  json j;
  json f = json::array(), w = json::array();
  for (const Vec& v : p.feature) f.push_back(to_json(v));
  for (const Vec& v : p.state_action) w.push_back(to_json(v));
  j["value"] = p.value;
  j["feature"] = f;
  j["state_action"] = w;
  return j;
}

json to_json(const CoverageReport& r) {
  json j;
  j["passed"] = r.passed;
  j["first_failure"] = r.first_failure ? json(*r.first_failure) : json(nullptr);
  json checks = json::array();
  for (const StepCheck& c : r.checks)
    checks.push_back({{"epoch", c.epoch},
                      {"h", c.h},
                      {"clause_a", c.clause_a},
                      {"max_coverage", c.max_coverage},
                      {"threshold_a", c.threshold_a},
                      {"worst_policy", c.worst_policy},
                      {"clause_b", c.clause_b},
                      {"lambda_min", c.lambda_min},
                      {"threshold_b", c.threshold_b},
                      {"weak_direction", to_json(c.weak_direction)}});
  j["checks"] = checks;
  return j;
}

json to_json(const VerificationVerdict& v) {
  return {{"outcome", to_string(v.outcome)},
          {"witness", v.witness ? json(*v.witness) : json(nullptr)},
          {"candidate", v.candidate},
          {"online_episodes", v.online_episodes},
          {"eps_ver", v.eps_ver},
          {"calls", v.calls},
          {"epochs", v.epochs}};
}

json to_json(const VerifiabilityCheck& c) {
  json steps = json::array();
  for (const StepMargin& m : c.steps)
    steps.push_back({{"h", m.h},
                     {"max_ratio", m.max_ratio},
                     {"worst_policy", m.worst_policy},
                     {"ratio_ok", m.ratio_ok},
                     {"lambda_min", m.lambda_min},
                     {"eig_ok", m.eig_ok}});
  return {{"beta", c.beta}, {"ratio_ok", c.ratio_ok}, {"eig_ok", c.eig_ok}, {"steps", steps}};
}

void write_dataset(std::ostream& os, const OfflineDataset& data) {
  for (const Transition& t : data.records)
    os << "{\"h\":" << t.h + 1 << ",\"s\":" << t.s << ",\"a\":" << t.a << ",\"r\":" << num(t.r)
       << ",\"sp\":" << t.sp << "}\n";
}

OfflineDataset read_dataset(std::istream& is) {
  OfflineDataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Transition t;
      t.h = j.at("h").get<int>() - 1;
      t.s = j.at("s");
      t.a = j.at("a");
      t.r = j.at("r");
      t.sp = j.at("sp");
      data.records.push_back(t);
    } catch (const json::exception& e) {
      throw ValidationError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  data.source_note = std::to_string(data.records.size()) + " records read from file";
  return data;
}

void write_epoch_csv(std::ostream& os, const std::vector<EpochDiagnostic>& rows, bool header,
                     const std::string& prefix_header, const std::string& prefix) {
  if (header)
    os << prefix_header << "call,epoch,h,active,episodes,f_value,coverage_ratio,eliminated,terminated\n";
  for (const EpochDiagnostic& r : rows)
    os << prefix << r.call << ',' << r.epoch << ',' << r.h << ',' << r.active << ',' << r.episodes << ','
       << num(r.f_value) << ',' << num(r.coverage_ratio) << ',' << r.eliminated << ','
       << (r.terminated ? 1 : 0) << '\n';
}

void write_design_trace_csv(std::ostream& os, const std::vector<DesignTraceRow>& rows) {
  os << "round,t,f_value,episodes\n";
  for (const DesignTraceRow& r : rows)
    os << r.round << ',' << r.t << ',' << num(r.f_value) << ',' << r.episodes << '\n';
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(1) << '\n';
}

OfflineDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_dataset(in);
}

void save_dataset(const std::string& path, const OfflineDataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_dataset(out, data);
}

InstanceBundle load_bundle(const std::string& path) { return bundle_from_json(load_json(path)); }

}  // namespace lmdp::io
