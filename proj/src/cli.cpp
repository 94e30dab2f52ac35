#include "lmdp/cli.hpp"

#include <fmt/format.h>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "lmdp/errors.hpp"

namespace lmdp::cli {

namespace {

const std::map<std::string, std::set<std::string>> kKeys = {
    {"gen",
     {"kind", "eps", "variant", "d", "H", "mu", "grid", "signs", "arms", "S", "A", "seed", "features",
      "dim", "instance", "episodes", "logging", "out"}},
    {"eval",
     {"instance", "dataset", "eps", "delta", "T_grid", "beta", "class", "eta", "gamma", "box", "policies",
      "out", "csv", "fw_iters", "verif_beta"}},
    {"run",
     {"instance", "dataset", "offline_episodes", "logging", "algorithm", "eps", "delta", "seeds",
      "seed_base", "class", "eta", "gamma", "box", "candidate", "beta_scale", "regmin", "global_cap",
      "out", "epochs_out", "timing_out"}},
    {"report", {"inputs", "baseline", "out", "plot"}},
};

template <class T>
T get(const json& cfg, const std::string& key, T fallback) {
  if (!cfg.contains(key) || cfg[key].is_null()) return fallback;
  try {
    return cfg[key].get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key '" + key + "' has the wrong type");
  }
}

template <class T>
T need(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || cfg[key].is_null()) throw ValidationError("missing required key '" + key + "'");
  return get<T>(cfg, key, T{});
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

PolicyClass build_class(const InstanceBundle& b, const json& cfg) {
  const std::string kind = get<std::string>(cfg, "class", "det_pruned");
  if (kind == "det") return enumerate_det_policies(b.mdp);
  if (kind == "det_pruned") {
    EnumerateOptions o;
    o.prune_unreachable = true;
    return enumerate_det_policies(b.mdp, o);
  }
  if (kind == "softmax") {
    const double box = get<double>(cfg, "box", 1.0);
    return cover_softmax_class(b.mdp, get<double>(cfg, "eta", 1.0), -box, box, get<double>(cfg, "gamma", 0.5)).cls;
  }
  throw ValidationError("unknown policy class '" + kind + "' (det, det_pruned, softmax)");
}

Policy named_policy(const InstanceBundle& b, const PolicyClass* cls, const std::string& name) {
  if (name == "optimal") return Policy(b.optimal);
  if (name == "uniform") return Policy::uniform(b.mdp);
  if (name == "logging") {
    if (!b.logging) throw ValidationError("instance has no logging policy");
    return *b.logging;
  }
  auto index_after = [&](std::size_t prefix) {
    try {
      return std::stoll(name.substr(prefix));
    } catch (const std::exception&) {
      throw ValidationError("bad policy name '" + name + "'");
    }
  };
  if (name.rfind("const:", 0) == 0) return constant_policy(b.mdp, static_cast<int>(index_after(6)));
  if (name.rfind("class:", 0) == 0) {
    const long long i = index_after(6);
    if (!cls || i < 0 || i >= static_cast<long long>(cls->size()))
      throw ValidationError("class index out of range in '" + name + "'");
    return cls->members[static_cast<std::size_t>(i)];
  }
  if (name.size() > 5 && name.substr(name.size() - 5) == ".json") {
    Policy p = io::policy_from_json(io::load_json(name));
    p.check(b.mdp);
    return p;
  }
  throw ValidationError("unknown policy '" + name + "' (optimal, uniform, logging, const:k, class:i, file.json)");
}

OfflineDataset make_offline(const InstanceBundle& b, const std::string& logging, std::int64_t episodes, Rng& rng) {
  if (logging == "minimax_schedule") {
    const auto schedule = minimax_offline_schedule(b);
    return generate_offline_scheduled(b.mdp, schedule, episodes, rng);
  }
  return generate_offline(b.mdp, named_policy(b, nullptr, logging == "bundle" ? "logging" : logging), episodes, rng);
}

Eigen::MatrixXi minimax_signs(int d, int H, const std::string& mode, std::uint64_t seed) {
  Eigen::MatrixXi s = Eigen::MatrixXi::Ones(d, H);
  if (mode == "plus") return s;
  if (mode == "seeded") {
    Rng rng(seed);
    for (int i = 0; i < s.size(); ++i) s.data()[i] = rng.below(2) ? 1 : -1;
    return s;
  }
  throw ValidationError("signs must be 'plus' or 'seeded'");
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

const std::set<std::string>& allowed_keys(const std::string& command) {
  const auto it = kKeys.find(command);
  if (it == kKeys.end()) throw ValidationError("unknown command '" + command + "'");
  return it->second;
}

json merge_config(const std::string& command, const json& file, const json& flags) {
  const auto& keys = allowed_keys(command);
  json out = json::object();
  for (const json* src : {&file, &flags}) {
    if (src->is_null()) continue;
    if (!src->is_object()) throw ValidationError("config must be a JSON object");
    for (const auto& [k, v] : src->items()) {
      if (!keys.count(k)) throw ValidationError("unknown config key '" + k + "' for " + command);
      out[k] = v;
    }
  }
  return out;
}

int worker_count() {
  const char* env = std::getenv("LMDP_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) throw ValidationError("LMDP_WORKERS must be an integer in [1, 1024]");
  return static_cast<int>(n);
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return 2;
  if (dynamic_cast<const CapExceeded*>(&e)) return 3;
  if (dynamic_cast<const Unsatisfiable*>(&e)) return 4;
  return 1;
}

// ---------------------------------------------------------------------------

json cmd_gen(const json& cfg) {
  const std::string kind = need<std::string>(cfg, "kind");
  const std::string out = need<std::string>(cfg, "out");
  const auto seed = get<std::uint64_t>(cfg, "seed", 0);
  json summary = {{"command", "gen"}, {"kind", kind}, {"out", out}};

  if (kind == "offline") {
    const InstanceBundle b = io::load_bundle(need<std::string>(cfg, "instance"));
    const auto episodes = need<std::int64_t>(cfg, "episodes");
    Rng rng(seed);
    const OfflineDataset data = make_offline(b, get<std::string>(cfg, "logging", "bundle"), episodes, rng);
    io::save_dataset(out, data);
    summary["records"] = data.size();
    return summary;
  }

  InstanceBundle b;
  if (kind == "separation") {
    b = gen_separation(need<double>(cfg, "eps"), get<int>(cfg, "variant", 1));
  } else if (kind == "minimax") {
    const int d = get<int>(cfg, "d", 2), H = get<int>(cfg, "H", 2);
    b = gen_minimax(d, H, minimax_signs(d, H, get<std::string>(cfg, "signs", "plus"), seed),
                    get<double>(cfg, "mu", 1.0 / (20 * std::sqrt(static_cast<double>(d)))),
                    get<int>(cfg, "grid", 2 * d));
  } else if (kind == "mab") {
    b = gen_mab_verification(need<double>(cfg, "eps"), get<int>(cfg, "arms", 4));
  } else if (kind == "random") {
    const std::string mode = get<std::string>(cfg, "features", "basis");
    if (mode != "basis" && mode != "random_unit") throw ValidationError("features must be basis or random_unit");
    b = gen_random_tabular(get<int>(cfg, "S", 3), get<int>(cfg, "A", 2), get<int>(cfg, "H", 3), seed,
                           mode == "basis" ? FeatureMode::basis : FeatureMode::random_unit,
                           get<int>(cfg, "dim", 4));
  } else {
    throw ValidationError("unknown gen kind '" + kind + "' (separation, minimax, mab, random, offline)");
  }
  io::save_json(out, io::to_json(b));
  summary["v_star"] = b.v_star;
  summary["linearity_residual"] = b.linearity_residual;
  return summary;
}

// ---------------------------------------------------------------------------

json cmd_eval(const json& cfg) {
  const InstanceBundle b = io::load_bundle(need<std::string>(cfg, "instance"));
  const LinearMdp& mdp = b.mdp;
  const OfflineDataset data =
      cfg.contains("dataset") ? io::load_dataset(need<std::string>(cfg, "dataset")) : OfflineDataset{};
  const double eps = need<double>(cfg, "eps");
  const double delta = get<double>(cfg, "delta", 0.1);
  const double beta = get<double>(cfg, "beta", 10.0);
  const auto grid = get<std::vector<double>>(cfg, "T_grid", {0, 1, 10, 100, 1000, 10000});
  CoverageOptions copts;
  copts.fw_iters = get<int>(cfg, "fw_iters", copts.fw_iters);

  const PolicyClass cls = build_class(b, cfg);
  const auto profiles = exact_profiles(mdp, cls.members, false);
  const StepCovariates raw = offline_covariates(data, mdp, 0.0);
  const StepCovariates reg = offline_covariates(data, mdp, 1.0 / mdp.dim());

  json report;
  report["instance"] = b.name;
  report["records"] = data.size();
  report["class_size"] = cls.size();
  json conc = json::object();
  for (const auto& name : get<std::vector<std::string>>(cfg, "policies", {"optimal"})) {
    const VisitationProfile p = exact_profile(mdp, named_policy(b, &cls, name), false);
    conc[name] = finite_or_null(concentrability(p.feature, raw));
  }
  report["concentrability"] = conc;
  report["C_star"] = finite_or_null(concentrability(exact_profile(mdp, Policy(b.optimal), false).feature, raw));

  std::ostringstream csv;
  csv << "h,T,c_o2o\n";
  json co = json::array(), to = json::array();
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (double T : grid) {
      const double v = c_o2o(mdp, reg, profiles, eps, T, h, copts).value;
      co.push_back({{"h", h + 1}, {"T", T}, {"value", v}});
      csv << h + 1 << ',' << io::num(T) << ',' << io::num(v) << '\n';
    }
    try {
      to.push_back({{"h", h + 1}, {"T", t_o2o(mdp, reg, profiles, eps, beta, h, copts)}});
    } catch (const Unsatisfiable& e) {
      to.push_back({{"h", h + 1}, {"T", nullptr}, {"reason", e.what()}});
    }
  }
  report["c_o2o"] = co;
  report["beta"] = beta;
  report["t_o2o"] = to;
  report["verifiability"] =
      io::to_json(check_verifiability_condition(mdp, data, profiles, eps, delta, get<double>(cfg, "verif_beta", 0.0)));

  if (cfg.contains("out")) io::save_json(need<std::string>(cfg, "out"), report);
  if (cfg.contains("csv")) open_out(need<std::string>(cfg, "csv")) << csv.str();
  return report;
}

// ---------------------------------------------------------------------------

namespace {

struct SeedOutcome {
  std::string row;
  std::vector<EpochDiagnostic> diagnostics;
  double wall = 0.0;
  bool capped = false;
};

const char* kRecordHeader =
    "seed,instance,algorithm,epsilon,online_episodes,gap,success,verdict,epochs,returned_policy";

}  // namespace

json cmd_run(const json& cfg) {
  const InstanceBundle b = io::load_bundle(need<std::string>(cfg, "instance"));
  const LinearMdp& mdp = b.mdp;
  const std::string algo = get<std::string>(cfg, "algorithm", "ftpedel");
  if (algo != "ftpedel" && algo != "pure_online" && algo != "offline_verify" && algo != "verify_policy")
    throw ValidationError("unknown algorithm '" + algo + "'");
  const double eps = need<double>(cfg, "eps");
  const double delta = get<double>(cfg, "delta", 0.1);
  const int seeds = get<int>(cfg, "seeds", 1);
  const auto seed_base = get<std::uint64_t>(cfg, "seed_base", 0);
  if (seeds < 1) throw ValidationError("seeds must be positive");
  const std::string out = need<std::string>(cfg, "out");

  FtpedelOptions opts;
  opts.beta_scale = get<double>(cfg, "beta_scale", 1.0);
  opts.regmin = get<std::string>(cfg, "regmin", "ucb");
  opts.global_cap = get<std::int64_t>(cfg, "global_cap", opts.global_cap);
  make_regret_minimizer(opts.regmin);  // validate early

  const PolicyClass cls = build_class(b, cfg);
  const auto profiles = exact_profiles(mdp, cls.members, false);
  const std::optional<OfflineDataset> shared =
      cfg.contains("dataset") ? std::optional(io::load_dataset(need<std::string>(cfg, "dataset"))) : std::nullopt;
  const auto offline_episodes = get<std::int64_t>(cfg, "offline_episodes", 0);
  const std::string logging = get<std::string>(cfg, "logging", "bundle");
  const Policy candidate = named_policy(b, &cls, get<std::string>(cfg, "candidate", "optimal"));
  const double cand_gap = b.v_star - exact_profile(mdp, candidate, false).value;

  std::vector<SeedOutcome> results(seeds);
  std::vector<std::exception_ptr> errors(seeds);
  const auto wall0 = std::chrono::steady_clock::now();

#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
  for (int k = 0; k < seeds; ++k) {
    try {
      const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(k);
      const auto t0 = std::chrono::steady_clock::now();
      const Rng root(seed);
      OfflineDataset offline;
      if (algo != "pure_online") {
        if (shared) {
          offline = *shared;
        } else if (offline_episodes > 0) {
          Rng r = root.split(1);
          offline = make_offline(b, logging, offline_episodes, r);
        }
      }
      Rng rng = root.split(0);
      Environment env(mdp);
      SeedOutcome& o = results[k];
      std::int64_t online = 0;
      double gap = std::nan("");
      bool success = false;
      std::string verdict, returned;
      int epochs = 0;
      try {
        if (algo == "ftpedel" || algo == "pure_online") {
          const FtpedelResult r = ftpedel(env, eps, delta, cls, offline, rng, opts);
          online = r.online_episodes;
          gap = b.v_star - profiles[r.policy].value;
          success = gap <= eps;
          verdict = "returned";
          returned = std::to_string(r.policy);
          epochs = r.epochs;
          o.diagnostics = r.diagnostics;
        } else if (algo == "offline_verify") {
          const OfflineVerifyResult r = offline_verify(offline, mdp, cls, eps, delta, opts.beta_scale);
          epochs = static_cast<int>(r.epochs.size());
          if (r.policy) {
            gap = b.v_star - profiles[*r.policy].value;
            success = gap <= eps;
            verdict = "returned";
            returned = std::to_string(*r.policy);
          } else {
            verdict = "unverifiable";
          }
        } else {
          const VerificationVerdict v = verify_policy(env, offline, candidate, cls, eps, delta, rng, opts);
          online = v.online_episodes;
          gap = cand_gap;
          verdict = to_string(v.outcome);
          epochs = v.epochs;
          success = (v.outcome == VerifyOutcome::certified && gap <= eps) ||
                    (v.outcome == VerifyOutcome::refuted && gap > 0);
          if (v.witness) returned = std::to_string(*v.witness);
        }
      } catch (const CapExceeded&) {
        o.capped = true;
        online = env.episodes();
        verdict = "cap_exceeded";
      }
      o.row = fmt::format("{},{},{},{},{},{},{},{},{},{}", seed, b.name, algo, io::num(eps), online,
                          std::isnan(gap) ? std::string() : io::num(gap), success ? 1 : 0, verdict, epochs,
                          returned);
      o.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::ofstream rec = open_out(out);
  rec << kRecordHeader << '\n';
  for (const auto& r : results) rec << r.row << '\n';
  if (cfg.contains("epochs_out")) {
    std::ofstream ep = open_out(need<std::string>(cfg, "epochs_out"));
    for (int k = 0; k < seeds; ++k)
      io::write_epoch_csv(ep, results[k].diagnostics, k == 0, "seed,",
                          std::to_string(seed_base + static_cast<std::uint64_t>(k)) + ",");
  }
  json timing = {{"total_seconds",
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count()},
                 {"workers", worker_count()}};
  json per = json::array();
  for (int k = 0; k < seeds; ++k) per.push_back({{"seed", seed_base + k}, {"seconds", results[k].wall}});
  timing["seeds"] = per;
  io::save_json(get<std::string>(cfg, "timing_out", out + ".timing.json"), timing);

  const auto capped = std::count_if(results.begin(), results.end(), [](const SeedOutcome& o) { return o.capped; });
  if (capped > 0)
    throw CapExceeded(std::to_string(capped) + " of " + std::to_string(seeds) +
                      " seeds hit the online episode cap; records were written to " + out);
  return {{"command", "run"}, {"algorithm", algo}, {"seeds", seeds}, {"out", out}};
}

// ---------------------------------------------------------------------------

namespace {

struct Record {
  std::uint64_t seed = 0;
  std::string instance, algorithm, eps_text;
  double eps = 0.0;
  double online = 0.0;
  double gap = 0.0;
  bool success = false;
};

std::vector<Record> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kRecordHeader)
    throw ValidationError(path + ": header does not match the records schema");
  std::vector<Record> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 10) throw ValidationError(path + ":" + std::to_string(lineno) + ": expected 10 fields");
    try {
      Record r;
      r.seed = std::stoull(f[0]);
      r.instance = f[1];
      r.algorithm = f[2];
      r.eps_text = f[3];
      r.eps = std::stod(f[3]);
      r.online = std::stod(f[4]);
      r.gap = f[5].empty() ? std::nan("") : std::stod(f[5]);
      r.success = f[6] == "1";
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": unparsable field");
    }
  }
  return out;
}

struct Group {
  std::vector<const Record*> rows;
};

using GroupKey = std::tuple<std::string, std::string, double>;

std::map<GroupKey, Group> group(const std::vector<Record>& rs) {
  std::map<GroupKey, Group> g;
  for (const Record& r : rs) g[{r.instance, r.algorithm, r.eps}].rows.push_back(&r);
  return g;
}

}  // namespace

json cmd_report(const json& cfg) {
  const auto inputs = get<std::vector<std::string>>(cfg, "inputs", {});
  if (inputs.empty()) throw ValidationError("report needs at least one records file");
  std::vector<Record> main, base;
  for (const auto& p : inputs)
    for (auto& r : read_records(p)) main.push_back(std::move(r));
  if (main.empty()) throw ValidationError("records files contain no rows");
  for (const auto& p : get<std::vector<std::string>>(cfg, "baseline", {}))
    for (auto& r : read_records(p)) base.push_back(std::move(r));

  const auto groups = group(main);
  std::ostringstream csv;
  csv << "instance,algorithm,epsilon,runs,success_rate,median_online_episodes,median_gap,paired_median_ratio\n";
  json series = json::object();
  for (const auto& [key, g] : groups) {
    const auto& [inst, algo, eps] = key;
    std::vector<double> online, gaps;
    double ok = 0;
    for (const Record* r : g.rows) {
      online.push_back(r->online);
      if (!std::isnan(r->gap)) gaps.push_back(r->gap);
      ok += r->success;
    }
    std::string ratio;
    double ratio_value = std::nan("");
    if (!base.empty()) {
      std::map<std::uint64_t, double> b;
      std::set<std::string> algos;
      for (const Record& r : base)
        if (r.instance == inst && r.eps == eps) {
          b[r.seed] = r.online;
          algos.insert(r.algorithm);
        }
      if (algos.size() > 1) throw ValidationError("baseline mixes algorithms for " + inst);
      std::vector<double> x, y;
      for (const Record* r : g.rows)
        if (const auto it = b.find(r->seed); it != b.end()) {
          x.push_back(r->online);
          y.push_back(it->second);
        }
      if (!x.empty() && median(y) > 0) {
        ratio_value = median(x) / median(y);
        ratio = io::num(ratio_value);
      }
    }
    const double rate = ok / static_cast<double>(g.rows.size());
    csv << inst << ',' << algo << ',' << g.rows.front()->eps_text << ',' << g.rows.size() << ','
        << io::num(rate) << ',' << io::num(median(online)) << ','
        << (gaps.empty() ? std::string() : io::num(median(gaps))) << ',' << ratio << '\n';
    json& s = series[inst + "/" + algo];
    s["instance"] = inst;
    s["algorithm"] = algo;
    s["epsilon"].push_back(eps);
    s["median_online_episodes"].push_back(median(online));
    s["success_rate"].push_back(rate);
    s["paired_median_ratio"].push_back(finite_or_null(ratio_value));
  }

  json fits = json::array();
  for (const auto& [name, s] : series.items()) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < s["epsilon"].size(); ++i) {
      const double m = s["median_online_episodes"][i];
      if (m > 0) {
        x.push_back(std::log(s["epsilon"][i].get<double>()));
        y.push_back(std::log(m));
      }
    }
    if (x.size() < 2) continue;
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxx += (x[i] - mx) * (x[i] - mx);
      sxy += (x[i] - mx) * (y[i] - my);
      syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) continue;
    const double slope = sxy / sxx;
    const double r2 = syy == 0 ? 1.0 : sxy * sxy / (sxx * syy);
    fits.push_back({{"series", name}, {"slope", slope}, {"r2", r2}, {"points", x.size()}});
  }

  if (cfg.contains("out")) open_out(need<std::string>(cfg, "out")) << csv.str();
  json plot = {{"series", json::array()}, {"fits", fits}};
  for (const auto& [name, s] : series.items()) plot["series"].push_back(s);
  if (cfg.contains("plot")) io::save_json(need<std::string>(cfg, "plot"), plot);
  return {{"command", "report"}, {"groups", groups.size()}, {"fits", fits}};
}

json dispatch(const std::string& command, const json& cfg) {
  if (command == "gen") return cmd_gen(cfg);
  if (command == "eval") return cmd_eval(cfg);
  if (command == "run") return cmd_run(cfg);
  if (command == "report") return cmd_report(cfg);
  throw ValidationError("unknown command '" + command + "'");
}

}  // namespace lmdp::cli
