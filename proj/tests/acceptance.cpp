// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <fmt/format.h>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lmdp/design.hpp"
#include "lmdp/ftpedel.hpp"
#include "lmdp/instances.hpp"
#include "lmdp/offline.hpp"
#include "lmdp/verify.hpp"
#include "lmdp/visitation.hpp"
#include "oracles.hpp"

using namespace lmdp;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int threads(int cap) { return std::max(1, std::min(cap, omp_get_max_threads())); }

// Diagnostics from every FTPedel / verification run, checked under C4.
std::vector<EpochDiagnostic> g_diagnostics;

void keep_diagnostics(const std::vector<EpochDiagnostic>& d) {
#pragma omp critical(diag)
  g_diagnostics.insert(g_diagnostics.end(), d.begin(), d.end());
}

// ---------------------------------------------------------------------------

Verdict c1_visitation() {
  Verdict v;
  int failures = 0, value_failures = 0, comparisons = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 50; ++i) {
    Rng pick(5000 + i);
    const int S = 1 + static_cast<int>(pick.below(6)), A = 1 + static_cast<int>(pick.below(6)),
              H = 1 + static_cast<int>(pick.below(6));
    const bool basis = S * A <= 12;
    const int dim = 2 + static_cast<int>(pick.below(11));
    const InstanceBundle b =
        gen_random_tabular(S, A, H, 7000 + i, basis ? FeatureMode::basis : FeatureMode::random_unit, dim);
    const Policy pi = oracle::random_stochastic(b.mdp, pick);
    const VisitationProfile exact = exact_profile(b.mdp, pi);
    const MonteCarloProfile mc = monte_carlo_profile(b.mdp, pi, 100000, 9000 + i);
    for (int h = 0; h < H; ++h)
      for (int j = 0; j < b.mdp.dim(); ++j) {
        ++comparisons;
        if (std::abs(mc.feature_mean[h](j) - exact.feature[h](j)) > 4 * mc.feature_se[h](j) + 1e-9) ++failures;
      }
    double sum = 0;
    for (int h = 0; h < H; ++h) sum += exact.feature[h].dot(b.mdp.theta(h));
    if (std::abs(sum - exact.value) > 1e-10 || std::abs(dp_value(b.mdp, pi) - exact.value) > 1e-10)
      ++value_failures;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.pass = failures == 0 && value_failures == 0 && secs < 120;
  v.detail = fmt::format("{} of {} components outside 4 SE, {} value mismatches, {:.1f}s", failures, comparisons,
                         value_failures, secs);
  return v;
}

// ---------------------------------------------------------------------------

Mat random_psd(int d, Rng& rng, double floor) {
  Mat R(d, d);
  for (int i = 0; i < d * d; ++i) R.data()[i] = rng.normal();
  return R * R.transpose() / d + floor * Mat::Identity(d, d);
}

Verdict c2_objective() {
  Verdict v;
  Rng rng(2024);
  const int d = 4, m = 8;
  double worst_grad = 0;
  int sandwich_fail = 0, points = 0;
  auto sandwich = [&](const DesignObjective& obj, const Mat& L) {
    const ObjectiveValue o = objective_eval(obj, L, false);
    ++points;
    if (!(o.max_quadratic <= o.value + 1e-12 && o.value <= o.max_quadratic + std::log(double(m)) / obj.eta + 1e-12))
      ++sandwich_fail;
    return o.value;
  };
  for (int trial = 0; trial < 20; ++trial) {
    Mat X(d, m);
    for (int i = 0; i < d * m; ++i) X.data()[i] = rng.normal();
    for (int j = 0; j < m; ++j) X.col(j) *= rng.uniform() / X.col(j).norm();
    const DesignObjective obj{X, 0.5 + 3 * rng.uniform(), 16.0, random_psd(d, rng, 0.1), random_psd(d, rng, 0.0)};
    const Mat L = random_psd(d, rng, 0.2);
    const Mat G = objective_eval(obj, L).gradient;
    sandwich(obj, L);
    const double step = 1e-5;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        Mat E = Mat::Zero(d, d);
        E(i, j) = E(j, i) = 1;
        const double fd = (sandwich(obj, L + step * E) - sandwich(obj, L - step * E)) / (2 * step);
        worst_grad = std::max(worst_grad, std::abs(fd - (i == j ? G(i, i) : 2 * G(i, j))));
      }
  }
  v.pass = worst_grad <= 1e-5 && sandwich_fail == 0;
  v.detail = fmt::format("max |grad - FD| = {:.2e}, sandwich violations {}/{}", worst_grad, sandwich_fail, points);
  return v;
}

// ---------------------------------------------------------------------------

Verdict c3_frank_wolfe() {
  Verdict v;
  const LinearMdp bandit(1, 2, 1, Mat::Identity(2, 2), {}, {Vec::Constant(2, 0.5)});
  const int T = 256, K = 64;
  const double eta = std::pow(2.0, 2.0 * 8 / 5.0);  // round i = 8 has T_i = 256
  const DesignObjective obj{Mat::Identity(2, 2), eta, double(T) * K, Mat::Zero(2, 2), Mat::Zero(2, 2)};
  const double f_inf = 2 + std::log(2.0) / eta;  // attained at Λ = I/2
  std::vector<double> rel;
  const auto t0 = std::chrono::steady_clock::now();
  for (int seed = 0; seed < 10; ++seed) {
    Environment env(bandit);
    Rng rng(300 + seed);
    OraclePlanner oracle;
    const FwRegretResult r = fw_regret(env, 0, obj, T, K, oracle, rng);
    rel.push_back((r.f_values.back() - f_inf) / f_inf);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double med = median(rel);
  const double lowest = *std::min_element(rel.begin(), rel.end());
  v.pass = med <= 0.1 && lowest >= -1e-9 && secs < 60;
  v.detail = fmt::format("median (f - f_inf)/f_inf = {:.3e} (f_inf = {:.4f}, min {:.3e}), {:.1f}s", med, f_inf,
                         lowest, secs);
  return v;
}

// ---------------------------------------------------------------------------

Verdict c4_optcov(std::vector<EpochDiagnostic> diagnostics) {
  Verdict v;
  int runs = 0, terminated = 0, violations = 0;
  auto check = [&](const LinearMdp& mdp, int h, const Mat& targets, double eps_exp, double floor,
                   const Mat& off, const std::string& regmin, bool bootstrap, std::uint64_t seed) {
    Environment env(mdp);
    Rng rng(seed);
    auto rm = make_regret_minimizer(regmin);
    const Mat basis = reachable_feature_basis(mdp, h);
    OptCovOptions o;
    o.lambda_reg = 1.0 / mdp.dim();
    o.bootstrap = bootstrap;
    o.basis = &basis;
    const OptCovResult r = opt_cov(env, h, targets, eps_exp, 0.1, floor, off, *rm, rng, o);
    ++runs;
    if (!r.terminated) return;
    ++terminated;
    const Mat total = r.sigma + r.lambda0 + off;
    const Eigen::LDLT<Mat> f(total);
    double worst = 0;
    for (Eigen::Index j = 0; j < targets.cols(); ++j)
      worst = std::max(worst, targets.col(j).dot(f.solve(Vec(targets.col(j)))));
    const Mat restricted = basis.transpose() * total * basis;
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(restricted).eigenvalues()(0);
    if (worst > eps_exp * (1 + 1e-9) || lmin < floor * (1 - 1e-12)) ++violations;
  };

  const InstanceBundle sep = gen_separation(0.04, 1);
  Rng gen(11);
  const Mat off = offline_covariates(generate_offline(sep.mdp, *sep.logging, 10000, gen), sep.mdp, 0.0).lambda[1];
  Mat weak = Mat::Zero(9, 2);
  weak(6, 0) = weak(7, 1) = 1;
  std::uint64_t seed = 1;
  for (const char* rm : {"oracle", "ucb"})
    for (double eps_exp : {0.05, 0.01, 0.002})
      for (double floor : {0.0, 3.0}) {
        check(sep.mdp, 1, weak, eps_exp, floor, off, rm, false, seed++);
        check(sep.mdp, 1, weak, eps_exp, floor, Mat::Zero(9, 9), rm, false, seed++);
      }
  check(sep.mdp, 1, weak, 0.01, 3.0, off, "oracle", true, seed++);

  // Targets are visitations of random policies, so they lie in the reachable span.
  const InstanceBundle rnd = gen_random_tabular(3, 2, 3, 5, FeatureMode::basis);
  Rng tg(3);
  std::vector<VisitationProfile> rp;
  for (int j = 0; j < 5; ++j) rp.push_back(exact_profile(rnd.mdp, oracle::random_stochastic(rnd.mdp, tg), false));
  for (int h = 0; h < 3; ++h) {
    Mat X(6, 5);
    for (int j = 0; j < 5; ++j) X.col(j) = rp[j].feature[h];
    for (double eps_exp : {0.05, 0.01}) check(rnd.mdp, h, X, eps_exp, 1.0, Mat::Zero(6, 6), "ucb", false, seed++);
  }

  const InstanceBundle mab = gen_mab_verification(0.1, 4);
  for (double eps_exp : {0.1, 0.01, 0.001}) check(mab.mdp, 0, Mat::Identity(4, 4), eps_exp, 2.0, Mat::Zero(4, 4), "ucb", false, seed++);

  int diag_term = 0, diag_viol = 0;
  for (const EpochDiagnostic& d : diagnostics)
    if (d.terminated) {
      ++diag_term;
      if (d.coverage_ratio > 1 + 1e-9) ++diag_viol;
    }
  v.pass = violations == 0 && diag_viol == 0 && terminated > 0 && diag_term > 0;
  v.detail = fmt::format("direct runs: {} violations in {} terminating of {}; in-algorithm: {} violations in {} terminating steps",
                         violations, terminated, runs, diag_viol, diag_term);
  return v;
}

// ---------------------------------------------------------------------------

struct SepRun {
  std::int64_t online = 0;
  double gap = 0.0;
};

// Offline logging data of 2500/eps^2 episodes; seed split 1 for the data, 0 for the learner.
SepRun separation_run(const InstanceBundle& b, const PolicyClass& cls, const std::vector<VisitationProfile>& prof,
                      double eps, std::uint64_t seed, bool with_offline) {
  const Rng root(seed);
  OfflineDataset offline;
  if (with_offline) {
    Rng r = root.split(1);
    offline = generate_offline(b.mdp, *b.logging, static_cast<std::int64_t>(std::llround(2500 / (eps * eps))), r);
  }
  Rng rng = root.split(0);
  Environment env(b.mdp);
  FtpedelOptions opts;
  opts.beta_scale = 0.01;
  const FtpedelResult r = ftpedel(env, eps, 0.1, cls, offline, rng, opts);
  keep_diagnostics(r.diagnostics);
  return {r.online_episodes, b.v_star - prof[r.policy].value};
}

Verdict c5_separation() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const double inst_eps = 0.05, delta = 0.1;
  struct Setup {
    InstanceBundle b;
    PolicyClass cls;
    std::vector<VisitationProfile> prof;
  };
  std::vector<Setup> setups;
  for (int variant : {1, 2}) {
    Setup s;
    s.b = gen_separation(inst_eps, variant);
    s.cls = enumerate_det_policies(s.b.mdp, {.prune_unreachable = true});
    s.prof = exact_profiles(s.b.mdp, s.cls.members, false);
    setups.push_back(std::move(s));
  }
  auto seed_of = [](int variant, int k) { return static_cast<std::uint64_t>(1000 * variant + k); };

  // (a) offline verification on the logging data.
  int empty = 0;
  for (int vi = 0; vi < 2; ++vi)
    for (int k = 0; k < 20; ++k) {
      Rng r = Rng(seed_of(vi + 1, k)).split(1);
      const OfflineDataset data = generate_offline(setups[vi].b.mdp, *setups[vi].b.logging,
                                                   std::llround(2500 / (inst_eps * inst_eps)), r);
      empty += !offline_verify(data, setups[vi].b.mdp, setups[vi].cls, inst_eps, delta, 0.01).policy.has_value();
    }

  // (b), (c) at eps = 0.05 with 20 seeds per variant; (d) adds eps = 0.1, 0.025 on the first 10.
  const std::vector<double> ladder = {0.1, 0.05, 0.025};
  struct Job {
    int vi, k;
    double eps;
    bool offline;
  };
  std::vector<Job> jobs;
  for (double eps : ladder)
    for (int vi = 0; vi < 2; ++vi)
      for (int k = 0; k < (eps == inst_eps ? 20 : 10); ++k)
        for (bool off : {true, false}) jobs.push_back({vi, k, eps, off});
  std::vector<SepRun> out(jobs.size());
  // Each job holds up to 4M offline episodes; bound the concurrent footprint.
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads(4))
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Job& jb = jobs[j];
    out[j] = separation_run(setups[jb.vi].b, setups[jb.vi].cls, setups[jb.vi].prof, jb.eps, seed_of(jb.vi + 1, jb.k),
                            jb.offline);
  }

  int good = 0, total = 0;
  std::vector<double> with, without;
  std::vector<double> ratio;
  for (double eps : ladder) {
    std::vector<double> w, wo;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].eps != eps) continue;
      if (eps == inst_eps && jobs[j].offline) {
        ++total;
        good += out[j].gap <= inst_eps;
      }
      if (eps == inst_eps) (jobs[j].offline ? with : without).push_back(double(out[j].online));
      if (jobs[j].k < 10) (jobs[j].offline ? w : wo).push_back(double(out[j].online));
    }
    ratio.push_back(median(w) / median(wo));
  }
  const double paired = median(with) / median(without);
  const bool monotone = ratio[1] <= ratio[0] * (1 + 1e-12) && ratio[2] <= ratio[1] * (1 + 1e-12);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.pass = empty == 40 && good >= 36 && paired <= 0.5 && monotone && secs < 1800;
  v.detail = fmt::format(
      "(a) {}/40 empty; (b) {}/{} with gap <= eps; (c) median online {:.0f} vs {:.0f} pure (ratio {:.3f}); "
      "(d) ratios {:.3f}, {:.3f}, {:.3f} at eps 0.1, 0.05, 0.025; {:.0f}s",
      empty, good, total, median(with), median(without), paired, ratio[0], ratio[1], ratio[2], secs);
  return v;
}

// ---------------------------------------------------------------------------

OfflineDataset arm_pulls(int arm, int n) {
  OfflineDataset d;
  d.records.assign(n, Transition{0, 0, arm, 1.0, 1});
  return d;
}

Verdict c6_verification() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> ladder = {0.2, 0.1, 0.05};
  FtpedelOptions opts;  // beta_scale = 1
  const OfflineDataset offline = arm_pulls(0, 1000);

  std::vector<double> xs, ys;
  int certified = 0, runs = 0;
  std::vector<std::string> medians;
  for (double eps : ladder) {
    const InstanceBundle b = gen_mab_verification(eps, 4);
    const PolicyClass cls = enumerate_det_policies(b.mdp);
    std::vector<double> counts(10);
    std::vector<int> ok(10);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads(8))
    for (int k = 0; k < 10; ++k) {
      Environment env(b.mdp);
      Rng rng(600 + k);
      const VerificationVerdict r = verify_policy(env, offline, constant_policy(b.mdp, 0), cls, eps, 0.1, rng, opts);
      counts[k] = double(r.online_episodes);
      ok[k] = r.outcome == VerifyOutcome::certified;
    }
    for (int k = 0; k < 10; ++k) certified += ok[k];
    runs += 10;
    xs.push_back(std::log(eps));
    ys.push_back(std::log(median(counts)));
    medians.push_back(fmt::format("{:.0f}", median(counts)));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / xs.size(), my += ys[i] / xs.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxx += (xs[i] - mx) * (xs[i] - mx), sxy += (xs[i] - mx) * (ys[i] - my);
  const double slope = sxy / sxx;

  // Soundness: mixed candidates at eps 0.2 and 0.1.
  int false_cert = 0, sound_runs = 0, refuted = 0;
  std::vector<int> fc(200, 0), rf(200, 0);
  const InstanceBundle b2 = gen_mab_verification(0.2, 4), b1 = gen_mab_verification(0.1, 4);
  const PolicyClass c2 = enumerate_det_policies(b2.mdp), c1 = enumerate_det_policies(b1.mdp);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads(8))
  for (int k = 0; k < 200; ++k) {
    const bool coarse = k % 2 == 0;
    const InstanceBundle& b = coarse ? b2 : b1;
    const double eps = coarse ? 0.2 : 0.1;
    const int arm = (k / 2) % 4;
    Environment env(b.mdp);
    Rng rng(10000 + k);
    const VerificationVerdict r = verify_policy(env, offline, constant_policy(b.mdp, arm), coarse ? c2 : c1, eps, 0.1,
                                                rng, opts);
    const double gap = b.v_star - b.mdp.mean_reward(0, 0, arm);
    fc[k] = r.outcome == VerifyOutcome::certified && gap > eps;
    rf[k] = r.outcome == VerifyOutcome::refuted;
  }
  for (int k = 0; k < 200; ++k) false_cert += fc[k], refuted += rf[k], ++sound_runs;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.pass = std::abs(slope + 2) <= 0.5 && certified == runs && false_cert == 0;
  v.detail = fmt::format("median episodes {} at eps 0.2, 0.1, 0.05; slope {:.3f}; {}/{} certified; "
                         "{} false certifications in {} runs ({} refuted); {:.0f}s",
                         fmt::join(medians, ", "), slope, certified, runs, false_cert, sound_runs, refuted, secs);
  return v;
}

// ---------------------------------------------------------------------------

Verdict c7_coverage_laws() {
  Verdict v;
  int checks = 0, broken = 0;
  auto non_increasing = [&](const std::vector<double>& xs) {
    for (std::size_t i = 1; i < xs.size(); ++i) {
      ++checks;
      if (xs[i] > xs[i - 1] * (1 + 1e-9) + 1e-12) ++broken;
    }
  };
  struct Bench {
    InstanceBundle b;
    std::function<OfflineDataset(std::int64_t, Rng&)> data;
    double eps;
  };
  std::vector<Bench> benches;
  {
    InstanceBundle s = gen_separation(0.04, 1);
    const Policy log = *s.logging;
    benches.push_back({s, [s, log](std::int64_t n, Rng& r) { return generate_offline(s.mdp, log, n, r); }, 0.04});
  }
  {
    InstanceBundle m = gen_minimax(2, 2, Eigen::MatrixXi::Ones(2, 2), 0.02, 4);
    const auto sched = minimax_offline_schedule(m);
    benches.push_back({m, [m, sched](std::int64_t n, Rng& r) { return generate_offline_scheduled(m.mdp, sched, n, r); }, 0.05});
  }
  {
    InstanceBundle a = gen_mab_verification(0.1, 4);
    benches.push_back({a, [](std::int64_t n, Rng&) { return arm_pulls(0, static_cast<int>(n)); }, 0.1});
  }
  {
    InstanceBundle r = gen_random_tabular(3, 2, 2, 17, FeatureMode::basis);
    const Policy u = Policy::uniform(r.mdp);
    benches.push_back({r, [r, u](std::int64_t n, Rng& g) { return generate_offline(r.mdp, u, n, g); }, 0.1});
  }
  CoverageOptions co;
  co.fw_iters = 200;
  for (const Bench& bn : benches) {
    const LinearMdp& m = bn.b.mdp;
    const PolicyClass cls = enumerate_det_policies(m, {.prune_unreachable = true});
    const auto prof = exact_profiles(m, cls.members, false);
    Rng r1(1), r2(2);
    OfflineDataset small = bn.data(200, r1), mid = small, big;
    const OfflineDataset more = bn.data(800, r2);
    mid.records.insert(mid.records.end(), more.records.begin(), more.records.end());
    big = mid;
    Rng r3(3);
    const OfflineDataset most = bn.data(4000, r3);
    big.records.insert(big.records.end(), most.records.begin(), most.records.end());
    const double ridge = 1.0 / m.dim();
    const StepCovariates cs = offline_covariates(small, m, ridge), cm = offline_covariates(mid, m, ridge),
                         cb = offline_covariates(big, m, ridge);
    for (int h = 0; h < m.horizon(); ++h) {
      std::vector<double> in_T, in_eps, in_data;
      for (double T : {0.0, 100.0, 1000.0}) in_T.push_back(c_o2o(m, cs, prof, bn.eps, T, h, co).value);
      for (double e : {bn.eps / 2, bn.eps, 2 * bn.eps}) in_eps.push_back(c_o2o(m, cs, prof, e, 100.0, h, co).value);
      for (const StepCovariates* c : {&cs, &cm, &cb}) in_data.push_back(c_o2o(m, *c, prof, bn.eps, 100.0, h, co).value);
      non_increasing(in_T);
      non_increasing(in_eps);
      non_increasing(in_data);
    }
  }

  // t_o2o against T_off on the minimax family with the block schedule.
  const InstanceBundle mm = gen_minimax(2, 2, Eigen::MatrixXi::Ones(2, 2), 1 / (20 * std::sqrt(2.0)), 4);
  const PolicyClass mcls = enumerate_det_policies(mm.mdp);
  const auto mprof = exact_profiles(mm.mdp, mcls.members, false);
  const auto sched = minimax_offline_schedule(mm);
  std::vector<double> curve;
  std::vector<std::string> shown;
  for (std::int64_t T_off : {0, 64, 256, 1024, 4096, 16384, 65536}) {
    Rng r(1);
    const StepCovariates cov =
        offline_covariates(generate_offline_scheduled(mm.mdp, sched, T_off, r), mm.mdp, 1.0 / mm.mdp.dim());
    const auto t = t_o2o(mm.mdp, cov, mprof, 0.05, 1.0, 0, co);
    curve.push_back(double(t));
    shown.push_back(fmt::format("{}:{}", T_off, t));
  }
  const int before = broken;
  non_increasing(curve);
  const bool shape = broken == before && curve.front() > 0 && curve.back() == 0;
  v.pass = broken == 0 && shape;
  v.detail = fmt::format("{} monotonicity violations in {} ladder steps; t_o2o(T_off) = {}", broken, checks,
                         fmt::join(shown, " "));
  return v;
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict c8_determinism(const std::string& cli) {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "lmdp_acceptance_c8";
  fs::remove_all(root);
  auto pipeline = [&](const fs::path& dir, int workers) {
    fs::create_directories(dir);
    const std::string env = "LMDP_WORKERS=" + std::to_string(workers) + " ";
    const std::string d = dir.string() + "/";
    std::ofstream(d + "run_sep.json") << R"({"algorithm": "ftpedel", "eps": 0.05, "seeds": 3, "beta_scale": 0.01,
 "offline_episodes": 10000})";
    const std::vector<std::string> cmds = {
        cli + " gen separation --eps 0.05 --variant 1 --out " + d + "sep.json",
        cli + " gen mab --eps 0.1 --arms 4 --out " + d + "mab.json",
        cli + " gen offline --instance " + d + "sep.json --episodes 2000 --seed 5 --out " + d + "log.jsonl",
        cli + " eval --instance " + d + "sep.json --dataset " + d + "log.jsonl --eps 0.05 --T_grid 0 100 --fw_iters 100 --csv " +
            d + "eval.csv --out " + d + "eval.json",
        env + cli + " run --config " + d + "run_sep.json --instance " + d + "sep.json --out " + d + "sep_ftpedel.csv --epochs_out " +
            d + "sep_epochs.csv",
        env + cli + " run --instance " + d + "sep.json --algorithm offline_verify --eps 0.05 --seeds 3 --offline_episodes 10000 --out " +
            d + "sep_ov.csv",
        env + cli + " run --instance " + d + "mab.json --algorithm verify_policy --candidate const:1 --eps 0.1 --seeds 4 "
                    "--beta_scale 0.01 --out " + d + "mab_verify.csv",
        env + cli + " run --instance " + d + "mab.json --algorithm ftpedel --eps 0.1 --seeds 4 --beta_scale 0.01 --out " + d +
            "mab_ftpedel.csv --epochs_out " + d + "mab_epochs.csv",
        env + cli + " run --instance " + d + "mab.json --algorithm pure_online --eps 0.1 --seeds 4 --beta_scale 0.01 --out " + d +
            "mab_pure.csv",
        cli + " report --inputs " + d + "mab_ftpedel.csv " + d + "sep_ftpedel.csv --baseline " + d + "mab_pure.csv --out " + d +
            "summary.csv --plot " + d + "plot.json",
    };
    for (const auto& c : cmds)
      if (std::system((c + " > /dev/null").c_str()) != 0) return "command failed: " + c;
    return std::string();
  };
  const std::string e1 = pipeline(root / "first", 1), e2 = pipeline(root / "second", 2);
  if (!e1.empty() || !e2.empty()) {
    v.detail = e1.empty() ? e2 : e1;
    return v;
  }
  int files = 0, differ = 0;
  std::vector<std::string> bad;
  for (const auto& entry : fs::directory_iterator(root / "first")) {
    const std::string name = entry.path().filename().string();
    if (name.find(".timing.") != std::string::npos) continue;
    ++files;
    if (slurp(entry.path()) != slurp(root / "second" / name)) {
      ++differ;
      bad.push_back(name);
    }
  }
  v.pass = differ == 0 && files >= 12;
  v.detail = fmt::format("{} output files compared across 1 and 2 workers, {} differ{}{}", files, differ,
                         bad.empty() ? "" : ": ", fmt::join(bad, ", "));
  return v;
}

template <class F>
Verdict timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v = f();
  v.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";
  std::vector<std::string> only;
  for (int i = 2; i < argc; ++i) only.push_back(argv[i]);
  auto wanted = [&](const std::string& id) { return only.empty() || std::count(only.begin(), only.end(), id); };

  std::vector<std::pair<std::string, Verdict>> results;
  auto run = [&](const std::string& id, const std::string& title, auto f) {
    if (!wanted(id)) return;
    std::cerr << "running " << id << " " << title << "...\n";
    results.push_back({id + " " + title, timed(f)});
  };
  run("C1", "visitation exactness", c1_visitation);
  run("C2", "design objective", c2_objective);
  run("C3", "Frank-Wolfe convergence", c3_frank_wolfe);
  run("C5", "separation reproduction", c5_separation);
  run("C6", "verification scaling", c6_verification);
  run("C4", "OptCov post-guarantee", [] { return c4_optcov(g_diagnostics); });
  run("C7", "coverage-quantity laws", c7_coverage_laws);
  run("C8", "determinism", [&] {
    if (cli.empty()) return Verdict{false, "no CLI path given"};
    return c8_determinism(cli);
  });

  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  bool all = true;
  for (const auto& [name, v] : results) {
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << '\n';
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
