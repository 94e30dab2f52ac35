#include "lmdp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "lmdp/errors.hpp"

namespace lmdp {

namespace {

struct SubspaceEig {
  double value = 0.0;
  Vec direction;
};

SubspaceEig min_eig_on(const Mat& m, const Mat& basis) {
  SubspaceEig out;
  if (basis.cols() == 0) {
    out.direction = Vec::Zero(m.rows());
    return out;
  }
  const Mat r = basis.transpose() * m * basis;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (r + r.transpose()));
  out.value = es.eigenvalues()(0);
  out.direction = basis * es.eigenvectors().col(0);
  Eigen::Index k;
  out.direction.cwiseAbs().maxCoeff(&k);
  if (out.direction(k) < 0) out.direction = -out.direction;
  return out;
}

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

OfflineVerifyResult offline_verify(const OfflineDataset& offline, const LinearMdp& mdp,
                                   const PolicyClass& cls, double epsilon, double delta,
                                   double beta_scale) {
  const int H = mdp.horizon(), d = mdp.dim();
  const std::size_t n = cls.size();
  if (n == 0) throw ValidationError("policy class is empty");
  if (!(delta > 0 && delta < 1)) throw ValidationError("delta must lie in (0,1)");

  const std::vector<StepData> steps = aggregate_by_step(offline, mdp);
  const double T_off = offline_size(offline, mdp);
  std::vector<Mat> raw(H), inv(H);
  std::vector<Vec> theta(H);
  std::vector<SubspaceEig> eig(H);
  for (int h = 0; h < H; ++h) {
    raw[h] = steps[h].covariance(mdp);
    inv[h] = linalg::spd_inverse(raw[h] + Mat::Identity(d, d) / d, "offline covariates");
    theta[h] = inv[h] * (mdp.features() * steps[h].reward_sum);
    eig[h] = min_eig_on(raw[h], reachable_feature_basis(mdp, h));
  }

  // φ̂_{π,h} and V̂ for every policy, computed once.
  std::vector<std::vector<double>> quad(n, std::vector<double>(H));
  std::vector<double> value(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    cls.members[k].check(mdp);
    const PolicyTable table = cls.members[k].tabulate(mdp);
    Vec phi = mean_feature(mdp, table, 0, mdp.initial_state());
    for (int h = 0; h < H; ++h) {
      quad[k][h] = phi.dot(inv[h] * phi);
      value[k] += phi.dot(theta[h]);
      if (h + 1 < H) phi = propagate_visitation(steps[h], inv[h], table, phi, mdp, h);
    }
  }

  OfflineVerifyResult res;
  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;
  const int L = num_epochs(epsilon);
  for (int ell = 1; ell <= L; ++ell) {
    const double eps_l = std::ldexp(1.0, -ell);
    const double l2 = static_cast<double>(ell) * ell;
    const double beta = beta_scale * beta_epoch(H, d, T_off, 0.0, n, ell, delta);
    const double thr_a = eps_l * eps_l / beta;
    const double thr_b = std::log(4.0 * H * H * static_cast<double>(n) * l2 / delta);
    bool failed = false;
    for (int h = 0; h < H; ++h) {
      StepCheck c;
      c.epoch = ell;
      c.h = h + 1;
      c.threshold_a = thr_a;
      c.threshold_b = thr_b;
      c.max_coverage = -1.0;
      for (std::size_t k : active)
        if (quad[k][h] > c.max_coverage) {
          c.max_coverage = quad[k][h];
          c.worst_policy = k;
        }
      c.clause_a = c.max_coverage <= thr_a;
      c.lambda_min = eig[h].value;
      c.weak_direction = eig[h].direction;
      c.clause_b = c.lambda_min >= thr_b;
      if (!(c.clause_a && c.clause_b) && !res.report.first_failure)
        res.report.first_failure = res.report.checks.size();
      failed = failed || !(c.clause_a && c.clause_b);
      res.report.checks.push_back(std::move(c));
    }
    if (failed) return res;

    EpochRecord rec;
    rec.epoch = ell;
    rec.eps = eps_l;
    rec.beta = beta;
    rec.active = active;
    for (std::size_t k : active) rec.values.push_back(value[k]);
    std::vector<std::size_t> next;
    for (std::size_t pos : eliminate(rec.values, eps_l)) next.push_back(active[pos]);
    res.epochs.push_back(std::move(rec));
    active = std::move(next);
    if (active.size() == 1) break;
  }
  res.report.passed = true;
  std::size_t best = active.front();
  for (std::size_t k : active)
    if (value[k] > value[best]) best = k;
  res.policy = best;
  return res;
}

double verifiability_beta(int d, int H, double T_off, double epsilon, double delta) {
  const double e = std::numbers::e;
  const double iota = std::log(e + d) + std::log(e + H) + std::log(e + T_off) +
                      std::log(e + 1.0 / epsilon) + std::log(e + std::log(1.0 / delta));
  return d * std::pow(static_cast<double>(H), 5) * iota + std::log(1.0 / delta);
}

VerifiabilityCheck check_verifiability_condition(const LinearMdp& mdp, const OfflineDataset& offline,
                                                 std::span<const VisitationProfile> profiles,
                                                 double epsilon, double delta, double beta) {
  if (profiles.empty()) throw ValidationError("no profiles supplied");
  if (!(epsilon > 0)) throw ValidationError("epsilon must be positive");
  const int H = mdp.horizon(), d = mdp.dim();
  VerifiabilityCheck out;
  out.beta = beta > 0 ? beta : verifiability_beta(d, H, offline_size(offline, mdp), epsilon, delta);
  const std::vector<StepData> steps = aggregate_by_step(offline, mdp);
  double vstar = -std::numeric_limits<double>::infinity();
  for (const auto& p : profiles) vstar = std::max(vstar, p.value);

  out.ratio_ok = out.eig_ok = true;
  for (int h = 0; h < H; ++h) {
    const Mat raw = steps[h].covariance(mdp);
    const Mat inv = linalg::spd_inverse(raw + Mat::Identity(d, d) / d, "offline covariates");
    StepMargin m;
    m.h = h + 1;
    for (std::size_t k = 0; k < profiles.size(); ++k) {
      const Vec& x = profiles[k].feature.at(h);
      const double gap = vstar - profiles[k].value;
      const double r = x.dot(inv * x) / std::max(gap * gap, epsilon * epsilon);
      if (k == 0 || r > m.max_ratio) {
        m.max_ratio = r;
        m.worst_policy = k;
      }
    }
    m.lambda_min = min_eig_on(raw, reachable_feature_basis(mdp, h)).value;
    m.ratio_ok = m.max_ratio <= 1.0 / out.beta;
    m.eig_ok = m.lambda_min >= static_cast<double>(d) * d / (static_cast<double>(H) * H) * out.beta;
    out.ratio_ok = out.ratio_ok && m.ratio_ok;
    out.eig_ok = out.eig_ok && m.eig_ok;
    out.steps.push_back(m);
  }
  return out;
}

std::string to_string(VerifyOutcome o) {
  switch (o) {
    case VerifyOutcome::certified: return "certified";
    case VerifyOutcome::refuted: return "refuted";
    case VerifyOutcome::budget_exhausted: return "budget_exhausted";
  }
  return "unknown";
}

VerificationVerdict verify_policy(Environment& env, const OfflineDataset& offline, const Policy& candidate,
                                  const PolicyClass& cls, double epsilon, double delta, Rng& rng,
                                  const FtpedelOptions& opts) {
  candidate.check(env.model());
  PolicyClass joint = cls;
  joint.label = cls.label + "+candidate";
  VerificationVerdict v;
  const auto it = std::find(cls.members.begin(), cls.members.end(), candidate);
  v.candidate = static_cast<std::size_t>(it - cls.members.begin());
  if (it == cls.members.end()) joint.members.push_back(candidate);
  v.eps_ver = epsilon;

  const int L = num_epochs(epsilon);
  bool decided = false;
  auto hook = [&](const EpochRecord& rec, const std::vector<std::size_t>& survivors) {
    const auto pos = std::find(rec.active.begin(), rec.active.end(), v.candidate) - rec.active.begin();
    const std::size_t top = argmax_first(rec.values);
    const double est_gap = rec.values[top] - rec.values[static_cast<std::size_t>(pos)];
    v.eps_ver = std::max(epsilon, est_gap - 2.0 * rec.eps);
    const bool alive =
        std::find(survivors.begin(), survivors.end(), v.candidate) != survivors.end();
    if (!alive) {
      v.outcome = VerifyOutcome::refuted;
      v.witness = rec.active[top];
      decided = true;
    } else if (survivors.size() == 1 || est_gap + 2.0 * rec.eps <= epsilon || rec.epoch == L) {
      v.outcome = VerifyOutcome::certified;
      decided = true;
    }
    return decided;
  };

  const std::int64_t start = env.episodes();
  for (int i = 1; i < 62; ++i) {
    const std::int64_t budget = std::int64_t{1} << i;
    if (env.episodes() - start + budget > opts.global_cap) break;
    v.calls = i;
    const SeResult se =
        run_elimination(env, epsilon, delta / (2.0 * i * i), joint, budget, offline, rng, opts, hook);
    v.online_episodes = env.episodes() - start;
    if (decided) {
      v.epochs = static_cast<int>(se.epochs.size());
      return v;
    }
  }
  v.outcome = VerifyOutcome::budget_exhausted;
  v.online_episodes = env.episodes() - start;
  return v;
}

SoftmaxCover cover_softmax_class(const LinearMdp& mdp, double eta, double lo, double hi, double gamma,
                                 std::int64_t cap) {
  if (!(gamma > 0)) throw ValidationError("cover radius must be positive");
  if (!(eta > 0)) throw ValidationError("softmax temperature must be positive");
  if (!(hi >= lo)) throw ValidationError("weight box is empty");
  const int d = mdp.dim(), H = mdp.horizon();
  SoftmaxCover out;
  out.spacing = gamma / (2.0 * eta * std::sqrt(static_cast<double>(H)));
  std::vector<double> axis;
  if (gamma >= 2.0 || hi == lo) {
    axis.push_back(0.5 * (lo + hi));
  } else {
    const int intervals = std::max(1, static_cast<int>(std::ceil((hi - lo) / out.spacing - 1e-9)));
    for (int i = 0; i <= intervals; ++i) axis.push_back(lo + (hi - lo) * i / intervals);
  }
  out.points_per_axis = static_cast<int>(axis.size());

  double total = 1.0;
  for (int j = 0; j < d * H; ++j) total *= axis.size();
  if (total > static_cast<double>(cap)) {
    std::ostringstream os;
    os << "softmax cover needs " << axis.size() << "^" << d * H << " policies, above the cap of " << cap;
    throw CapExceeded(os.str());
  }
  std::vector<Vec> per_step;
  const auto m = static_cast<std::int64_t>(std::llround(std::pow(axis.size(), d)));
  for (std::int64_t k = 0; k < m; ++k) {
    Vec w(d);
    std::int64_t r = k;
    for (int j = d; j-- > 0;) {
      w(j) = axis[static_cast<std::size_t>(r % static_cast<std::int64_t>(axis.size()))];
      r /= static_cast<std::int64_t>(axis.size());
    }
    per_step.push_back(std::move(w));
  }
  out.cls = softmax_grid(mdp, eta, std::vector<std::vector<Vec>>(H, per_step), cap);
  out.cls.label = "softmax_cover";
  return out;
}

}  // namespace lmdp
