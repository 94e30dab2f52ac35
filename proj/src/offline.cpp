#include "lmdp/offline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "lmdp/errors.hpp"

namespace lmdp {

OfflineDataset generate_offline(const LinearMdp& mdp, const Policy& logging, std::int64_t episodes,
                                Rng& rng) {
  return generate_offline_scheduled(mdp, std::span<const Policy>(&logging, 1), episodes, rng);
}

OfflineDataset generate_offline_scheduled(const LinearMdp& mdp, std::span<const Policy> schedule,
                                          std::int64_t episodes, Rng& rng) {
  if (schedule.empty()) throw ValidationError("offline schedule is empty");
  if (episodes < 0) throw ValidationError("episode count must be nonnegative");
  std::vector<EpisodeSampler> samplers;
  samplers.reserve(schedule.size());
  for (const Policy& p : schedule) samplers.emplace_back(mdp, p);

  OfflineDataset data;
  data.records.reserve(static_cast<std::size_t>(episodes) * mdp.horizon());
  std::vector<Transition> ep;
  for (std::int64_t k = 0; k < episodes; ++k) {
    samplers[static_cast<std::size_t>(k) % samplers.size()].sample_into(rng, ep);
    data.records.insert(data.records.end(), ep.begin(), ep.end());
  }
  std::ostringstream os;
  os << episodes << " episodes";
  if (schedule.size() == 1)
    os << " from a " << schedule[0].kind() << " logging policy";
  else
    os << " from a cyclic schedule of " << schedule.size() << " policies";
  data.source_note = os.str();
  return data;
}

StepCovariates offline_covariates(const OfflineDataset& data, const LinearMdp& mdp, double ridge) {
  if (ridge < 0) throw ValidationError("ridge must be nonnegative");
  const int d = mdp.dim(), H = mdp.horizon();
  // Accumulate pair counts first; Λ is then a weighted Gram matrix per step.
  std::vector<Vec> counts(H, Vec::Zero(mdp.num_pairs()));
  for (const Transition& r : data.records) {
    if (r.h < 0 || r.h >= H || r.s < 0 || r.s >= mdp.num_states() || r.a < 0 ||
        r.a >= mdp.num_actions())
      throw DimensionError("offline record out of range for this MDP");
    counts[r.h](mdp.pair(r.s, r.a)) += 1.0;
  }
  StepCovariates cov;
  cov.ridge = ridge;
  for (int h = 0; h < H; ++h)
    cov.lambda.push_back(mdp.features() * counts[h].asDiagonal() * mdp.features().transpose() +
                         ridge * Mat::Identity(d, d));
  return cov;
}

double concentrability(std::span<const Vec> feature_visitation, const StepCovariates& cov) {
  if (feature_visitation.size() != cov.lambda.size())
    throw DimensionError("visitation and covariates disagree on the horizon");
  double c = 0.0;
  for (std::size_t h = 0; h < cov.lambda.size(); ++h) {
    const Vec& x = feature_visitation[h];
    if (x.isZero(0.0)) continue;
    // Pseudo-inverse on the covered subspace; any mass outside it is uncovered.
    Eigen::SelfAdjointEigenSolver<Mat> es(cov.lambda[h]);
    const Vec& ev = es.eigenvalues();
    const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    const Vec y = es.eigenvectors().transpose() * x;
    double q = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (ev(i) > tol)
        q += y(i) * y(i) / ev(i);
      else if (std::abs(y(i)) > 1e-10 * std::max(1.0, x.norm()))
        return std::numeric_limits<double>::infinity();
    }
    c += std::sqrt(q);
  }
  return c;
}

namespace {

// Distinct (φ_{π,h}, denominator) targets; many policies share them.
struct Targets {
  Mat X;
  Vec inv_den;
  std::vector<std::size_t> first;  // representative policy index per target
};

Targets collect_targets(std::span<const VisitationProfile> profiles, double epsilon, int h) {
  if (profiles.empty()) throw ValidationError("policy class is empty");
  double vstar = -std::numeric_limits<double>::infinity();
  for (const auto& p : profiles) vstar = std::max(vstar, p.value);
  std::map<std::vector<double>, std::size_t> seen;
  std::vector<Vec> xs;
  std::vector<double> inv;
  Targets t;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const Vec& x = profiles[i].feature.at(h);
    const double gap = vstar - profiles[i].value;
    const double den = std::max(gap * gap, epsilon * epsilon);
    std::vector<double> key(x.data(), x.data() + x.size());
    key.push_back(den);
    if (seen.emplace(std::move(key), xs.size()).second) {
      xs.push_back(x);
      inv.push_back(1.0 / den);
      t.first.push_back(i);
    }
  }
  t.X.resize(xs.front().size(), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t j = 0; j < xs.size(); ++j) t.X.col(j) = xs[j];
  t.inv_den = Eigen::Map<Vec>(inv.data(), static_cast<Eigen::Index>(inv.size()));
  return t;
}

struct Eval {
  double value;
  Eigen::Index arg;
  Mat inv;
};

Eval evaluate(const Targets& t, const Mat& M) {
  Eval e;
  e.inv = linalg::spd_inverse(M, "T*Lambda + Lambda_off");
  const Vec q = (t.X.cwiseProduct(e.inv * t.X)).colwise().sum().transpose().cwiseProduct(t.inv_den);
  e.value = q.maxCoeff(&e.arg);  // first maximal index
  return e;
}

}  // namespace

CoverageResult c_o2o(const LinearMdp& mdp, const StepCovariates& cov,
                     std::span<const VisitationProfile> profiles, double epsilon, double T, int h,
                     const CoverageOptions& opts) {
  if (!(epsilon > 0)) throw ValidationError("epsilon must be positive");
  if (T < 0) throw ValidationError("T must be nonnegative");
  if (h < 0 || h >= mdp.horizon()) throw DimensionError("step out of range");
  const Targets tg = collect_targets(profiles, epsilon, h);
  const Mat& B = cov.lambda.at(h);
  const int d = mdp.dim();

  CoverageResult out;
  if (T == 0.0) {
    const Eval e = evaluate(tg, B);
    out.value = e.value;
    out.argmax = tg.first[e.arg];
    out.covariance = Mat::Zero(d, d);
    return out;
  }

  std::vector<DeterministicPolicy> atoms;
  std::vector<Mat> atom_cov;
  auto add_atom = [&](BestResponse br) -> std::size_t {
    for (std::size_t i = 0; i < atoms.size(); ++i)
      if (atoms[i].actions == br.policy.actions) return i;
    atoms.push_back(std::move(br.policy));
    atom_cov.push_back(std::move(br.covariance));
    return atoms.size() - 1;
  };

  std::vector<double> w{1.0};
  add_atom(covariance_best_response(mdp, h, Mat::Identity(d, d)));
  Mat lambda = atom_cov[0];
  Eval e = evaluate(tg, T * lambda + B);
  out.value = e.value;
  out.argmax = tg.first[e.arg];
  out.weights = w;
  out.covariance = lambda;

  const int window = 50;
  double best_at_window = out.value;
  int t = 1;
  for (; t <= opts.fw_iters; ++t) {
    const Vec y = e.inv * tg.X.col(e.arg);
    const Mat G = (T * tg.inv_den(e.arg)) * (y * y.transpose());
    const std::size_t j = add_atom(covariance_best_response(mdp, h, 0.5 * (G + G.transpose())));
    w.resize(atoms.size(), 0.0);
    const double gamma = 2.0 / (t + 2.0);
    for (double& x : w) x *= 1.0 - gamma;
    w[j] += gamma;
    lambda = (1.0 - gamma) * lambda + gamma * atom_cov[j];
    e = evaluate(tg, T * lambda + B);
    if (e.value < out.value) {
      out.value = e.value;
      out.argmax = tg.first[e.arg];
      out.weights = w;
      out.covariance = lambda;
    }
    if (t % window == 0) {
      if (best_at_window - out.value <= opts.rel_tol * std::abs(best_at_window)) break;
      best_at_window = out.value;
    }
  }
  out.iterations = std::min(t, opts.fw_iters);
  out.weights.resize(atoms.size(), 0.0);

  // Fully corrective pass: exponentiated subgradient over the vertex weights.
  if (atoms.size() > 1 && opts.polish_iters > 0) {
    const std::size_t k = atoms.size();
    Vec v(k);
    for (std::size_t i = 0; i < k; ++i) v(i) = 0.5 * out.weights[i] + 0.5 / k;
    for (int it = 1; it <= opts.polish_iters; ++it) {
      Mat lam = Mat::Zero(d, d);
      for (std::size_t i = 0; i < k; ++i) lam += v(i) * atom_cov[i];
      const Eval pe = evaluate(tg, T * lam + B);
      if (pe.value < out.value) {
        out.value = pe.value;
        out.argmax = tg.first[pe.arg];
        out.weights.assign(v.data(), v.data() + k);
        out.covariance = lam;
      }
      const Vec y = pe.inv * tg.X.col(pe.arg);
      Vec grad(k);
      for (std::size_t i = 0; i < k; ++i) grad(i) = -T * tg.inv_den(pe.arg) * y.dot(atom_cov[i] * y);
      const double scale = std::max(grad.cwiseAbs().maxCoeff(), 1e-300);
      const double step = 2.0 / std::sqrt(static_cast<double>(it));
      for (std::size_t i = 0; i < k; ++i) v(i) *= std::exp(-step * grad(i) / scale);
      v /= v.sum();
    }
  }
  out.atoms = std::move(atoms);
  return out;
}

std::int64_t t_o2o(const LinearMdp& mdp, const StepCovariates& cov,
                   std::span<const VisitationProfile> profiles, double epsilon, double beta, int h,
                   const CoverageOptions& opts, std::int64_t cap) {
  if (!(beta > 0)) throw ValidationError("beta must be positive");
  const double target = 1.0 / beta;
  auto covered = [&](std::int64_t T) {
    return c_o2o(mdp, cov, profiles, epsilon, static_cast<double>(T), h, opts).value <= target;
  };
  if (covered(0)) return 0;
  std::int64_t lo = 0, hi = 1;
  while (!covered(hi)) {
    if (hi >= cap) {
      std::ostringstream os;
      os << "t_o2o: no T <= " << cap << " reaches C_o2o <= 1/beta at step " << h + 1
         << "; the policy class has directions no online policy reaches (lambda*_min,h = 0)";
      throw Unsatisfiable(os.str());
    }
    lo = hi;
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (covered(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace lmdp
