#include "lmdp/visitation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lmdp/errors.hpp"

namespace lmdp {

namespace {

VisitationProfile markov_profile(const LinearMdp& mdp, const PolicyTable& t, bool with_covariance) {
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  VisitationProfile prof;
  prof.state_action.reserve(H);
  prof.feature.reserve(H);
  if (with_covariance) prof.covariance.reserve(H);

  Vec states = Vec::Zero(S);
  states(mdp.initial_state()) = 1.0;
  for (int h = 0; h < H; ++h) {
    Vec w(S * A);
    for (int s = 0; s < S; ++s) {
      const auto row = t.row(h, s);
      for (int a = 0; a < A; ++a) w(s * A + a) = states(s) * row[a];
    }
    prof.feature.push_back(mdp.features() * w);
    if (with_covariance) {
      prof.covariance.push_back(mdp.features() * w.asDiagonal() * mdp.features().transpose());
    }
    prof.value += prof.feature.back().dot(mdp.theta(h));
    if (h + 1 < H) states = mdp.transition(h).transpose() * w;
    prof.state_action.push_back(std::move(w));
  }
  return prof;
}

void accumulate(VisitationProfile& into, const VisitationProfile& p, double weight) {
  if (into.feature.empty()) {
    into.state_action.reserve(p.feature.size());
    for (std::size_t h = 0; h < p.feature.size(); ++h) {
      into.state_action.push_back(weight * p.state_action[h]);
      into.feature.push_back(weight * p.feature[h]);
      if (!p.covariance.empty()) into.covariance.push_back(weight * p.covariance[h]);
    }
  } else {
    for (std::size_t h = 0; h < p.feature.size(); ++h) {
      into.state_action[h] += weight * p.state_action[h];
      into.feature[h] += weight * p.feature[h];
      if (!p.covariance.empty()) into.covariance[h] += weight * p.covariance[h];
    }
  }
  into.value += weight * p.value;
}

VisitationProfile profile_unchecked(const LinearMdp& mdp, const Policy& policy, bool with_covariance) {
  if (const auto* m = policy.mixture()) {
    VisitationProfile out;
    for (std::size_t i = 0; i < m->members.size(); ++i)
      accumulate(out, profile_unchecked(mdp, m->members[i], with_covariance), m->weights[i]);
    return out;
  }
  return markov_profile(mdp, policy.tabulate(mdp), with_covariance);
}

std::int64_t checked_power(int base, int exponent, std::int64_t cap, const char* what) {
  std::int64_t n = 1;
  for (int i = 0; i < exponent; ++i) {
    if (n > cap / std::max(base, 1)) {
      std::ostringstream os;
      os << what << ": " << base << "^" << exponent << " policies exceeds the cap of " << cap
         << "; enable reachability pruning, shrink the instance, or raise the cap";
      throw CapExceeded(os.str());
    }
    n *= base;
  }
  if (n > cap) {
    std::ostringstream os;
    os << what << ": " << n << " policies exceeds the cap of " << cap;
    throw CapExceeded(os.str());
  }
  return n;
}

}  // namespace

VisitationProfile exact_profile(const LinearMdp& mdp, const Policy& policy, bool with_covariance) {
  policy.check(mdp);
  return profile_unchecked(mdp, policy, with_covariance);
}

std::vector<VisitationProfile> exact_profiles(const LinearMdp& mdp, std::span<const Policy> policies,
                                              bool with_covariance) {
  for (const Policy& p : policies) p.check(mdp);
  std::vector<VisitationProfile> out(policies.size());
  const auto n = static_cast<std::int64_t>(policies.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) out[i] = profile_unchecked(mdp, policies[i], with_covariance);
  return out;
}

std::vector<VisitationProfile> exact_profiles_serial(const LinearMdp& mdp,
                                                     std::span<const Policy> policies,
                                                     bool with_covariance) {
  std::vector<VisitationProfile> out;
  out.reserve(policies.size());
  for (const Policy& p : policies) out.push_back(exact_profile(mdp, p, with_covariance));
  return out;
}

double dp_value(const LinearMdp& mdp, const Policy& policy) {
  policy.check(mdp);
  if (const auto* m = policy.mixture()) {
    double v = 0.0;
    for (std::size_t i = 0; i < m->members.size(); ++i) v += m->weights[i] * dp_value(mdp, m->members[i]);
    return v;
  }
  const PolicyTable t = policy.tabulate(mdp);
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  Vec next = Vec::Zero(S);
  for (int h = H - 1; h >= 0; --h) {
    Vec q = mdp.mean_rewards(h);
    if (h + 1 < H) q += mdp.transition(h) * next;
    Vec v = Vec::Zero(S);
    for (int s = 0; s < S; ++s) {
      const auto row = t.row(h, s);
      for (int a = 0; a < A; ++a) v(s) += row[a] * q(s * A + a);
    }
    next = std::move(v);
  }
  return next(mdp.initial_state());
}

namespace {

// Backward DP maximizing a per-step reward table; rewards[h] may be empty (zero).
OptimalPolicy plan(const LinearMdp& mdp, const std::vector<Vec>& rewards, int last_step) {
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  OptimalPolicy out;
  out.policy.actions.assign(H, std::vector<int>(S, 0));
  Vec next = Vec::Zero(S);
  for (int h = last_step; h >= 0; --h) {
    Vec q = rewards[h].size() ? rewards[h] : Vec::Zero(S * A);
    if (h < last_step) q += mdp.transition(h) * next;
    Vec v(S);
    for (int s = 0; s < S; ++s) {
      int best = 0;
      for (int a = 1; a < A; ++a)
        if (q(s * A + a) > q(s * A + best)) best = a;
      out.policy.actions[h][s] = best;
      v(s) = q(s * A + best);
    }
    next = std::move(v);
  }
  out.value = next(mdp.initial_state());
  return out;
}

}  // namespace

OptimalPolicy solve_optimal(const LinearMdp& mdp) {
  std::vector<Vec> r(mdp.horizon());
  for (int h = 0; h < mdp.horizon(); ++h) r[h] = mdp.mean_rewards(h);
  return plan(mdp, r, mdp.horizon() - 1);
}

OptimalPolicy plan_step_reward(const LinearMdp& mdp, int h, const Vec& reward) {
  if (h < 0 || h >= mdp.horizon()) throw DimensionError("step out of range");
  if (reward.size() != mdp.num_pairs()) throw DimensionError("reward must have one entry per pair");
  std::vector<Vec> r(mdp.horizon());
  r[h] = reward;
  return plan(mdp, r, h);
}

PolicyClass enumerate_det_policies(const LinearMdp& mdp, const EnumerateOptions& opts) {
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  std::vector<std::pair<int, int>> free;  // (h, s) slots that vary
  if (opts.prune_unreachable) {
    const auto reach = reachable_states(mdp);
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s)
        if (reach[h][s]) free.emplace_back(h, s);
  } else {
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s) free.emplace_back(h, s);
  }
  const std::int64_t n = checked_power(A, static_cast<int>(free.size()), opts.cap,
                                       "enumerate_det_policies");
  PolicyClass cls;
  cls.label = "det_enum";
  cls.members.reserve(n);
  std::vector<int> digits(free.size(), 0);
  DeterministicPolicy p;
  p.actions.assign(H, std::vector<int>(S, 0));
  for (std::int64_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < free.size(); ++i) p.actions[free[i].first][free[i].second] = digits[i];
    cls.members.emplace_back(p);
    // Increment, last slot fastest.
    for (std::size_t i = free.size(); i-- > 0;) {
      if (++digits[i] < A) break;
      digits[i] = 0;
    }
  }
  return cls;
}

PolicyClass softmax_grid(const LinearMdp& mdp, double temperature,
                         const std::vector<std::vector<Vec>>& grid, std::int64_t cap) {
  const int H = mdp.horizon();
  if (static_cast<int>(grid.size()) != H) throw DimensionError("softmax grid needs one list per step");
  std::int64_t n = 1;
  for (const auto& g : grid) {
    if (g.empty()) throw ValidationError("softmax grid has an empty step");
    if (n > cap / static_cast<std::int64_t>(g.size()))
      throw CapExceeded("softmax grid cardinality exceeds the cap of " + std::to_string(cap));
    n *= static_cast<std::int64_t>(g.size());
  }
  PolicyClass cls;
  cls.label = "softmax_grid";
  cls.members.reserve(n);
  std::vector<std::size_t> idx(H, 0);
  for (std::int64_t k = 0; k < n; ++k) {
    SoftmaxPolicy p;
    p.temperature = temperature;
    for (int h = 0; h < H; ++h) p.weights.push_back(grid[h][idx[h]]);
    Policy pol(std::move(p));
    pol.check(mdp);
    cls.members.push_back(std::move(pol));
    for (int h = H; h-- > 0;) {
      if (++idx[h] < grid[h].size()) break;
      idx[h] = 0;
    }
  }
  return cls;
}

std::vector<std::vector<bool>> reachable_states(const LinearMdp& mdp) {
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  std::vector<std::vector<bool>> reach(H, std::vector<bool>(S, false));
  reach[0][mdp.initial_state()] = true;
  for (int h = 0; h + 1 < H; ++h) {
    const Mat& p = mdp.transition(h);
    for (int s = 0; s < S; ++s) {
      if (!reach[h][s]) continue;
      for (int a = 0; a < A; ++a)
        for (int sp = 0; sp < S; ++sp)
          if (p(s * A + a, sp) > 0.0) reach[h + 1][sp] = true;
    }
  }
  return reach;
}

Mat reachable_feature_basis(const LinearMdp& mdp, int h) {
  const auto reach = reachable_states(mdp);
  const int S = mdp.num_states(), A = mdp.num_actions();
  std::vector<int> cols;
  for (int s = 0; s < S; ++s)
    if (reach.at(h)[s])
      for (int a = 0; a < A; ++a) cols.push_back(s * A + a);
  Mat m(mdp.dim(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) m.col(j) = mdp.features().col(cols[j]);
  return linalg::column_span(m);
}

Mat step_covariance(const LinearMdp& mdp, const Policy& policy, int h) {
  if (const auto* m = policy.mixture()) {
    Mat out = Mat::Zero(mdp.dim(), mdp.dim());
    for (std::size_t i = 0; i < m->members.size(); ++i)
      out += m->weights[i] * step_covariance(mdp, m->members[i], h);
    return out;
  }
  const PolicyTable t = policy.tabulate(mdp);
  const int S = mdp.num_states(), A = mdp.num_actions();
  Vec states = Vec::Zero(S);
  states(mdp.initial_state()) = 1.0;
  Vec w(S * A);
  for (int k = 0; k <= h; ++k) {
    for (int s = 0; s < S; ++s) {
      const auto row = t.row(k, s);
      for (int a = 0; a < A; ++a) w(s * A + a) = states(s) * row[a];
    }
    if (k < h) states = mdp.transition(k).transpose() * w;
  }
  return mdp.features() * w.asDiagonal() * mdp.features().transpose();
}

BestResponse covariance_best_response(const LinearMdp& mdp, int h, const Mat& G) {
  if (G.rows() != mdp.dim() || G.cols() != mdp.dim()) throw DimensionError("G must be d x d");
  if (!linalg::is_symmetric(G, 1e-9)) throw ValidationError("G must be symmetric");
  const Mat& F = mdp.features();
  const Vec reward = (F.transpose() * G).cwiseProduct(F.transpose()).rowwise().sum();
  OptimalPolicy best = plan_step_reward(mdp, h, reward);
  BestResponse out;
  out.covariance = step_covariance(mdp, Policy(best.policy), h);
  out.value = best.value;
  out.policy = std::move(best.policy);
  return out;
}

MaxMinEigResult max_min_eig(const LinearMdp& mdp, int h, int iters, const Mat* basis) {
  const int d = mdp.dim();
  auto lmin = [&](const Mat& m) {
    return basis ? linalg::min_eigenvalue_on(m, *basis) : linalg::min_eigenvalue(m);
  };
  auto direction = [&](const Mat& m) -> Vec {
    if (!basis) return linalg::min_eigenvector(m);
    const Mat r = basis->transpose() * m * *basis;
    return *basis * linalg::min_eigenvector(0.5 * (r + r.transpose()));
  };

  std::vector<DeterministicPolicy> atoms;
  std::vector<Mat> atom_cov;
  std::vector<double> weights;
  auto add_atom = [&](BestResponse br) -> std::size_t {
    for (std::size_t i = 0; i < atoms.size(); ++i)
      if (atoms[i].actions == br.policy.actions) return i;
    atoms.push_back(std::move(br.policy));
    atom_cov.push_back(std::move(br.covariance));
    weights.push_back(0.0);
    return atoms.size() - 1;
  };

  const std::size_t first = add_atom(covariance_best_response(mdp, h, Mat::Identity(d, d)));
  weights[first] = 1.0;
  Mat cov = atom_cov[first];
  MaxMinEigResult best;
  best.lambda_min = lmin(cov);
  best.weights = weights;
  best.covariance = cov;

  for (int t = 1; t <= iters; ++t) {
    const Vec u = direction(cov);
    const std::size_t j = add_atom(covariance_best_response(mdp, h, u * u.transpose()));
    weights.resize(atoms.size(), 0.0);
    const double gamma = 2.0 / (t + 2.0);
    for (double& w : weights) w *= 1.0 - gamma;
    weights[j] += gamma;
    cov = (1.0 - gamma) * cov + gamma * atom_cov[j];
    const double lm = lmin(cov);
    if (lm > best.lambda_min) {
      best.lambda_min = lm;
      best.weights = weights;
      best.covariance = cov;
    }
  }
  best.weights.resize(atoms.size(), 0.0);
  best.atoms = std::move(atoms);
  best.full_rank = best.lambda_min > 1e-12;
  return best;
}

// ---------------------------------------------------------------------------

namespace {

struct McSums {
  std::vector<Vec> sum, sumsq, visits;
  double value = 0.0, value_sq = 0.0;

  McSums(int H, int d, int SA) : sum(H, Vec::Zero(d)), sumsq(H, Vec::Zero(d)), visits(H, Vec::Zero(SA)) {}

  void merge(const McSums& o) {
    for (std::size_t h = 0; h < sum.size(); ++h) {
      sum[h] += o.sum[h];
      sumsq[h] += o.sumsq[h];
      visits[h] += o.visits[h];
    }
    value += o.value;
    value_sq += o.value_sq;
  }
};

McSums run_chunk(const LinearMdp& mdp, const EpisodeSampler& sampler, std::int64_t n, Rng rng) {
  const int H = mdp.horizon();
  McSums acc(H, mdp.dim(), mdp.num_pairs());
  std::vector<Transition> ep;
  for (std::int64_t i = 0; i < n; ++i) {
    sampler.sample_into(rng, ep);
    double ret = 0.0;
    for (int h = 0; h < H; ++h) {
      const Transition& tr = ep[h];
      const auto phi = mdp.feature(tr.s, tr.a);
      acc.sum[h] += phi;
      acc.sumsq[h] += phi.cwiseAbs2();
      acc.visits[h](mdp.pair(tr.s, tr.a)) += 1.0;
      ret += tr.r;
    }
    acc.value += ret;
    acc.value_sq += ret * ret;
  }
  return acc;
}

MonteCarloProfile finish(const McSums& acc, std::int64_t n) {
  MonteCarloProfile out;
  out.episodes = n;
  const double dn = static_cast<double>(n);
  for (std::size_t h = 0; h < acc.sum.size(); ++h) {
    Vec mean = acc.sum[h] / dn;
    Vec var = (acc.sumsq[h] / dn - mean.cwiseAbs2()).cwiseMax(0.0);
    out.feature_se.push_back((var * (dn / std::max(dn - 1.0, 1.0)) / dn).cwiseSqrt());
    out.feature_mean.push_back(std::move(mean));
    out.state_action.push_back(acc.visits[h] / dn);
  }
  out.value_mean = acc.value / dn;
  const double vvar = std::max(0.0, acc.value_sq / dn - out.value_mean * out.value_mean);
  out.value_se = std::sqrt(vvar * (dn / std::max(dn - 1.0, 1.0)) / dn);
  return out;
}

}  // namespace

MonteCarloProfile monte_carlo_profile(const LinearMdp& mdp, const Policy& policy, std::int64_t episodes,
                                      std::uint64_t seed, std::int64_t chunk) {
  if (episodes <= 0) throw ValidationError("episodes must be positive");
  const EpisodeSampler sampler(mdp, policy);
  const Rng root(seed);
  const std::int64_t chunks = (episodes + chunk - 1) / chunk;
  std::vector<McSums> parts(chunks, McSums(mdp.horizon(), mdp.dim(), mdp.num_pairs()));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::int64_t n = std::min(chunk, episodes - c * chunk);
    parts[c] = run_chunk(mdp, sampler, n, root.split(static_cast<std::uint64_t>(c)));
  }
  McSums total(mdp.horizon(), mdp.dim(), mdp.num_pairs());
  for (const McSums& p : parts) total.merge(p);
  return finish(total, episodes);
}

MonteCarloProfile monte_carlo_profile_serial(const LinearMdp& mdp, const Policy& policy,
                                             std::int64_t episodes, std::uint64_t seed,
                                             std::int64_t chunk) {
  if (episodes <= 0) throw ValidationError("episodes must be positive");
  const EpisodeSampler sampler(mdp, policy);
  const Rng root(seed);
  McSums total(mdp.horizon(), mdp.dim(), mdp.num_pairs());
  for (std::int64_t c = 0; c * chunk < episodes; ++c) {
    const std::int64_t n = std::min(chunk, episodes - c * chunk);
    total.merge(run_chunk(mdp, sampler, n, root.split(static_cast<std::uint64_t>(c))));
  }
  return finish(total, episodes);
}

}  // namespace lmdp
