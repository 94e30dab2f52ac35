#include "lmdp/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lmdp/errors.hpp"
#include "lmdp/visitation.hpp"

namespace lmdp {

StepData::StepData(int num_pairs, int num_states)
    : count(Vec::Zero(num_pairs)),
      reward_sum(Vec::Zero(num_pairs)),
      next_count(Mat::Zero(num_pairs, num_states + 1)) {}

void StepData::add(const LinearMdp& mdp, const Transition& t) {
  const int p = mdp.pair(t.s, t.a);
  count(p) += 1.0;
  reward_sum(p) += t.r;
  next_count(p, t.sp) += 1.0;
  ++n;
}

void StepData::merge(const StepData& other) {
  if (other.n == 0) return;
  if (n == 0 && count.size() == 0) {
    *this = other;
    return;
  }
  count += other.count;
  reward_sum += other.reward_sum;
  next_count += other.next_count;
  n += other.n;
}

Mat StepData::covariance(const LinearMdp& mdp) const {
  if (count.size() == 0) return Mat::Zero(mdp.dim(), mdp.dim());
  return mdp.features() * count.asDiagonal() * mdp.features().transpose();
}

ObjectiveValue objective_eval(const DesignObjective& obj, const Mat& lambda, bool with_gradient) {
  if (obj.targets.cols() == 0) throw ValidationError("design objective has no targets");
  const Mat A = lambda + obj.offset();
  const Mat inv = linalg::spd_inverse(A, "design matrix A(Lambda)");
  const Mat Y = inv * obj.targets;
  const Vec q = obj.targets.cwiseProduct(Y).colwise().sum().transpose();
  ObjectiveValue out;
  out.max_quadratic = q.maxCoeff();
  const Vec w = (obj.eta * (q.array() - out.max_quadratic)).exp().matrix();
  const double z = w.sum();
  out.value = out.max_quadratic + std::log(z) / obj.eta;
  if (with_gradient) out.gradient = -(Y * (w / z).asDiagonal() * Y.transpose());
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<PolicyTable>& UcbPolicyArms::arms(const LinearMdp& mdp, int h) {
  if (cached_for_ != &mdp) {
    arms_.assign(mdp.horizon(), {});
    cached_for_ = &mdp;
  }
  auto& slot = arms_.at(h);
  if (!slot.empty()) return slot;

  const int S = mdp.num_states(), A = mdp.num_actions();
  const auto reach = reachable_states(mdp);
  std::vector<std::pair<int, int>> free;
  for (int k = 0; k <= h; ++k)
    for (int s = 0; s < S; ++s)
      if (reach[k][s]) free.emplace_back(k, s);
  std::int64_t n = 1;
  for (std::size_t i = 0; i < free.size(); ++i) {
    if (n > max_arms_ / A) {
      std::ostringstream os;
      os << "policy-as-arm regret minimizer: " << A << "^" << free.size()
         << " arms at step " << h + 1 << " exceeds " << max_arms_ << "; use the oracle planner";
      throw CapExceeded(os.str());
    }
    n *= A;
  }
  DeterministicPolicy base;
  base.actions.assign(mdp.horizon(), std::vector<int>(S, 0));
  std::vector<int> digits(free.size(), 0);
  slot.reserve(n);
  for (std::int64_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < free.size(); ++i) base.actions[free[i].first][free[i].second] = digits[i];
    slot.push_back(Policy(base).tabulate(mdp));
    for (std::size_t i = free.size(); i-- > 0;) {
      if (++digits[i] < A) break;
      digits[i] = 0;
    }
  }
  return slot;
}

int UcbPolicyArms::run(Environment& env, int h, const Vec& reward, int K, Rng& rng, StepData& out) {
  const LinearMdp& mdp = env.model();
  const auto& table = arms(mdp, h);
  const std::size_t n = table.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);

  std::vector<double> plays(n, 0.0), total(n, 0.0);
  int played = 0;
  for (int k = 0; k < K; ++k) {
    std::size_t pos = 0;
    if (static_cast<std::size_t>(k) < n) {
      pos = k;
    } else {
      const double logt = std::log(static_cast<double>(k));
      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double idx = total[i] / plays[i] + std::sqrt(2.0 * logt / plays[i]);
        if (idx > best) {
          best = idx;
          pos = i;
        }
      }
    }
    const auto tr = env.play_through(table[order[pos]], h, rng);
    if (!tr) break;
    out.add(mdp, *tr);
    plays[pos] += 1.0;
    total[pos] += reward(mdp.pair(tr->s, tr->a));
    ++played;
  }
  return played;
}

int OraclePlanner::run(Environment& env, int h, const Vec& reward, int K, Rng& rng, StepData& out) {
  const LinearMdp& mdp = env.model();
  const PolicyTable t = Policy(plan_step_reward(mdp, h, reward).policy).tabulate(mdp);
  int played = 0;
  for (; played < K; ++played) {
    const auto tr = env.play_through(t, h, rng);
    if (!tr) break;
    out.add(mdp, *tr);
  }
  return played;
}

std::unique_ptr<RegretMinimizer> make_regret_minimizer(const std::string& name) {
  if (name == "ucb") return std::make_unique<UcbPolicyArms>();
  if (name == "oracle") return std::make_unique<OraclePlanner>();
  throw ValidationError("unknown regret minimizer '" + name + "' (expected ucb or oracle)");
}

// ---------------------------------------------------------------------------

FwRegretResult fw_regret(Environment& env, int h, const DesignObjective& obj, int T, int K,
                         RegretMinimizer& regmin, Rng& rng, bool record) {
  if (T < 0 || K < 1) throw ValidationError("fw_regret needs T >= 0 and K >= 1");
  const LinearMdp& mdp = env.model();
  if (obj.targets.rows() != mdp.dim()) throw DimensionError("design targets must have length d");
  const Mat& F = mdp.features();

  FwRegretResult res;
  res.data = StepData::empty_for(mdp);
  const PolicyTable uniform = Policy::uniform(mdp).tabulate(mdp);
  StepData batch = StepData::empty_for(mdp);
  for (int k = 0; k < K; ++k) {
    const auto tr = env.play_through(uniform, h, rng);
    if (!tr) {
      res.capped = true;
      break;
    }
    batch.add(mdp, *tr);
    ++res.episodes;
  }
  res.data.merge(batch);
  if (res.capped) return res;

  Mat gamma_k = batch.covariance(mdp) / K;
  Mat lambda = gamma_k;
  if (record) {
    res.gammas.push_back(gamma_k);
    res.iterates.push_back(lambda);
  }
  for (int t = 1; t <= T; ++t) {
    const ObjectiveValue ov = objective_eval(obj, lambda);
    res.f_values.push_back(ov.value);
    const Mat xi = -ov.gradient;
    const double M = linalg::max_eigenvalue(0.5 * (xi + xi.transpose()));
    Vec reward = Vec::Zero(mdp.num_pairs());
    if (M > 0) reward = ((F.transpose() * xi).cwiseProduct(F.transpose()).rowwise().sum() / M)
                            .cwiseMax(0.0)
                            .cwiseMin(1.0);
    batch = StepData::empty_for(mdp);
    const int played = regmin.run(env, h, reward, K, rng, batch);
    res.episodes += played;
    res.data.merge(batch);
    if (played < K) {
      res.capped = true;
      return res;
    }
    const double g = 1.0 / (t + 1.0);
    gamma_k = batch.covariance(mdp) / K;
    lambda = (1.0 - g) * lambda + g * gamma_k;
    if (record) {
      res.gammas.push_back(gamma_k);
      res.iterates.push_back(lambda);
    }
  }
  res.f_values.push_back(objective_eval(obj, lambda, false).value);
  res.lambda = std::move(lambda);
  return res;
}

OptCovResult opt_cov(Environment& env, int h, const Mat& targets, double eps_exp, double delta,
                     double lambda_floor, const Mat& lambda_off, RegretMinimizer& regmin, Rng& rng,
                     const OptCovOptions& opts) {
  if (!(eps_exp > 0)) throw ValidationError("opt_cov needs eps_exp > 0");
  const LinearMdp& mdp = env.model();
  const int d = mdp.dim();
  if (lambda_off.rows() != d || lambda_off.cols() != d) throw DimensionError("lambda_off must be d x d");

  OptCovResult res;
  const Mat base = opts.lambda_reg * Mat::Identity(d, d);
  for (int i = 1; i <= std::min(opts.max_rounds, 30); ++i) {
    const int Ti = 1 << i, Ki = 1 << i;
    const double N = static_cast<double>(Ti) * Ki;
    const double eta = std::pow(2.0, 2.0 * i / 5.0);
    res.rounds = i;

    Mat lambda0 = base;
    StepData cond = StepData::empty_for(mdp);
    if (opts.bootstrap) {
      ConditionedCovResult cc = conditioned_cov(env, h, delta / (2.0 * i * i), lambda_floor, regmin, rng,
                                                opts.lambda_reg, opts.basis, &lambda_off);
      res.episodes += cc.episodes;
      if (cc.capped) {
        res.capped = true;
        res.data = std::move(cc.data);
        return res;
      }
      lambda0 = std::move(cc.lambda0);
      cond = std::move(cc.data);
    }

    DesignObjective obj{targets, eta, N, lambda0, lambda_off};
    FwRegretResult fw = fw_regret(env, h, obj, Ti - 1, Ki, regmin, rng);
    if (opts.record_trace) {
      std::int64_t before = res.episodes + Ki;  // warm-up precedes the first iterate
      for (std::size_t t = 0; t < fw.f_values.size(); ++t)
        res.trace.push_back({i, static_cast<int>(t) + 1, fw.f_values[t],
                             before + static_cast<std::int64_t>(t) * Ki});
    }
    res.episodes += fw.episodes;
    if (fw.capped) {
      res.capped = true;
      res.data = std::move(fw.data);
      res.data.merge(cond);
      return res;
    }

    const Mat sigma = fw.data.covariance(mdp);
    const ObjectiveValue ov = objective_eval(obj, sigma / N, false);
    const Mat total = sigma + lambda0 + lambda_off;
    res.f_value = ov.value;
    res.max_coverage = ov.max_quadratic / N;
    res.lambda_min =
        opts.basis ? linalg::min_eigenvalue_on(total, *opts.basis) : linalg::min_eigenvalue(total);
    if (ov.value <= N * eps_exp && res.lambda_min >= lambda_floor) {
      res.terminated = true;
      res.sigma = sigma;
      res.lambda0 = std::move(lambda0);
      res.data = std::move(fw.data);
      res.data.merge(cond);
      return res;
    }
  }
  return res;
}

ConditionedCovResult conditioned_cov(Environment& env, int h, double delta, double lambda_floor,
                                     RegretMinimizer& regmin, Rng& rng, double lambda_reg,
                                     const Mat* basis, const Mat* lambda_off) {
  const LinearMdp& mdp = env.model();
  const int d = mdp.dim();
  const Mat U = basis ? *basis : Mat::Identity(d, d);
  const Mat span = reachable_feature_basis(mdp, h);
  const Mat residual = U - span * (span.transpose() * U);
  if (U.cols() == 0 || residual.cwiseAbs().maxCoeff() > 1e-8) {
    std::ostringstream os;
    os << "conditioned_cov: requested directions leave the reachable feature span at step " << h + 1
       << " (rank " << span.cols() << " of " << d << "); no policy can cover them";
    throw Unsatisfiable(os.str());
  }

  ConditionedCovResult out;
  out.data = StepData::empty_for(mdp);
  if (lambda_floor <= 0) {
    const PolicyTable uniform = Policy::uniform(mdp).tabulate(mdp);
    for (int k = 0; k < 2; ++k) {
      const auto tr = env.play_through(uniform, h, rng);
      if (!tr) {
        out.capped = true;
        break;
      }
      out.data.add(mdp, *tr);
      ++out.episodes;
    }
    out.lambda0 = out.data.covariance(mdp) + lambda_reg * Mat::Identity(d, d);
    return out;
  }

  const double r = static_cast<double>(U.cols());
  const double eps = 1.0 / (r * std::max(lambda_floor, r * std::log(1.0 / delta)));
  const Mat off = lambda_off ? *lambda_off : Mat::Zero(d, d);
  OptCovOptions o;
  o.lambda_reg = lambda_reg;
  o.basis = &U;
  OptCovResult oc = opt_cov(env, h, U, eps, delta, 0.0, off, regmin, rng, o);
  out.episodes = oc.episodes;
  out.capped = oc.capped || !oc.terminated;
  out.data = std::move(oc.data);
  out.lambda0 = out.data.covariance(mdp) + lambda_reg * Mat::Identity(d, d);
  return out;
}

}  // namespace lmdp
