#include "lmdp/ftpedel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lmdp/errors.hpp"

namespace lmdp {

double beta_epoch(int H, int d, double T_off, double T_bar, std::size_t num_policies, int epoch,
                  double delta) {
  const double lambda = 1.0 / d;
  const double l2 = static_cast<double>(epoch) * epoch;
  const double inner = d * std::log((lambda + (T_off + T_bar) / d) / lambda) +
                       2.0 * std::log(2.0 * H * H * static_cast<double>(num_policies) * l2 / delta);
  const double root = 2.0 * std::sqrt(inner) + std::sqrt(d * lambda);
  return std::pow(static_cast<double>(H), 4) * root * root;
}

int num_epochs(double epsilon) {
  if (!(epsilon > 0)) throw ValidationError("epsilon must be positive");
  return std::max(1, static_cast<int>(std::ceil(std::log2(4.0 / epsilon) - 1e-12)));
}

std::vector<StepData> aggregate_by_step(const OfflineDataset& data, const LinearMdp& mdp) {
  std::vector<StepData> out(mdp.horizon(), StepData::empty_for(mdp));
  for (const Transition& t : data.records) {
    if (t.h < 0 || t.h >= mdp.horizon() || t.s < 0 || t.s >= mdp.num_states() || t.a < 0 ||
        t.a >= mdp.num_actions() || t.sp < 0 || t.sp > mdp.num_states())
      throw DimensionError("offline record out of range for this MDP");
    out[t.h].add(mdp, t);
  }
  return out;
}

double offline_size(const OfflineDataset& data, const LinearMdp& mdp) {
  std::vector<std::int64_t> per(mdp.horizon(), 0);
  for (const Transition& t : data.records)
    if (t.h >= 0 && t.h < mdp.horizon()) ++per[t.h];
  return static_cast<double>(per.empty() ? 0 : *std::max_element(per.begin(), per.end()));
}

Vec estimate_reward(const StepData& data, const Mat& M, const LinearMdp& mdp) {
  const Mat inv = linalg::spd_inverse(M, "reward regression covariates");
  if (data.count.size() == 0) return Vec::Zero(mdp.dim());
  return inv * (mdp.features() * data.reward_sum);
}

namespace {

// S x d operator: row s' = Σ_{(s,a)} N(s,a,s') φ(s,a)ᵀ M⁻¹.
Mat transition_operator(const StepData& data, const Mat& M_inv, const LinearMdp& mdp) {
  const int S = mdp.num_states();
  if (data.next_count.size() == 0) return Mat::Zero(S, mdp.dim());
  return data.next_count.leftCols(S).transpose() * mdp.features().transpose() * M_inv;
}

Vec push_forward(const Vec& u, const PolicyTable& policy, const LinearMdp& mdp, int next_step) {
  Vec out = Vec::Zero(mdp.dim());
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (u(s) == 0.0) continue;
    const auto row = policy.row(next_step, s);
    for (int a = 0; a < mdp.num_actions(); ++a)
      if (row[a] != 0.0) out.noalias() += (u(s) * row[a]) * mdp.feature(s, a);
  }
  return out;
}

Mat unique_columns(const std::vector<Vec>& vs) {
  std::map<std::vector<double>, int> seen;
  std::vector<const Vec*> keep;
  for (const Vec& v : vs)
    if (seen.emplace(std::vector<double>(v.data(), v.data() + v.size()), 0).second) keep.push_back(&v);
  Mat out(vs.empty() ? 0 : vs.front().size(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) out.col(j) = *keep[j];
  return out;
}

class BudgetScope {
 public:
  BudgetScope(Environment& env, std::int64_t limit) : env_(env), saved_(env.budget()) {
    env.set_budget(std::min(saved_, limit));
  }
  ~BudgetScope() { env_.set_budget(saved_); }

 private:
  Environment& env_;
  std::int64_t saved_;
};

}  // namespace

Vec propagate_visitation(const StepData& data, const Mat& M_inv, const PolicyTable& policy,
                         const Vec& phi_h, const LinearMdp& mdp, int h) {
  if (h + 1 >= mdp.horizon()) throw DimensionError("no step after the last one");
  return push_forward(transition_operator(data, M_inv, mdp) * phi_h, policy, mdp, h + 1);
}

std::vector<std::size_t> eliminate(const std::vector<double>& values, double eps_l) {
  if (values.empty()) return {};
  const double top = *std::max_element(values.begin(), values.end());
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!(values[i] < top - 2.0 * eps_l)) keep.push_back(i);
  return keep;
}

SeResult run_elimination(Environment& env, double epsilon, double delta, const PolicyClass& cls,
                         std::int64_t online_budget, const OfflineDataset& offline, Rng& rng,
                         const FtpedelOptions& opts, const EpochHook& hook) {
  const LinearMdp& mdp = env.model();
  const int H = mdp.horizon(), d = mdp.dim();
  const std::size_t n = cls.size();
  if (n == 0) throw ValidationError("policy class is empty");
  if (!(delta > 0 && delta < 1)) throw ValidationError("delta must lie in (0,1)");
  if (online_budget < 0) throw ValidationError("online budget must be nonnegative");

  std::vector<PolicyTable> tables;
  tables.reserve(n);
  for (const Policy& p : cls.members) {
    p.check(mdp);
    if (p.is_mixture()) throw ValidationError("elimination needs Markov policies, not mixtures");
    tables.push_back(p.tabulate(mdp));
  }
  std::vector<VisitationProfile> exact;
  if (opts.oracle_targets) exact = exact_profiles(mdp, cls.members, false);

  const std::vector<StepData> off_steps = aggregate_by_step(offline, mdp);
  const double T_off = offline_size(offline, mdp);
  std::vector<Mat> off_cov, bases;
  for (int h = 0; h < H; ++h) {
    off_cov.push_back(off_steps[h].covariance(mdp));
    bases.push_back(reachable_feature_basis(mdp, h));
  }
  auto regmin = make_regret_minimizer(opts.regmin);

  const std::int64_t start = env.episodes();
  BudgetScope scope(env, start > Environment::kUnlimited - online_budget ? Environment::kUnlimited
                                                                         : start + online_budget);
  SeResult res;
  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;
  std::vector<double> values;

  const int L = num_epochs(epsilon);
  for (int ell = 1; ell <= L; ++ell) {
    const double eps_l = std::ldexp(1.0, -ell);
    const double beta = opts.beta_scale *
                        beta_epoch(H, d, T_off, static_cast<double>(online_budget), n, ell, delta);
    const double l2 = static_cast<double>(ell) * ell;
    const double eps_exp = eps_l * eps_l / beta;
    const double lambda_floor = std::log(4.0 * H * H * static_cast<double>(n) * l2 / delta);

    std::vector<Vec> phi(active.size());
    for (std::size_t k = 0; k < active.size(); ++k)
      phi[k] = mean_feature(mdp, tables[active[k]], 0, mdp.initial_state());
    values.assign(active.size(), 0.0);
    const std::size_t diag_begin = res.diagnostics.size();

    for (int h = 0; h < H; ++h) {
      Mat targets;
      if (opts.oracle_targets) {
        std::vector<Vec> xs;
        for (std::size_t idx : active) xs.push_back(exact[idx].feature[h]);
        targets = unique_columns(xs);
      } else {
        targets = unique_columns(phi);
      }
      OptCovOptions o;
      o.lambda_reg = 1.0 / d;
      o.bootstrap = opts.bootstrap;
      o.basis = &bases[h];
      OptCovResult oc = opt_cov(env, h, targets, eps_exp, delta / (2.0 * H * l2), lambda_floor,
                                off_cov[h], *regmin, rng, o);
      res.online_episodes = env.episodes() - start;
      EpochDiagnostic dg;
      dg.epoch = ell;
      dg.h = h + 1;
      dg.active = active.size();
      dg.episodes = oc.episodes;
      dg.f_value = oc.f_value;
      dg.coverage_ratio = oc.max_coverage / eps_exp;
      dg.terminated = oc.terminated;
      res.diagnostics.push_back(dg);
      if (oc.capped || !oc.terminated || res.online_episodes >= online_budget) {
        res.budget_exit = true;
        res.survivors = active;
        return res;
      }

      StepData data = off_steps[h];
      data.merge(oc.data);
      const Mat M = data.covariance(mdp) + (1.0 / d) * Mat::Identity(d, d);
      const Mat M_inv = linalg::spd_inverse(M, "step covariates");
      const Vec theta = M_inv * (mdp.features() * data.reward_sum);
      for (std::size_t k = 0; k < active.size(); ++k) values[k] += phi[k].dot(theta);
      if (h + 1 < H) {
        const Mat op = transition_operator(data, M_inv, mdp);
        const auto m = static_cast<std::int64_t>(active.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t k = 0; k < m; ++k)
          phi[k] = push_forward(op * phi[k], tables[active[k]], mdp, h + 1);
      }
    }

    EpochRecord rec;
    rec.epoch = ell;
    rec.eps = eps_l;
    rec.beta = beta;
    rec.active = active;
    rec.values = values;
    const std::vector<std::size_t> keep = eliminate(values, eps_l);
    std::vector<std::size_t> survivors;
    std::vector<double> kept_values;
    for (std::size_t pos : keep) {
      survivors.push_back(active[pos]);
      kept_values.push_back(values[pos]);
    }
    for (std::size_t i = diag_begin; i < res.diagnostics.size(); ++i)
      res.diagnostics[i].eliminated = active.size() - survivors.size();
    res.epochs.push_back(std::move(rec));
    active = std::move(survivors);
    values = std::move(kept_values);
    const bool hooked = hook && hook(res.epochs.back(), active);
    if (hooked || active.size() == 1) break;
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < active.size(); ++k)
    if (values[k] > values[best]) best = k;
  res.policy = active[best];
  res.survivors = active;
  return res;
}

SeResult ftpedel_se(Environment& env, double epsilon, double delta, const PolicyClass& cls,
                    std::int64_t online_budget, const OfflineDataset& offline, Rng& rng,
                    const FtpedelOptions& opts) {
  return run_elimination(env, epsilon, delta, cls, online_budget, offline, rng, opts, nullptr);
}

FtpedelResult ftpedel(Environment& env, double epsilon, double delta, const PolicyClass& cls,
                      const OfflineDataset& offline, Rng& rng, const FtpedelOptions& opts) {
  const std::int64_t start = env.episodes();
  FtpedelResult out;
  for (int i = 1;; ++i) {
    if (i >= 62) throw CapExceeded("ftpedel: online budget doubling overflowed");
    const std::int64_t budget = std::int64_t{1} << i;
    const std::int64_t used = env.episodes() - start;
    if (used + budget > opts.global_cap) {
      std::ostringstream os;
      os << "ftpedel: next call would need " << used + budget << " online episodes, above the cap of "
         << opts.global_cap << "; raise the cap, increase beta_scale tolerance or add offline data";
      throw CapExceeded(os.str());
    }
    SeResult se = ftpedel_se(env, epsilon, delta / (2.0 * i * i), cls, budget, offline, rng, opts);
    for (EpochDiagnostic dg : se.diagnostics) {
      dg.call = i;
      out.diagnostics.push_back(dg);
    }
    out.calls = i;
    if (se.policy) {
      out.policy = *se.policy;
      out.online_episodes = env.episodes() - start;
      out.epochs = static_cast<int>(se.epochs.size());
      out.epochs_detail = std::move(se.epochs);
      return out;
    }
  }
}

}  // namespace lmdp
