#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lmdp/mdp.hpp"

namespace lmdp {

/// Sufficient statistics of transitions observed at one step, keyed by pair.
struct StepData {
  Vec count;        // per pair
  Vec reward_sum;   // per pair
  Mat next_count;   // pairs x (S+1); last column is the terminal sentinel
  std::int64_t n = 0;

  StepData() = default;
  StepData(int num_pairs, int num_states);
  static StepData empty_for(const LinearMdp& mdp) { return {mdp.num_pairs(), mdp.num_states()}; }

  void add(const LinearMdp& mdp, const Transition& t);
  void merge(const StepData& other);
  /// Σ φφᵀ over the records.
  Mat covariance(const LinearMdp& mdp) const;
};

/// f(Λ) = (1/η) log Σ_φ exp(η ‖φ‖²_{A⁻¹}),  A = Λ + (Λ_0 + Λ_off)/N.
struct DesignObjective {
  Mat targets;  // d x |Φ|
  double eta = 1.0;
  double scale = 1.0;  // N
  Mat lambda0;
  Mat lambda_off;

  Mat offset() const { return (lambda0 + lambda_off) / scale; }
};

struct ObjectiveValue {
  double value = 0.0;
  double max_quadratic = 0.0;  // max_φ ‖φ‖²_{A⁻¹}
  Mat gradient;                // ∇f = −A⁻¹(Σ w_φ φφᵀ)A⁻¹
};

ObjectiveValue objective_eval(const DesignObjective& obj, const Mat& lambda, bool with_gradient = true);

/// Plays episodes that aim to maximize E[r(s_h, a_h)] for a reward known per pair.
class RegretMinimizer {
 public:
  virtual ~RegretMinimizer() = default;
  virtual std::string name() const = 0;
  /// Up to K episodes (fewer if the budget runs out); step-h transitions go to `out`.
  /// Returns the number of episodes played.
  virtual int run(Environment& env, int h, const Vec& reward, int K, Rng& rng, StepData& out) = 0;
};

/// UCB1 treating each deterministic policy (truncated after step h, restricted
/// to structurally reachable states) as an arm. State is reset per call and the
/// arm order is shuffled.
class UcbPolicyArms : public RegretMinimizer {
 public:
  explicit UcbPolicyArms(std::int64_t max_arms = 100'000) : max_arms_(max_arms) {}
  std::string name() const override { return "ucb"; }
  int run(Environment& env, int h, const Vec& reward, int K, Rng& rng, StepData& out) override;

 private:
  const std::vector<PolicyTable>& arms(const LinearMdp& mdp, int h);
  std::int64_t max_arms_;
  const LinearMdp* cached_for_ = nullptr;
  std::vector<std::vector<PolicyTable>> arms_;
};

/// Plans against the true dynamics and replays the best response. For
/// convergence checks only: it reads the model.
class OraclePlanner : public RegretMinimizer {
 public:
  std::string name() const override { return "oracle"; }
  int run(Environment& env, int h, const Vec& reward, int K, Rng& rng, StepData& out) override;
};

std::unique_ptr<RegretMinimizer> make_regret_minimizer(const std::string& name);

struct DesignTraceRow {
  int round = 0;
  int t = 0;
  double f_value = 0.0;
  std::int64_t episodes = 0;
};

struct FwRegretResult {
  Mat lambda;  // Λ_{T+1}
  StepData data;
  std::int64_t episodes = 0;
  bool capped = false;
  std::vector<double> f_values;  // f(Λ_t), t = 1..T+1
  std::vector<Mat> gammas;       // K⁻¹Γ_t when recording
  std::vector<Mat> iterates;     // Λ_t when recording
};

/// Frank-Wolfe with γ_t = 1/(t+1), the linear step solved by a regret
/// minimizer on reward φᵀΞφ/λ_max(Ξ), Ξ = −∇f. Warm-up plays uniform actions.
FwRegretResult fw_regret(Environment& env, int h, const DesignObjective& obj, int T, int K,
                         RegretMinimizer& regmin, Rng& rng, bool record = false);

struct OptCovOptions {
  double lambda_reg = 0.0;
  bool bootstrap = false;
  /// Orthonormal basis for the λ_min clause; null means the full space.
  const Mat* basis = nullptr;
  int max_rounds = 20;  // round i plays 4^i episodes
  bool record_trace = false;
};

struct OptCovResult {
  Mat sigma;    // Σ̂ of the terminal round
  Mat lambda0;  // Λ_{0,î}
  StepData data;  // terminal round plus conditioning data
  std::int64_t episodes = 0;  // all rounds
  int rounds = 0;
  double f_value = 0.0;
  double max_coverage = 0.0;  // max_φ ‖φ‖²_{(Σ̂+Λ_0+Λ_off)⁻¹}
  double lambda_min = 0.0;    // of Σ̂+Λ_0+Λ_off (on the basis when given)
  bool terminated = false;
  bool capped = false;
  std::vector<DesignTraceRow> trace;
};

/// Doubling rounds i: T_i = K_i = 2^i, η_i = 2^{2i/5}, stop when
/// f_i(Σ̂/N) ≤ N·ε_exp and λ_min(Σ̂+Λ_0+Λ_off) ≥ λ̲.
OptCovResult opt_cov(Environment& env, int h, const Mat& targets, double eps_exp, double delta,
                     double lambda_floor, const Mat& lambda_off, RegretMinimizer& regmin, Rng& rng,
                     const OptCovOptions& opts = {});

struct ConditionedCovResult {
  Mat lambda0;  // collected covariates + λ_reg I
  StepData data;
  std::int64_t episodes = 0;
  bool capped = false;
};

/// Basis-target design guaranteeing λ_min(Λ_0 + Λ_off) ≥ max{λ̲, r log(1/δ)} on the
/// basis (r columns) through the trace bound. λ̲ = 0 plays a two-episode warm-up only.
ConditionedCovResult conditioned_cov(Environment& env, int h, double delta, double lambda_floor,
                                     RegretMinimizer& regmin, Rng& rng, double lambda_reg,
                                     const Mat* basis = nullptr, const Mat* lambda_off = nullptr);

}  // namespace lmdp
