#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lmdp/linalg.hpp"
#include "lmdp/rng.hpp"

namespace lmdp {

// Steps are 0-based in the API (h = 0..H-1). Files use 1-based steps.

struct NoiseModel {
  enum class Kind { bernoulli, truncated_gaussian };
  Kind kind = Kind::bernoulli;
  double sigma = 0.0;
};

/// Episodic linear MDP with a tabular backend. Features are attached to
/// (state, action) pairs and shared across steps.
class LinearMdp {
 public:
  LinearMdp() = default;
  /// features: d x (S*A), column s*A + a.  transitions: H-1 matrices of shape (S*A) x S.
  LinearMdp(int num_states, int num_actions, int horizon, Mat features, std::vector<Mat> transitions,
            std::vector<Vec> theta, NoiseModel noise = {}, int initial_state = 0);

  int num_states() const { return S_; }
  int num_actions() const { return A_; }
  int horizon() const { return H_; }
  int dim() const { return static_cast<int>(features_.rows()); }
  int num_pairs() const { return S_ * A_; }
  int pair(int s, int a) const { return s * A_ + a; }
  int initial_state() const { return s1_; }
  /// Sentinel used as next state after the final step.
  int terminal() const { return S_; }

  const Mat& features() const { return features_; }
  auto feature(int s, int a) const { return features_.col(pair(s, a)); }
  const Mat& transition(int h) const { return transitions_.at(h); }
  const std::vector<Mat>& transitions() const { return transitions_; }
  const Vec& theta(int h) const { return theta_.at(h); }
  const std::vector<Vec>& thetas() const { return theta_; }
  const NoiseModel& noise() const { return noise_; }

  /// ⟨φ(s,a), θ_h⟩ for all pairs at step h.
  const Vec& mean_rewards(int h) const { return mean_rewards_.at(h); }
  double mean_reward(int h, int s, int a) const { return mean_rewards_[h](pair(s, a)); }

  double sample_reward(int h, int s, int a, Rng& rng) const;
  int sample_next_state(int h, int s, int a, Rng& rng) const;

 private:
  int S_ = 0;
  int A_ = 0;
  int H_ = 0;
  int s1_ = 0;
  Mat features_;
  std::vector<Mat> transitions_;
  std::vector<Vec> theta_;
  NoiseModel noise_;
  std::vector<Vec> mean_rewards_;
};

struct ValidationReport {
  std::vector<std::string> issues;
  /// Max-abs residual of the least-squares fit P_h(s'|s,a) ≈ ⟨φ(s,a), μ_h(s')⟩.
  double linearity_residual = 0.0;
  bool ok() const { return issues.empty(); }
  bool exactly_linear(double tol = 1e-9) const { return linearity_residual <= tol; }
};

ValidationReport validate(const LinearMdp& mdp);

// ---------------------------------------------------------------------------
// Policies

class Policy;

struct DeterministicPolicy {
  std::vector<std::vector<int>> actions;  // [h][s]
};

struct StochasticPolicy {
  std::vector<Mat> probs;  // [h], S x A, row-stochastic
};

struct SoftmaxPolicy {
  double temperature = 1.0;
  std::vector<Vec> weights;  // [h], length d
};

struct MixturePolicy {
  std::vector<double> weights;
  std::vector<Policy> members;
};

/// Action probabilities for a Markov policy, tabulated against one MDP.
struct PolicyTable {
  int S = 0;
  int A = 0;
  int H = 0;
  std::vector<double> probs;  // ((h*S) + s)*A + a
  std::vector<int> action;    // h*S + s -> action when deterministic there, else -1

  std::span<const double> row(int h, int s) const {
    return {probs.data() + (static_cast<std::size_t>(h) * S + s) * A, static_cast<std::size_t>(A)};
  }
  double prob(int h, int s, int a) const { return row(h, s)[a]; }
  int sample(int h, int s, Rng& rng) const {
    const int fixed = action[static_cast<std::size_t>(h) * S + s];
    return fixed >= 0 ? fixed : rng.categorical(row(h, s));
  }
};

class Policy {
 public:
  using Rep = std::variant<DeterministicPolicy, StochasticPolicy, SoftmaxPolicy, MixturePolicy>;

  Policy() = default;
  Policy(DeterministicPolicy p) : rep_(std::move(p)) {}
  Policy(StochasticPolicy p) : rep_(std::move(p)) {}
  Policy(SoftmaxPolicy p) : rep_(std::move(p)) {}
  Policy(MixturePolicy p) : rep_(std::move(p)) {}

  static Policy uniform(const LinearMdp& mdp);

  const Rep& rep() const { return rep_; }
  std::string kind() const;
  bool is_mixture() const { return std::holds_alternative<MixturePolicy>(rep_); }
  const DeterministicPolicy* deterministic() const { return std::get_if<DeterministicPolicy>(&rep_); }
  const MixturePolicy* mixture() const { return std::get_if<MixturePolicy>(&rep_); }

  /// π_h(·|s) into `out` (length A). Throws for mixtures, which have no
  /// per-state action law.
  void action_probs(const LinearMdp& mdp, int h, int s, std::span<double> out) const;

  /// Tabulated Markov policy; throws for mixtures.
  PolicyTable tabulate(const LinearMdp& mdp) const;

  /// Throws DimensionError / ValidationError when incompatible with mdp.
  void check(const LinearMdp& mdp) const;

  bool operator==(const Policy& other) const;

 private:
  Rep rep_;
};

/// Mean feature under the policy at state s and step h: E_{a~π_h(.|s)} φ(s,a).
Vec mean_feature(const LinearMdp& mdp, const PolicyTable& table, int h, int s);

// ---------------------------------------------------------------------------
// Episodes

struct Transition {
  int h = 0;
  int s = 0;
  int a = 0;
  double r = 0.0;
  int sp = 0;
  bool operator==(const Transition&) const = default;
};

struct Trajectory {
  std::vector<Transition> steps;
};

/// Pre-tabulated sampler; a mixture draws one member per episode.
class EpisodeSampler {
 public:
  EpisodeSampler(const LinearMdp& mdp, const Policy& policy);
  Trajectory sample(Rng& rng) const;
  /// Fills `out` (resized to H) without allocating per step.
  void sample_into(Rng& rng, std::vector<Transition>& out) const;

 private:
  const LinearMdp* mdp_;
  std::vector<double> weights_;
  std::vector<PolicyTable> tables_;
};

Trajectory sample_episode(const LinearMdp& mdp, const Policy& policy, Rng& rng);

/// Online access to an MDP with an episode budget. Every episode started
/// through this object is charged, including truncated ones.
class Environment {
 public:
  static constexpr std::int64_t kUnlimited = std::numeric_limits<std::int64_t>::max();

  explicit Environment(const LinearMdp& mdp, std::int64_t budget = kUnlimited)
      : mdp_(&mdp), budget_(budget) {}

  /// Full model. Only oracle components (planner, ground truth) may use the
  /// dynamics; learners use features and sizes.
  const LinearMdp& model() const { return *mdp_; }

  std::int64_t episodes() const { return episodes_; }
  std::int64_t budget() const { return budget_; }
  void set_budget(std::int64_t b) { budget_ = b; }
  bool exhausted() const { return episodes_ >= budget_; }

  /// Plays an episode until the step-`step` transition is observed and returns
  /// that transition; the unobserved remainder is not simulated.
  std::optional<Transition> play_through(const PolicyTable& table, int step, Rng& rng);

  std::optional<Trajectory> play(const EpisodeSampler& sampler, Rng& rng);

 private:
  const LinearMdp* mdp_;
  std::int64_t budget_;
  std::int64_t episodes_ = 0;
};

}  // namespace lmdp
