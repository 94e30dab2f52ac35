#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lmdp/mdp.hpp"

namespace lmdp {

struct VisitationProfile {
  std::vector<Vec> state_action;  // [h] w_h over pairs s*A + a
  std::vector<Vec> feature;       // [h] φ_{π,h}
  std::vector<Mat> covariance;    // [h] Λ_{π,h}; empty when not requested
  double value = 0.0;             // Σ_h ⟨φ_{π,h}, θ_h⟩
};

/// Forward DP. Mixtures combine their members' profiles linearly.
VisitationProfile exact_profile(const LinearMdp& mdp, const Policy& policy, bool with_covariance = true);

/// Profiles for a batch of policies; OpenMP-parallel over policies.
std::vector<VisitationProfile> exact_profiles(const LinearMdp& mdp, std::span<const Policy> policies,
                                              bool with_covariance = true);
std::vector<VisitationProfile> exact_profiles_serial(const LinearMdp& mdp,
                                                     std::span<const Policy> policies,
                                                     bool with_covariance = true);

/// V_0^π by backward value iteration; independent of the forward DP.
double dp_value(const LinearMdp& mdp, const Policy& policy);

struct OptimalPolicy {
  DeterministicPolicy policy;
  double value = 0.0;
};

/// Optimal Markov policy over all policies (backward DP, ties to lowest action).
OptimalPolicy solve_optimal(const LinearMdp& mdp);

struct PolicyClass {
  std::vector<Policy> members;
  std::string label = "explicit";
  std::size_t size() const { return members.size(); }
};

struct EnumerateOptions {
  std::int64_t cap = 1'000'000;
  /// Vary actions only at structurally reachable (h, s); elsewhere action 0.
  bool prune_unreachable = false;
};

PolicyClass enumerate_det_policies(const LinearMdp& mdp, const EnumerateOptions& opts = {});

/// Cartesian product of per-step weight choices; grid[h] lists candidates for w_h.
PolicyClass softmax_grid(const LinearMdp& mdp, double temperature,
                         const std::vector<std::vector<Vec>>& grid, std::int64_t cap = 1'000'000);

/// reachable[h][s]: some action sequence reaches s at step h with positive probability.
std::vector<std::vector<bool>> reachable_states(const LinearMdp& mdp);

/// Orthonormal basis of span{φ(s,a) : s reachable at h, any a}. Every Λ_{π,h}
/// has its range inside this subspace.
Mat reachable_feature_basis(const LinearMdp& mdp, int h);

/// Deterministic policy maximizing E[r(s_h, a_h)] for a reward placed at step h
/// only (reward indexed by pair). Actions after h are 0.
OptimalPolicy plan_step_reward(const LinearMdp& mdp, int h, const Vec& reward);

struct BestResponse {
  DeterministicPolicy policy;
  Mat covariance;  // Λ_{π,h}
  double value = 0.0;  // tr(G Λ_{π,h})
};

/// Linear maximization oracle over Ω_h: argmax_π tr(G Λ_{π,h}).
BestResponse covariance_best_response(const LinearMdp& mdp, int h, const Mat& G);

/// Λ_{π,h} for a single step, cheaper than a full profile.
Mat step_covariance(const LinearMdp& mdp, const Policy& policy, int h);

struct MaxMinEigResult {
  std::vector<DeterministicPolicy> atoms;
  std::vector<double> weights;
  Mat covariance;
  double lambda_min = 0.0;
  /// False when λ̂_min is numerically zero (full-rank covariates fail at this step).
  bool full_rank = false;
};

/// Frank-Wolfe on λ_min over conv{Λ_{π,h}}. With a basis, λ_min is measured on
/// that subspace (basisᵀ Λ basis).
MaxMinEigResult max_min_eig(const LinearMdp& mdp, int h, int iters, const Mat* basis = nullptr);

struct MonteCarloProfile {
  std::int64_t episodes = 0;
  std::vector<Vec> feature_mean;  // [h]
  std::vector<Vec> feature_se;    // [h] standard error per component
  std::vector<Vec> state_action;  // [h] empirical visitation frequencies
  double value_mean = 0.0;
  double value_se = 0.0;
};

/// Rollout estimate. Chunk c of `chunk` episodes uses Rng(seed).split(c), and
/// partial sums merge in chunk order, so the result is independent of threads.
MonteCarloProfile monte_carlo_profile(const LinearMdp& mdp, const Policy& policy, std::int64_t episodes,
                                      std::uint64_t seed, std::int64_t chunk = 4096);
MonteCarloProfile monte_carlo_profile_serial(const LinearMdp& mdp, const Policy& policy,
                                             std::int64_t episodes, std::uint64_t seed,
                                             std::int64_t chunk = 4096);

}  // namespace lmdp
