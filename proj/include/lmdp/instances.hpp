#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lmdp/mdp.hpp"
#include "lmdp/visitation.hpp"

namespace lmdp {

struct InstanceBundle {
  std::string name;
  LinearMdp mdp;
  std::optional<Policy> logging;
  std::map<std::string, double> params;
  DeterministicPolicy optimal;
  double v_star = 0.0;
  double linearity_residual = 0.0;
  bool approximate = false;  // transitions only approximately linear in φ
};

/// Fills the ground-truth fields by exact DP and validates the model.
void finalize_bundle(InstanceBundle& b);

/// Three states, three actions, H = 2, basis features; p = √ε, Δ = 6ε.
/// variant ∈ {1, 2} chooses which action at s_2 pays 1/2.
InstanceBundle gen_separation(double epsilon, int variant);

/// One state, H steps, φ(a) = [a/2, 1/2] for a in {0} ∪ grid, θ̃_h = [μ·signs_h, 1].
/// The grid is ±e_j followed by normalized sign patterns up to `grid_size` points.
/// signs is d x H with entries ±1.
InstanceBundle gen_minimax(int d, int H, const Eigen::MatrixXi& signs, double mu, int grid_size);

/// Offline schedule whose 2d-cycle gives Λ_off^h = (T_off/8d)[[I, 1], [1ᵀ, 2d]]:
/// even episodes play action 0, odd episodes cycle through e_1..e_d.
std::vector<Policy> minimax_offline_schedule(const InstanceBundle& minimax);

/// Ex. 5.3 bandit: H = S = 1, A arms, basis features, means (1, 1−3ε, …).
InstanceBundle gen_mab_verification(double epsilon, int arms);

enum class FeatureMode { basis, random_unit };

/// Dirichlet(1) transition rows and mean rewards in [0.1, 0.9]. In random_unit
/// mode `dim` sets d and the transitions are generally not linear in φ.
InstanceBundle gen_random_tabular(int S, int A, int H, std::uint64_t seed, FeatureMode mode,
                                  int dim = 4);

/// Deterministic policy playing `action` everywhere.
Policy constant_policy(const LinearMdp& mdp, int action);

}  // namespace lmdp
