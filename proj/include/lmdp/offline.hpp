#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lmdp/mdp.hpp"
#include "lmdp/visitation.hpp"

namespace lmdp {

/// Step-tagged transition records. Records need not form full trajectories.
struct OfflineDataset {
  std::vector<Transition> records;
  std::string source_note;
  std::size_t size() const { return records.size(); }
};

/// Λ_off^h = Σ_{τ: h(τ)=h} φφᵀ + ridge·I.
struct StepCovariates {
  std::vector<Mat> lambda;
  double ridge = 0.0;
};

OfflineDataset generate_offline(const LinearMdp& mdp, const Policy& logging, std::int64_t episodes, Rng& rng);

/// Episode k is played with schedule[k % schedule.size()].
OfflineDataset generate_offline_scheduled(const LinearMdp& mdp, std::span<const Policy> schedule,
                                          std::int64_t episodes, Rng& rng);

StepCovariates offline_covariates(const OfflineDataset& data, const LinearMdp& mdp, double ridge);

/// C^π = Σ_h ‖φ_{π,h}‖_{(Λ_off^h)⁻¹}, with the pseudo-inverse for singular Λ;
/// +∞ when some φ_{π,h} leaves the covered subspace.
double concentrability(std::span<const Vec> feature_visitation, const StepCovariates& cov);

struct CoverageOptions {
  int fw_iters = 500;
  double rel_tol = 1e-6;
  /// Mirror-descent iterations re-weighting the discovered vertices after FW.
  int polish_iters = 400;
};

struct CoverageResult {
  double value = 0.0;
  std::vector<DeterministicPolicy> atoms;
  std::vector<double> weights;
  Mat covariance;             // Λ = Σ weights·Λ_{atom,h}; zero when T = 0
  std::size_t argmax = 0;     // index of the maximizing policy
  int iterations = 0;
};

/// C_o2o at step h: inf over Λ ∈ Ω_h of max_π ‖φ_{π,h}‖²_{(TΛ+Λ_off^h)⁻¹} / ((V* − V^π)² ∨ ε²),
/// with V* the best value within the supplied profiles.
CoverageResult c_o2o(const LinearMdp& mdp, const StepCovariates& cov,
                     std::span<const VisitationProfile> profiles, double epsilon, double T, int h,
                     const CoverageOptions& opts = {});

/// Smallest integer T with C_o2o ≤ 1/β; 0 when offline data already suffices.
std::int64_t t_o2o(const LinearMdp& mdp, const StepCovariates& cov,
                   std::span<const VisitationProfile> profiles, double epsilon, double beta, int h,
                   const CoverageOptions& opts = {}, std::int64_t cap = std::int64_t{1} << 40);

}  // namespace lmdp
