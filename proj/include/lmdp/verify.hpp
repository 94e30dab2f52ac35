#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lmdp/ftpedel.hpp"

namespace lmdp {

/// Outcome of the two offline coverage checks at one (epoch, step).
struct StepCheck {
  int epoch = 0;
  int h = 0;  // 1-based
  bool clause_a = false;  // max ‖φ̂‖²_{(Λ_off+I/d)⁻¹} ≤ ε_ℓ²/β_ℓ
  bool clause_b = false;  // λ_min(Λ_off) ≥ log(4H²|Π|ℓ²/δ)
  double max_coverage = 0.0;
  double threshold_a = 0.0;
  std::size_t worst_policy = 0;
  double lambda_min = 0.0;
  double threshold_b = 0.0;
  Vec weak_direction;  // eigenvector attaining lambda_min, in feature space
};

struct CoverageReport {
  std::vector<StepCheck> checks;  // all steps of every epoch examined
  bool passed = false;
  /// First failing check, if any.
  std::optional<std::size_t> first_failure;
};

struct OfflineVerifyResult {
  std::optional<std::size_t> policy;
  CoverageReport report;
  std::vector<EpochRecord> epochs;
};

/// Estimates once from the offline data (ridge 1/d), then eliminates epoch by
/// epoch; any failed coverage check returns no policy.
OfflineVerifyResult offline_verify(const OfflineDataset& offline, const LinearMdp& mdp,
                                   const PolicyClass& cls, double epsilon, double delta,
                                   double beta_scale = 1.0);

struct StepMargin {
  int h = 0;  // 1-based
  double max_ratio = 0.0;  // max_π ‖φ_{π,h}‖²_{Λ⁻¹} / (gap² ∨ ε²)
  std::size_t worst_policy = 0;
  double lambda_min = 0.0;  // raw Λ_off on the reachable subspace
  bool ratio_ok = false;    // max_ratio ≤ 1/β
  bool eig_ok = false;      // lambda_min ≥ d²β/H²
};

struct VerifiabilityCheck {
  double beta = 0.0;
  std::vector<StepMargin> steps;
  bool ratio_ok = false;
  bool eig_ok = false;  // reported separately; the constant may be loose
  bool ok() const { return ratio_ok && eig_ok; }
};

/// β = dH⁵(Σ log(e + x) over x ∈ {d, H, T_off, 1/ε, log(1/δ)}) + log(1/δ).
double verifiability_beta(int d, int H, double T_off, double epsilon, double delta);

/// Both clauses with exact profiles. Singular Λ_off is regularized by I/d in
/// the ratio clause. A positive `beta` overrides the formula.
VerifiabilityCheck check_verifiability_condition(const LinearMdp& mdp, const OfflineDataset& offline,
                                                 std::span<const VisitationProfile> profiles,
                                                 double epsilon, double delta, double beta = 0.0);

enum class VerifyOutcome { certified, refuted, budget_exhausted };
std::string to_string(VerifyOutcome o);

struct VerificationVerdict {
  VerifyOutcome outcome = VerifyOutcome::budget_exhausted;
  std::optional<std::size_t> witness;  // class index of the empirical best when refuted
  std::size_t candidate = 0;           // index of π̂ in the class used
  std::int64_t online_episodes = 0;
  double eps_ver = 0.0;
  int calls = 0;
  int epochs = 0;
};

/// Runs elimination over Π ∪ {π̂} with doubling budgets and stops as soon as
/// π̂ is certified (estimated gap + 2ε_ℓ ≤ ε, or π̂ alone or in the final
/// epoch) or eliminated. Indices refer to Π with π̂ appended unless π̂ ∈ Π.
VerificationVerdict verify_policy(Environment& env, const OfflineDataset& offline, const Policy& candidate,
                                  const PolicyClass& cls, double epsilon, double delta, Rng& rng,
                                  const FtpedelOptions& opts = {});

struct SoftmaxCover {
  PolicyClass cls;
  double spacing = 0.0;
  int points_per_axis = 0;
};

/// Uniform grid over [lo, hi]^d for every step's softmax weights, spacing at most
/// γ/(2η√H) so neighbouring policies' per-state mean features differ by ≤ γ.
SoftmaxCover cover_softmax_class(const LinearMdp& mdp, double eta, double lo, double hi, double gamma,
                                 std::int64_t cap = 1'000'000);

}  // namespace lmdp
