#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lmdp/design.hpp"
#include "lmdp/offline.hpp"
#include "lmdp/visitation.hpp"

namespace lmdp {

struct FtpedelOptions {
  /// Multiplies β_ℓ; 1 keeps the theoretical threshold.
  double beta_scale = 1.0;
  std::string regmin = "ucb";
  bool bootstrap = false;
  /// Design targets from exact profiles instead of estimates (debugging only).
  bool oracle_targets = false;
  std::int64_t global_cap = std::int64_t{1} << 30;
};

/// One (ℓ, h) exploration step.
struct EpochDiagnostic {
  int call = 0;  // outer iteration i (0 when running SE directly)
  int epoch = 0;
  int h = 0;     // 1-based
  std::size_t active = 0;
  std::int64_t episodes = 0;
  double f_value = 0.0;
  double coverage_ratio = 0.0;  // max_π ‖φ̂‖²_{M⁻¹} / (ε_ℓ²/β_ℓ)
  std::size_t eliminated = 0;
  bool terminated = false;  // opt_cov met its targets (ratio ≤ 1 then)
};

struct EpochRecord {
  int epoch = 0;
  double eps = 0.0;
  double beta = 0.0;
  std::vector<std::size_t> active;  // before elimination
  std::vector<double> values;       // V̂ for `active`
};

struct SeResult {
  std::optional<std::size_t> policy;  // index into the class
  std::int64_t online_episodes = 0;
  bool budget_exit = false;
  std::vector<std::size_t> survivors;
  std::vector<EpochDiagnostic> diagnostics;
  std::vector<EpochRecord> epochs;
};

struct FtpedelResult {
  std::size_t policy = 0;
  std::int64_t online_episodes = 0;
  int calls = 0;
  int epochs = 0;  // epochs run by the successful call
  std::vector<EpochDiagnostic> diagnostics;
  std::vector<EpochRecord> epochs_detail;  // successful call only
};

double beta_epoch(int H, int d, double T_off, double T_bar, std::size_t num_policies, int epoch,
                  double delta);

int num_epochs(double epsilon);

/// Offline records at each step, aggregated.
std::vector<StepData> aggregate_by_step(const OfflineDataset& data, const LinearMdp& mdp);

/// Largest per-step record count (episodes for trajectory data).
double offline_size(const OfflineDataset& data, const LinearMdp& mdp);

/// θ̂ = M⁻¹ Σ φ r.
Vec estimate_reward(const StepData& data, const Mat& M, const LinearMdp& mdp);

/// φ̂_{π,h+1} = (Σ φ_{π,h+1}(s') φ(s,a)ᵀ) M⁻¹ φ̂_{π,h}.
Vec propagate_visitation(const StepData& data, const Mat& M_inv, const PolicyTable& policy,
                         const Vec& phi_h, const LinearMdp& mdp, int h);

/// Positions of `values` retained: V̂ ≥ max V̂ − 2ε_ℓ.
std::vector<std::size_t> eliminate(const std::vector<double>& values, double eps_l);

/// Called after each epoch with that epoch's record and the surviving class
/// indices; returning true ends the run.
using EpochHook = std::function<bool(const EpochRecord&, const std::vector<std::size_t>& survivors)>;

/// Epoch loop shared by FTPedel-SE and policy verification. Stops when one
/// policy survives or the hook asks to; the result names the best survivor.
SeResult run_elimination(Environment& env, double epsilon, double delta, const PolicyClass& cls,
                         std::int64_t online_budget, const OfflineDataset& offline, Rng& rng,
                         const FtpedelOptions& opts, const EpochHook& hook);

SeResult ftpedel_se(Environment& env, double epsilon, double delta, const PolicyClass& cls,
                    std::int64_t online_budget, const OfflineDataset& offline, Rng& rng,
                    const FtpedelOptions& opts = {});

FtpedelResult ftpedel(Environment& env, double epsilon, double delta, const PolicyClass& cls,
                      const OfflineDataset& offline, Rng& rng, const FtpedelOptions& opts = {});

}  // namespace lmdp
