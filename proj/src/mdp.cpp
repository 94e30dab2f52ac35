#include "lmdp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lmdp/errors.hpp"

namespace lmdp {

namespace {

std::string at(int h, int s, int a) {
  std::ostringstream os;
  os << "(h=" << h + 1 << ", s=" << s << ", a=" << a << ")";
  return os.str();
}

}  // namespace

LinearMdp::LinearMdp(int num_states, int num_actions, int horizon, Mat features,
                     std::vector<Mat> transitions, std::vector<Vec> theta, NoiseModel noise,
                     int initial_state)
    : S_(num_states),
      A_(num_actions),
      H_(horizon),
      s1_(initial_state),
      features_(std::move(features)),
      transitions_(std::move(transitions)),
      theta_(std::move(theta)),
      noise_(noise) {
  if (S_ <= 0 || A_ <= 0 || H_ <= 0) throw DimensionError("S, A and H must be positive");
  if (features_.rows() <= 0) throw DimensionError("feature dimension must be positive");
  if (features_.cols() != static_cast<Eigen::Index>(S_) * A_) {
    std::ostringstream os;
    os << "features have " << features_.cols() << " columns, expected S*A = " << S_ * A_;
    throw DimensionError(os.str());
  }
  if (static_cast<int>(transitions_.size()) != H_ - 1) {
    std::ostringstream os;
    os << "expected H-1 = " << H_ - 1 << " transition matrices, got " << transitions_.size();
    throw DimensionError(os.str());
  }
  for (const Mat& p : transitions_)
    if (p.rows() != static_cast<Eigen::Index>(S_) * A_ || p.cols() != S_)
      throw DimensionError("each transition matrix must be (S*A) x S");
  if (static_cast<int>(theta_.size()) != H_)
    throw DimensionError("expected H reward vectors theta_h");
  for (const Vec& t : theta_)
    if (t.size() != features_.rows()) throw DimensionError("theta_h length must equal d");
  if (s1_ < 0 || s1_ >= S_) throw DimensionError("initial state out of range");
  if (noise_.sigma < 0) throw ValidationError("noise sigma must be nonnegative");

  mean_rewards_.reserve(H_);
  for (int h = 0; h < H_; ++h) mean_rewards_.push_back(features_.transpose() * theta_[h]);
}

double LinearMdp::sample_reward(int h, int s, int a, Rng& rng) const {
  const double mean = std::clamp(mean_reward(h, s, a), 0.0, 1.0);
  if (noise_.kind == NoiseModel::Kind::bernoulli) return rng.uniform() < mean ? 1.0 : 0.0;
  if (noise_.sigma == 0.0) return mean;
  return std::clamp(mean + noise_.sigma * rng.normal(), 0.0, 1.0);
}

int LinearMdp::sample_next_state(int h, int s, int a, Rng& rng) const {
  if (h >= H_ - 1) return terminal();
  const Mat& p = transitions_[h];
  const int row = pair(s, a);
  // Inverse-CDF over a strided row (Eigen is column-major).
  double u = rng.uniform();
  int last_positive = 0;
  for (int sp = 0; sp < S_; ++sp) {
    const double w = p(row, sp);
    if (w > 0) last_positive = sp;
    u -= w;
    if (u < 0.0) return sp;
  }
  return last_positive;
}

ValidationReport validate(const LinearMdp& mdp) {
  ValidationReport rep;
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon(), d = mdp.dim();
  auto issue = [&](const std::string& msg) { rep.issues.push_back(msg); };

  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const double n = mdp.feature(s, a).norm();
      if (n > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "feature norm " << n << " > 1 at (s=" << s << ", a=" << a << ")";
        issue(os.str());
      }
    }

  for (int h = 0; h + 1 < H; ++h) {
    const Mat& p = mdp.transition(h);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const auto row = p.row(mdp.pair(s, a));
        if (row.minCoeff() < 0.0) issue("negative transition probability at " + at(h, s, a));
        const double sum = row.sum();
        if (std::abs(sum - 1.0) > 1e-12) {
          std::ostringstream os;
          os << "transition row sums to " << sum << " at " << at(h, s, a);
          issue(os.str());
        }
      }
  }

  for (int h = 0; h < H; ++h) {
    if (mdp.theta(h).norm() > std::sqrt(static_cast<double>(d)) + 1e-12) {
      std::ostringstream os;
      os << "||theta_h|| = " << mdp.theta(h).norm() << " exceeds sqrt(d) at h=" << h + 1;
      issue(os.str());
    }
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const double m = mdp.mean_reward(h, s, a);
        if (m < -1e-12 || m > 1.0 + 1e-12) {
          std::ostringstream os;
          os << "mean reward " << m << " outside [0,1] at " << at(h, s, a);
          issue(os.str());
        }
      }
  }

  // Least-squares μ̂_h with Φᵀ μ̂_h ≈ P_h, Φᵀ being (S*A) x d.
  if (H > 1) {
    const Mat design = mdp.features().transpose();
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(design);
    for (int h = 0; h + 1 < H; ++h) {
      const Mat& p = mdp.transition(h);
      const Mat mu = cod.solve(p);
      rep.linearity_residual =
          std::max(rep.linearity_residual, (design * mu - p).cwiseAbs().maxCoeff());
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------

Policy Policy::uniform(const LinearMdp& mdp) {
  StochasticPolicy p;
  const Mat u = Mat::Constant(mdp.num_states(), mdp.num_actions(), 1.0 / mdp.num_actions());
  p.probs.assign(mdp.horizon(), u);
  return Policy(std::move(p));
}

std::string Policy::kind() const {
  switch (rep_.index()) {
    case 0: return "deterministic";
    case 1: return "stochastic";
    case 2: return "softmax";
    default: return "mixture";
  }
}

void Policy::check(const LinearMdp& mdp) const {
  const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DeterministicPolicy>) {
          if (static_cast<int>(p.actions.size()) != H)
            throw DimensionError("deterministic policy needs H action tables");
          for (const auto& row : p.actions) {
            if (static_cast<int>(row.size()) != S)
              throw DimensionError("deterministic policy table must have S entries per step");
            for (int a : row)
              if (a < 0 || a >= A) throw DimensionError("deterministic policy action out of range");
          }
        } else if constexpr (std::is_same_v<T, StochasticPolicy>) {
          if (static_cast<int>(p.probs.size()) != H)
            throw DimensionError("stochastic policy needs H probability tables");
          for (const Mat& m : p.probs) {
            if (m.rows() != S || m.cols() != A)
              throw DimensionError("stochastic policy tables must be S x A");
            if (m.minCoeff() < 0.0) throw ValidationError("negative action probability");
            for (int s = 0; s < S; ++s)
              if (std::abs(m.row(s).sum() - 1.0) > 1e-12)
                throw ValidationError("action probabilities must sum to 1 within 1e-12");
          }
        } else if constexpr (std::is_same_v<T, SoftmaxPolicy>) {
          if (static_cast<int>(p.weights.size()) != H)
            throw DimensionError("softmax policy needs H weight vectors");
          for (const Vec& w : p.weights)
            if (w.size() != mdp.dim()) throw DimensionError("softmax weight length must equal d");
          if (!(p.temperature > 0.0)) throw ValidationError("softmax temperature must be positive");
        } else {
          if (p.members.empty() || p.members.size() != p.weights.size())
            throw DimensionError("mixture needs one weight per member");
          double total = 0.0;
          for (double w : p.weights) {
            if (w < 0.0) throw ValidationError("mixture weights must be nonnegative");
            total += w;
          }
          if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
          for (const Policy& m : p.members) m.check(mdp);
        }
      },
      rep_);
}

void Policy::action_probs(const LinearMdp& mdp, int h, int s, std::span<double> out) const {
  const int A = mdp.num_actions();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DeterministicPolicy>) {
          std::fill(out.begin(), out.end(), 0.0);
          out[p.actions[h][s]] = 1.0;
        } else if constexpr (std::is_same_v<T, StochasticPolicy>) {
          for (int a = 0; a < A; ++a) out[a] = p.probs[h](s, a);
        } else if constexpr (std::is_same_v<T, SoftmaxPolicy>) {
          double top = -std::numeric_limits<double>::infinity();
          for (int a = 0; a < A; ++a) {
            out[a] = p.temperature * mdp.feature(s, a).dot(p.weights[h]);
            top = std::max(top, out[a]);
          }
          double z = 0.0;
          for (int a = 0; a < A; ++a) z += (out[a] = std::exp(out[a] - top));
          for (int a = 0; a < A; ++a) out[a] /= z;
        } else {
          throw ValidationError("mixture policies have no per-state action law; use the members");
        }
      },
      rep_);
}

PolicyTable Policy::tabulate(const LinearMdp& mdp) const {
  PolicyTable t;
  t.S = mdp.num_states();
  t.A = mdp.num_actions();
  t.H = mdp.horizon();
  t.probs.assign(static_cast<std::size_t>(t.H) * t.S * t.A, 0.0);
  t.action.assign(static_cast<std::size_t>(t.H) * t.S, -1);
  for (int h = 0; h < t.H; ++h)
    for (int s = 0; s < t.S; ++s) {
      double* row = t.probs.data() + (static_cast<std::size_t>(h) * t.S + s) * t.A;
      action_probs(mdp, h, s, {row, static_cast<std::size_t>(t.A)});
      for (int a = 0; a < t.A; ++a)
        if (row[a] == 1.0) t.action[static_cast<std::size_t>(h) * t.S + s] = a;
    }
  return t;
}

bool Policy::operator==(const Policy& other) const {
  if (rep_.index() != other.rep_.index()) return false;
  return std::visit(
      [&](const auto& p) -> bool {
        using T = std::decay_t<decltype(p)>;
        const auto& q = std::get<T>(other.rep_);
        if constexpr (std::is_same_v<T, DeterministicPolicy>) {
          return p.actions == q.actions;
        } else if constexpr (std::is_same_v<T, StochasticPolicy>) {
          if (p.probs.size() != q.probs.size()) return false;
          for (std::size_t i = 0; i < p.probs.size(); ++i)
            if (p.probs[i].rows() != q.probs[i].rows() || p.probs[i].cols() != q.probs[i].cols() ||
                p.probs[i] != q.probs[i])
              return false;
          return true;
        } else if constexpr (std::is_same_v<T, SoftmaxPolicy>) {
          if (p.temperature != q.temperature || p.weights.size() != q.weights.size()) return false;
          for (std::size_t i = 0; i < p.weights.size(); ++i)
            if (p.weights[i].size() != q.weights[i].size() || p.weights[i] != q.weights[i])
              return false;
          return true;
        } else {
          return p.weights == q.weights && p.members == q.members;
        }
      },
      rep_);
}

Vec mean_feature(const LinearMdp& mdp, const PolicyTable& table, int h, int s) {
  Vec out = Vec::Zero(mdp.dim());
  const auto row = table.row(h, s);
  for (int a = 0; a < mdp.num_actions(); ++a)
    if (row[a] != 0.0) out.noalias() += row[a] * mdp.feature(s, a);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void flatten(const Policy& p, double w, std::vector<double>& weights, std::vector<const Policy*>& leaves) {
  if (const auto* m = p.mixture()) {
    for (std::size_t i = 0; i < m->members.size(); ++i)
      flatten(m->members[i], w * m->weights[i], weights, leaves);
  } else {
    weights.push_back(w);
    leaves.push_back(&p);
  }
}

}  // namespace

EpisodeSampler::EpisodeSampler(const LinearMdp& mdp, const Policy& policy) : mdp_(&mdp) {
  policy.check(mdp);
  std::vector<const Policy*> leaves;
  flatten(policy, 1.0, weights_, leaves);
  tables_.reserve(leaves.size());
  for (const Policy* p : leaves) tables_.push_back(p->tabulate(mdp));
}

void EpisodeSampler::sample_into(Rng& rng, std::vector<Transition>& out) const {
  const LinearMdp& m = *mdp_;
  const int H = m.horizon();
  const PolicyTable& t = tables_.size() == 1 ? tables_[0] : tables_[rng.categorical(weights_)];
  out.resize(H);
  int s = m.initial_state();
  for (int h = 0; h < H; ++h) {
    const int a = t.sample(h, s, rng);
    const double r = m.sample_reward(h, s, a, rng);
    const int sp = m.sample_next_state(h, s, a, rng);
    out[h] = {h, s, a, r, sp};
    s = sp;
  }
}

Trajectory EpisodeSampler::sample(Rng& rng) const {
  Trajectory tr;
  sample_into(rng, tr.steps);
  return tr;
}

Trajectory sample_episode(const LinearMdp& mdp, const Policy& policy, Rng& rng) {
  return EpisodeSampler(mdp, policy).sample(rng);
}

std::optional<Transition> Environment::play_through(const PolicyTable& table, int step, Rng& rng) {
  if (exhausted()) return std::nullopt;
  ++episodes_;
  const LinearMdp& m = *mdp_;
  int s = m.initial_state();
  for (int h = 0; h < step; ++h) s = m.sample_next_state(h, s, table.sample(h, s, rng), rng);
  const int a = table.sample(step, s, rng);
  const double r = m.sample_reward(step, s, a, rng);
  const int sp = m.sample_next_state(step, s, a, rng);
  return Transition{step, s, a, r, sp};
}

std::optional<Trajectory> Environment::play(const EpisodeSampler& sampler, Rng& rng) {
  if (exhausted()) return std::nullopt;
  ++episodes_;
  return sampler.sample(rng);
}

}  // namespace lmdp
