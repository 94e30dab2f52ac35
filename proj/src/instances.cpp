#include "lmdp/instances.hpp"

#include <cmath>
#include <sstream>

#include "lmdp/errors.hpp"

namespace lmdp {

void finalize_bundle(InstanceBundle& b) {
  const ValidationReport rep = validate(b.mdp);
  b.linearity_residual = rep.linearity_residual;
  if (!rep.ok()) {
    std::ostringstream os;
    os << b.name << " failed validation:";
    for (const auto& s : rep.issues) os << " " << s << ";";
    throw ValidationError(os.str());
  }
  const OptimalPolicy opt = solve_optimal(b.mdp);
  b.optimal = opt.policy;
  b.v_star = opt.value;
}

InstanceBundle gen_separation(double epsilon, int variant) {
  if (!(epsilon > 0 && epsilon <= 1.0 / 20)) throw ValidationError("separation instance needs 0 < eps <= 1/20");
  if (variant != 1 && variant != 2) throw ValidationError("variant must be 1 or 2");
  const int S = 3, A = 3, H = 2;
  const double p = std::sqrt(epsilon), gap = 6 * epsilon;
  auto idx = [](int s, int a) { return s * A + a; };

  Mat P = Mat::Zero(S * A, S);
  P(idx(0, 0), 1) = 1 - p;
  P(idx(0, 0), 2) = p;
  P(idx(0, 1), 1) = 1;
  P(idx(0, 2), 2) = 1;
  for (int s = 1; s < S; ++s)  // unreachable at step 0
    for (int a = 0; a < A; ++a) P(idx(s, a), s) = 1;

  Vec r0 = Vec::Zero(S * A), r1 = Vec::Zero(S * A);
  r0(idx(0, 0)) = 1;
  r1(idx(1, 0)) = 0.5 + gap;
  r1(idx(1, 1)) = r1(idx(1, 2)) = 0.5;
  r1(idx(2, variant - 1)) = 0.5;

  InstanceBundle b;
  b.name = "separation";
  b.mdp = LinearMdp(S, A, H, Mat::Identity(S * A, S * A), {P}, {r0, r1});
  b.params = {{"epsilon", epsilon}, {"p", p}, {"Delta", gap}, {"variant", variant},
              {"d", S * A}, {"H", H}};

  StochasticPolicy log;
  Mat uni = Mat::Constant(S, A, 1.0 / A);
  Mat last = uni;
  last.row(2) << 0, 0, 1;
  log.probs = {uni, last};
  b.logging = Policy(std::move(log));
  finalize_bundle(b);
  return b;
}

InstanceBundle gen_minimax(int d, int H, const Eigen::MatrixXi& signs, double mu, int grid_size) {
  if (d < 1 || H < 1) throw ValidationError("minimax instance needs d, H >= 1");
  if (signs.rows() != d || signs.cols() != H) throw DimensionError("signs must be d x H");
  if (!(mu > 0 && mu <= 1.0 / (20 * std::sqrt(static_cast<double>(d))) + 1e-15))
    throw ValidationError("minimax instance needs 0 < mu <= 1/(20 sqrt(d))");
  if (grid_size < 2 * d) throw ValidationError("action grid must hold at least 2d points");
  const double extra_max = d < 30 ? std::ldexp(1.0, d) : 1e9;
  if (grid_size - 2 * d > extra_max) throw ValidationError("action grid larger than 2d + 2^d");
  for (int i = 0; i < signs.size(); ++i)
    if (signs.data()[i] != 1 && signs.data()[i] != -1) throw ValidationError("signs must be +-1");

  std::vector<Vec> actions{Vec::Zero(d)};
  for (int j = 0; j < d; ++j) {
    actions.push_back(Vec::Unit(d, j));
    actions.push_back(-Vec::Unit(d, j));
  }
  for (std::int64_t pattern = 0; static_cast<int>(actions.size()) < grid_size + 1; ++pattern) {
    Vec a(d);
    for (int j = 0; j < d; ++j) a(j) = (pattern >> (d - 1 - j)) & 1 ? -1.0 : 1.0;
    actions.push_back(a / std::sqrt(static_cast<double>(d)));
  }
  const int A = static_cast<int>(actions.size());
  Mat F(d + 1, A);
  for (int a = 0; a < A; ++a) {
    F.col(a).head(d) = actions[a] / 2;
    F(d, a) = 0.5;
  }
  std::vector<Vec> theta;
  for (int h = 0; h < H; ++h) {
    Vec t(d + 1);
    t.head(d) = mu * signs.col(h).cast<double>();
    t(d) = 1;
    theta.push_back(t);
  }
  std::vector<Mat> P(H - 1, Mat::Ones(A, 1));

  InstanceBundle b;
  b.name = "minimax";
  b.mdp = LinearMdp(1, A, H, F, P, theta);
  b.params = {{"d", d}, {"H", H}, {"mu", mu}, {"grid_size", grid_size}};
  finalize_bundle(b);
  return b;
}

std::vector<Policy> minimax_offline_schedule(const InstanceBundle& minimax) {
  const LinearMdp& m = minimax.mdp;
  const int d = m.dim() - 1;
  std::vector<Policy> out;
  for (int j = 0; j < d; ++j) {
    out.push_back(constant_policy(m, 0));
    out.push_back(constant_policy(m, 1 + 2 * j));  // +e_j
  }
  return out;
}

InstanceBundle gen_mab_verification(double epsilon, int arms) {
  if (!(epsilon > 0 && epsilon < 1.0 / 3)) throw ValidationError("bandit instance needs 0 < eps < 1/3");
  if (arms < 2) throw ValidationError("bandit instance needs at least two arms");
  Vec means = Vec::Constant(arms, 1 - 3 * epsilon);
  means(0) = 1;
  InstanceBundle b;
  b.name = "mab";
  b.mdp = LinearMdp(1, arms, 1, Mat::Identity(arms, arms), {}, {means});
  b.params = {{"epsilon", epsilon}, {"A", arms}, {"d", arms}, {"H", 1}};
  finalize_bundle(b);
  return b;
}

InstanceBundle gen_random_tabular(int S, int A, int H, std::uint64_t seed, FeatureMode mode, int dim) {
  if (S < 1 || A < 1 || H < 1) throw ValidationError("sizes must be positive");
  if (S > 256 || A > 64 || H > 64) throw CapExceeded("random instance sizes capped at S<=256, A<=64, H<=64");
  if (mode == FeatureMode::random_unit && dim < 2) throw ValidationError("random_unit needs d >= 2");
  Rng rng(seed);
  const int SA = S * A;

  std::vector<Mat> P;
  for (int h = 0; h + 1 < H; ++h) {
    Mat p(SA, S);
    for (int i = 0; i < SA; ++i) {
      for (int s = 0; s < S; ++s) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        p(i, s) = -std::log(u);  // Gamma(1)
      }
      p.row(i) /= p.row(i).sum();
    }
    P.push_back(std::move(p));
  }

  Mat F;
  std::vector<Vec> theta;
  auto unit = [&](int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
    return Vec(v / v.norm());
  };
  if (mode == FeatureMode::basis) {
    F = Mat::Identity(SA, SA);
    for (int h = 0; h < H; ++h) {
      Vec t(SA);
      for (int i = 0; i < SA; ++i) t(i) = 0.1 + 0.8 * rng.uniform();
      theta.push_back(t);
    }
  } else {
    // φ = [u/√2, 1/√2], θ = [0.4√2 v, 0.5√2]: mean reward 0.4⟨u,v⟩ + 0.5.
    F.resize(dim, SA);
    for (int i = 0; i < SA; ++i) {
      F.col(i).head(dim - 1) = unit(dim - 1) * std::sqrt(0.5);
      F(dim - 1, i) = std::sqrt(0.5);
    }
    for (int h = 0; h < H; ++h) {
      Vec t(dim);
      t.head(dim - 1) = unit(dim - 1) * (0.4 * std::sqrt(2.0));
      t(dim - 1) = 0.5 * std::sqrt(2.0);
      theta.push_back(t);
    }
  }

  InstanceBundle b;
  b.name = mode == FeatureMode::basis ? "random_basis" : "random_unit";
  b.mdp = LinearMdp(S, A, H, F, P, theta);
  b.params = {{"S", S}, {"A", A}, {"H", H}, {"d", b.mdp.dim()}, {"seed", static_cast<double>(seed)}};
  finalize_bundle(b);
  b.approximate = !validate(b.mdp).exactly_linear(1e-9);
  return b;
}

Policy constant_policy(const LinearMdp& mdp, int action) {
  if (action < 0 || action >= mdp.num_actions()) throw DimensionError("action out of range");
  DeterministicPolicy p;
  p.actions.assign(mdp.horizon(), std::vector<int>(mdp.num_states(), action));
  return Policy(std::move(p));
}

}  // namespace lmdp
