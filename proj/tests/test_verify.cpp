#include <doctest.h>

#include <cmath>

#include "lmdp/errors.hpp"
#include "lmdp/instances.hpp"
#include "lmdp/verify.hpp"

using namespace lmdp;

namespace {

OfflineDataset pulls(const std::vector<int>& per_arm) {
  OfflineDataset d;
  for (std::size_t a = 0; a < per_arm.size(); ++a)
    for (int k = 0; k < per_arm[a]; ++k) d.records.push_back({0, 0, static_cast<int>(a), 1.0, 1});
  return d;
}

Policy uniform_over(const PolicyClass& cls) {
  MixturePolicy mix;
  mix.members = cls.members;
  mix.weights.assign(cls.size(), 1.0 / cls.size());
  return Policy(std::move(mix));
}

}  // namespace

TEST_CASE("offline verification fails on logging data with a weak direction at (s_2, a_1/a_2)") {
  const InstanceBundle b = gen_separation(0.04, 1);
  const PolicyClass cls = enumerate_det_policies(b.mdp, {.prune_unreachable = true});
  Rng rng(3);
  const OfflineDataset data = generate_offline(b.mdp, *b.logging, 10000, rng);
  const OfflineVerifyResult r = offline_verify(data, b.mdp, cls, 0.05, 0.1);
  CHECK_FALSE(r.policy.has_value());
  CHECK_FALSE(r.report.passed);
  REQUIRE(r.report.first_failure.has_value());
  REQUIRE(r.report.checks.size() == 2);
  const StepCheck& h2 = r.report.checks[1];
  CHECK(h2.h == 2);
  CHECK_FALSE(h2.clause_b);
  CHECK(h2.lambda_min == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(h2.weak_direction.segment(6, 2).norm() == doctest::Approx(1.0));
  CHECK(r.report.checks[0].clause_b);
}

TEST_CASE("an empty dataset fails clause B at every step") {
  const InstanceBundle b = gen_separation(0.04, 2);
  const PolicyClass cls = enumerate_det_policies(b.mdp, {.prune_unreachable = true});
  const OfflineVerifyResult r = offline_verify({}, b.mdp, cls, 0.05, 0.1);
  CHECK_FALSE(r.policy.has_value());
  REQUIRE(r.report.checks.size() == 2);
  for (const StepCheck& c : r.report.checks) CHECK_FALSE(c.clause_b);
  CHECK(*r.report.first_failure == 0);
}

TEST_CASE("offline verification succeeds on rich uniform-mixture data") {
  const InstanceBundle b = gen_separation(0.04, 1);
  const PolicyClass cls = enumerate_det_policies(b.mdp, {.prune_unreachable = true});
  const auto profiles = exact_profiles(b.mdp, cls.members, false);
  const Policy mix = uniform_over(cls);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    const OfflineDataset data = generate_offline(b.mdp, mix, 1000000, rng);
    const OfflineVerifyResult r = offline_verify(data, b.mdp, cls, 0.05, 0.1, 0.01);
    REQUIRE(r.policy.has_value());
    CHECK(r.report.passed);
    CHECK(b.v_star - profiles[*r.policy].value <= 0.05);
  }
}

TEST_CASE("verifiability condition on the bandit") {
  const InstanceBundle b = gen_mab_verification(0.2, 2);
  const PolicyClass cls = enumerate_det_policies(b.mdp);
  const auto profiles = exact_profiles(b.mdp, cls.members);

  const VerifiabilityCheck arm1 = check_verifiability_condition(b.mdp, pulls({1000, 0}), profiles, 0.2, 0.1);
  CHECK_FALSE(arm1.ratio_ok);
  CHECK(arm1.steps[0].worst_policy == 1);
  CHECK_FALSE(arm1.eig_ok);

  const OfflineDataset rich = pulls({100000, 100000});
  const VerifiabilityCheck both = check_verifiability_condition(b.mdp, rich, profiles, 0.2, 0.1);
  CHECK(both.ok());
  CHECK(both.beta == doctest::Approx(verifiability_beta(2, 1, 200000, 0.2, 0.1)));

  const VerifiabilityCheck more = check_verifiability_condition(b.mdp, pulls({1000, 10}), profiles, 0.2, 0.1);
  const VerifiabilityCheck less = check_verifiability_condition(b.mdp, pulls({1000, 100}), profiles, 0.2, 0.1,
                                                                more.beta);
  CHECK(less.steps[0].max_ratio <= more.steps[0].max_ratio);
  CHECK(less.steps[0].lambda_min >= more.steps[0].lambda_min);
}

TEST_CASE("verifiability beta formula") {
  const double e = std::exp(1.0);
  const double iota = std::log(e + 4) + std::log(e + 2) + std::log(e + 100) + std::log(e + 10) +
                      std::log(e + std::log(20.0));
  CHECK(verifiability_beta(4, 2, 100, 0.1, 0.05) == doctest::Approx(4 * 32 * iota + std::log(20.0)));
}

TEST_CASE("policy verification certifies the best arm and refutes another") {
  const InstanceBundle b = gen_mab_verification(0.1, 4);
  const PolicyClass cls = enumerate_det_policies(b.mdp);
  const OfflineDataset offline = pulls({1000, 0, 0, 0});
  FtpedelOptions opts;
  opts.beta_scale = 0.01;
  {
    Environment env(b.mdp);
    Rng rng(1);
    const VerificationVerdict v = verify_policy(env, offline, constant_policy(b.mdp, 0), cls, 0.1, 0.1, rng, opts);
    CHECK(v.outcome == VerifyOutcome::certified);
    CHECK(v.candidate == 0);
    CHECK(v.online_episodes == env.episodes());
  }
  {
    Environment env(b.mdp);
    Rng rng(1);
    const VerificationVerdict v = verify_policy(env, offline, constant_policy(b.mdp, 2), cls, 0.1, 0.1, rng, opts);
    CHECK(v.outcome == VerifyOutcome::refuted);
    CHECK(v.candidate == 2);
    REQUIRE(v.witness.has_value());
    CHECK(*v.witness == 0);
  }
  {
    // A candidate outside the class is appended.
    StochasticPolicy half;
    half.probs = {Mat::Constant(1, 4, 0.25)};
    Environment env(b.mdp);
    Rng rng(2);
    const VerificationVerdict v = verify_policy(env, offline, Policy(half), cls, 0.1, 0.1, rng, opts);
    CHECK(v.candidate == 4);
    CHECK(v.outcome == VerifyOutcome::refuted);
  }
}

TEST_CASE("a vacuous tolerance certifies at once") {
  const InstanceBundle b = gen_mab_verification(0.1, 3);
  const PolicyClass cls = enumerate_det_policies(b.mdp);
  Environment env(b.mdp);
  Rng rng(5);
  FtpedelOptions opts;
  opts.beta_scale = 0.01;
  const VerificationVerdict v =
      verify_policy(env, pulls({5000, 5000, 5000}), constant_policy(b.mdp, 1), cls, 1.0, 0.1, rng, opts);
  CHECK(v.outcome == VerifyOutcome::certified);
}

TEST_CASE("verification reports an exhausted budget") {
  const InstanceBundle b = gen_mab_verification(0.1, 3);
  const PolicyClass cls = enumerate_det_policies(b.mdp);
  Environment env(b.mdp);
  Rng rng(5);
  FtpedelOptions opts;
  opts.global_cap = 16;
  const VerificationVerdict v = verify_policy(env, {}, constant_policy(b.mdp, 0), cls, 0.01, 0.1, rng, opts);
  CHECK(v.outcome == VerifyOutcome::budget_exhausted);
  CHECK(v.online_episodes <= 16);
  CHECK(to_string(v.outcome) == "budget_exhausted");
}

TEST_CASE("softmax cover arithmetic") {
  const LinearMdp m(1, 3, 1, Mat::Identity(2, 3) * 0.5 + Mat::Ones(2, 3) * 0.1, {}, {Vec::Constant(2, 0.5)});
  const SoftmaxCover c = cover_softmax_class(m, 1.0, -1, 1, 0.5);
  CHECK(c.spacing == doctest::Approx(0.25));
  CHECK(c.points_per_axis == 9);
  CHECK(c.cls.size() == 81);
  const SoftmaxCover one = cover_softmax_class(m, 1.0, -1, 1, 2.0);
  CHECK(one.cls.size() == 1);
  CHECK_THROWS_AS(cover_softmax_class(m, 1.0, -1, 1, 0.001, 1000), CapExceeded);
}

TEST_CASE("softmax cover: adjacent grid points have close mean features") {
  const double eta = 2.0, gamma = 0.4;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const InstanceBundle b = gen_random_tabular(3, 4, 2, seed, FeatureMode::random_unit, 3);
    const double spacing = gamma / (2 * eta * std::sqrt(2.0));  // H = 2
    Rng rng(seed);
    for (int trial = 0; trial < 20; ++trial) {
      Vec w(3);
      for (int j = 0; j < 3; ++j) w(j) = -1 + 2 * rng.uniform();
      Vec w2 = w;
      w2(static_cast<int>(rng.below(3))) += spacing;
      SoftmaxPolicy p{eta, {w, w}}, q{eta, {w2, w2}};
      const PolicyTable tp = Policy(p).tabulate(b.mdp), tq = Policy(q).tabulate(b.mdp);
      for (int h = 0; h < 2; ++h)
        for (int s = 0; s < 3; ++s)
          CHECK((mean_feature(b.mdp, tp, h, s) - mean_feature(b.mdp, tq, h, s)).norm() <= gamma);
    }
  }
}
