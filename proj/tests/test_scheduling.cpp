#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fpnet/scheduling.hpp"
#include "support.hpp"

using namespace fpnet;

namespace {

const ConditionCheck& condition(const ValidationReport& rep, const std::string& name) {
  for (const auto& c : rep.conditions)
    if (c.name == name) return c;
  FAIL("missing condition " << name);
  return rep.conditions.front();
}

TheoremInputs unit_instance() {
  TheoremInputs in;
  in.phi = 1.0;
  in.kappa = 1.0;
  in.alpha = 1.0;
  in.psi = 1.0;
  in.r = 1.0;
  in.n_agents = 4;
  in.d_bound = 1.0;
  return in;
}

}  // namespace

TEST_CASE("make_schedule: closed-form index sets") {
  const CommSchedule every = make_schedule(SchedulePolicy::every_step, 5);
  CHECK(every.indices == std::vector<long>{1, 2, 3, 4, 5});
  CHECK(every.max_gap() == 1);
  CHECK(every.h_max == 1);

  const CommSchedule fixed = make_schedule(SchedulePolicy::fixed_period, 10, 3);
  CHECK(fixed.indices == std::vector<long>{1, 4, 7, 10});
  CHECK(fixed.max_gap() == 3);
  CHECK(fixed.rounds() == 4);
  CHECK(fixed.communicates(4));
  CHECK_FALSE(fixed.communicates(5));
  CHECK_FALSE(fixed.communicates(0));
  CHECK_FALSE(fixed.communicates(11));

  const CommSchedule rnd = make_schedule(SchedulePolicy::random_gap, 20, 3, 1);
  CHECK(rnd.indices.front() == 1);
  for (std::size_t k = 1; k < rnd.indices.size(); ++k) {
    const long gap = rnd.indices[k] - rnd.indices[k - 1];
    CHECK(gap >= 1);
    CHECK(gap <= 3);
  }
  CHECK(make_schedule(SchedulePolicy::random_gap, 20, 3, 1).indices == rnd.indices);

  CHECK_THROWS_AS(make_schedule(SchedulePolicy::fixed_period, 10, 0), InvalidParameter);
  CHECK_THROWS_AS(make_schedule(SchedulePolicy::fixed_period, 0, 2), InvalidParameter);
}

TEST_CASE("property: schedules start at 1, stay within gap h and match their mask") {
  Rng rng = test::gen(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto policy = static_cast<SchedulePolicy>(test::uniform_int(rng, 0, 3));
    const long horizon = test::uniform_int(rng, 1, 3000);
    const int h = test::uniform_int(rng, 1, 20);
    const CommSchedule s = make_schedule(policy, horizon, h, rng());
    REQUIRE_FALSE(s.indices.empty());
    CHECK(s.indices.front() == 1);
    CHECK(s.max_gap() <= s.h_max);
    CHECK(s.indices.back() <= horizon);
    CHECK(horizon - s.indices.back() < s.h_max);
    long count = 0;
    for (long k = 0; k <= horizon; ++k) count += s.communicates(k) ? 1 : 0;
    CHECK(count == s.rounds());
    if (policy == SchedulePolicy::front_loaded)
      for (std::size_t k = 2; k < s.indices.size(); ++k)
        CHECK(s.indices[k] - s.indices[k - 1] >= s.indices[k - 1] - s.indices[k - 2]);
    if (policy == SchedulePolicy::fixed_period) CHECK(s.rounds() == (horizon - 1) / h + 1);
  }
}

TEST_CASE("step schedules") {
  const StepSchedule s{StepKind::inv_sqrt, 80.0, 0.8};
  CHECK(s.eta(20) == doctest::Approx(0.08).epsilon(1e-15));
  const StepSchedule l{StepKind::inv_linear, 500.0, 8.0};
  CHECK(l.eta(300) == doctest::Approx(0.01).epsilon(1e-15));
  const StepSchedule c{StepKind::constant, 1.0, 0.3};
  CHECK(c.eta(12345) == 0.3);
  CHECK_NOTHROW(validate_step_schedule(s));
  CHECK_THROWS_AS(validate_step_schedule({StepKind::inv_sqrt, 0.25, 0.8}), InvalidParameter);
  CHECK_THROWS_AS(validate_step_schedule({StepKind::inv_linear, -1.0, 0.8}), InvalidParameter);
  CHECK_THROWS_AS(validate_step_schedule({StepKind::constant, 1.0, 0.0}), InvalidParameter);
  CHECK_THROWS_AS(validate_step_schedule({StepKind::constant, 1.0, 1.0}), InvalidParameter);
}

TEST_CASE("gamma_upper_bound: unit instance gives 1/52") {
  CHECK(gamma_upper_bound(1.0, 1.0, 1.0, 1.0, 1.0) == doctest::Approx(1.0 / 52).epsilon(1e-15));
  // Second branch alone: (3/2) / (9/16) = 8/3 when psi r phi = 1.
  CHECK(gamma_upper_bound(1.0, 1.0, 1e-9, 1.0, 1.0) == doctest::Approx(8.0 / 3).epsilon(1e-6));
  double prev = 1.0;
  for (const double phi : {0.5, 0.1, 1e-2, 1e-4, 1e-8}) {
    const double g = gamma_upper_bound(phi, 1.0, 1.0, 1.0, 1.0 / phi);
    CHECK(g < prev);
    prev = g;
  }
  CHECK(prev < 1e-8);
  CHECK_THROWS_AS(gamma_upper_bound(0.0, 1.0, 1.0, 1.0, 1.0), InvalidParameter);
}

TEST_CASE("zeta1: grid oracle and limits") {
  const double gmax = gamma_upper_bound(1.0, 1.0, 1.0, 1.0, 1.0);
  const double g = 0.5 * gmax;
  // Independent evaluation of the two branches on the unit instance.
  const double first = 0.25 - 2.0 * 5.0 * g - 0.75 * 4.0 * g;
  const double second = 1.5 * g - 9.0 * g * g / 16.0;
  const double z = zeta1(g, 1.0, 1.0, 1.0, 1.0, 1.0);
  CHECK(z > 0.0);
  CHECK(z == doctest::Approx(std::min(first, second)).epsilon(1e-14));

  // 1e-6 grid over gamma in (0, gmax]: zeta1 stays positive and matches the closed form.
  for (double gg = 1e-6; gg <= gmax; gg += 1e-6 * 97) {
    const double f = 0.25 - 13.0 * gg, s = 1.5 * gg - 0.5625 * gg * gg;
    CHECK(zeta1(gg, 1.0, 1.0, 1.0, 1.0, 1.0) == doctest::Approx(std::min(f, s)).epsilon(1e-12));
  }

  // gamma -> 0+: the mixing branch goes to zero.
  const Zeta1Branches tiny = zeta1_branches(1e-12, 1.0, 1.0, 1.0, 1.0, 1.0);
  CHECK(tiny.first == doctest::Approx(0.25));
  CHECK(tiny.second == doctest::Approx(1.5e-12));

  try {
    zeta1(0.5, 1.0, 1.0, 1.0, 1.0, 1.0);
    FAIL("expected infeasible");
  } catch (const InfeasibleParameters& e) {
    CHECK(std::string(e.what()).find("compression branch") != std::string::npos);
    CHECK(e.code() == "infeasible-parameters");
  }
  try {
    zeta1(4.0, 1.0, 1.0, 1e-9, 1.0, 1.0);
    FAIL("expected infeasible");
  } catch (const InfeasibleParameters& e) {
    CHECK(std::string(e.what()).find("mixing branch") != std::string::npos);
  }
}

TEST_CASE("zeta2 and theorem constants: closed-form identities") {
  const double g = 0.01;
  const int n = 4;
  const double d = 1.5;
  // psi r phi = 1 zeroes the compression summand.
  const double z2 = zeta2(g, 1.0, 1.0, 1.0, 1.0, 1.0, n, d);
  const double kg = g;
  const double mixing = (1.0 + 4.0 / kg) *
                        (2.0 * g * g + 3.0 * (1.0 + kg / 4.0) *
                                           ((1.0 - kg + g) * (1.0 - kg + g) + g * g + (1.0 - kg) * (1.0 - kg))) *
                        n * d * d;
  CHECK(z2 == doctest::Approx(mixing).epsilon(1e-14));
  CHECK(zeta2(g, 0.5, 1.0, 1.0, 1.0, 1.0, n, d) > z2);

  const double z1 = 0.02;
  const double c1 = theorem1_constant(z1, z2, n, 1.0, 1.0, 0.0, d, 1);
  CHECK(c1 == doctest::Approx(16.0 * z2 / (z1 * z1) + 8.0 * n * d * d).epsilon(1e-14));
  CHECK(theorem2_constant(z1, z2, n, 1.0, 1.0, 0.0, d, 1) == doctest::Approx(2.0 * c1).epsilon(1e-14));
  const double c1h = theorem1_constant(z1, z2, n, 0.9, 1.1, 0.3, d, 3);
  CHECK(c1h == doctest::Approx((16.0 * z2 * 9 + 16.0 * n * 0.9 * 1.1 * 0.3) / (z1 * z1) + 8.0 * n * d * d * 9)
                   .epsilon(1e-14));
  CHECK_THROWS_AS(theorem1_constant(0.0, z2, n, 1.0, 1.0, 0.0, d, 1), InvalidParameter);
}

TEST_CASE("validate_theorem2: L = 1 fails on contractivity") {
  TheoremInputs in = unit_instance();
  in.gamma = 0.01;
  in.lipschitz = 1.0;
  in.a = 1e6;
  in.b = 100;
  const ValidationReport rep = validate_theorem2(in);
  CHECK(rep.status == Severity::fail);
  CHECK(condition(rep, "contractive_L").severity == Severity::fail);
  in.lipschitz = 0.5;
  CHECK(condition(validate_theorem2(in), "contractive_L").severity == Severity::pass);
}

TEST_CASE("validate_theorem1: a_offset threshold 4H/(3 zeta1)") {
  // phi = kappa = psi r = 1, alpha = 0.1: choose gamma on the mixing branch with zeta1 = 0.05.
  TheoremInputs in = unit_instance();
  in.alpha = 0.1;
  in.h_max = 3;
  in.gamma = (1.5 - std::sqrt(2.25 - 4.0 * 0.5625 * 0.05)) / (2.0 * 0.5625);
  CHECK(zeta1(in.gamma, 1.0, 1.0, 0.1, 1.0, 1.0) == doctest::Approx(0.05).epsilon(1e-12));
  in.b = 1e-3;
  in.a = 100;
  ValidationReport pass = validate_theorem1(in);
  CHECK(condition(pass, "a_offset").limit == doctest::Approx(80.0).epsilon(1e-10));
  CHECK(condition(pass, "a_offset").severity == Severity::pass);
  CHECK(pass.status == Severity::pass);
  in.a = 70;
  const ValidationReport warn = validate_theorem1(in);
  CHECK(condition(warn, "a_offset").severity == Severity::warn);
  CHECK(condition(warn, "a_offset").margin == doctest::Approx(-10.0).epsilon(1e-10));
  CHECK(warn.status == Severity::warn);
  CHECK(warn.to_text().find("condition name=a_offset") != std::string::npos);
}

TEST_CASE("validate_theorem1: admissible b vanishes as P -> 1") {
  TheoremInputs in = unit_instance();
  in.gamma = 0.01;
  in.a = 100;
  double prev = theorem1_max_b(in);
  for (const double p : {0.5, 0.9, 0.99, 0.999999}) {
    in.p_bias = p;
    const double b = theorem1_max_b(in);
    CHECK(b < prev);
    prev = b;
  }
  CHECK(prev < 1e-5);
  in.b = 0.01;
  CHECK(condition(validate_theorem1(in), "b_scale").margin < 0.0);
  in.p_bias = 1.0;
  CHECK(validate_theorem1(in).status == Severity::fail);
  in.p_bias = 0.0;
  in.b = 0.0;
  CHECK(condition(validate_theorem1(in), "b_positive").severity == Severity::fail);
  in.b = 0.01;
  in.gamma = 0.0;
  CHECK(validate_theorem1(in).status == Severity::fail);
}

TEST_CASE("lemma6: closed-form examples") {
  const Lemma6Report zero = lemma6_recursion_check(1.0, 0.0, 0.0, 2.0, 0.0, 1000);
  CHECK(zero.pass);
  CHECK(zero.final_value == 0.0);

  const Lemma6Report ex = lemma6_recursion_check(1.0, 1.0, 0.0, 2.0, 1.0, 10000, true);
  CHECK(ex.pass);
  CHECK(ex.first_violation == -1);
  // Independent iteration oracle.
  double psi = 1.0;
  for (long t = 0; t < 10000; ++t) {
    const double ta = t + 2.0;
    psi = (1.0 - 1.0 / ta) * psi + 1.0 / (ta * ta);
  }
  CHECK(ex.final_value == doctest::Approx(psi).epsilon(1e-12));
  CHECK(ex.values.size() == 10001u);

  const Lemma6Report drift = lemma6_recursion_check(2.0, 0.5, 0.1, 5.0, 0.3, 200000);
  CHECK(drift.pass);
  CHECK(drift.liminf_tail <= 2.0 * 0.1);

  CHECK_THROWS_AS(lemma6_recursion_check(0.5, 1.0, 0.0, 2.0, 1.0, 10), InvalidParameter);
  CHECK_THROWS_AS(lemma6_recursion_check(2.0, 1.0, 0.0, 2.0, 1.0, 10), InvalidParameter);
  CHECK_THROWS_AS(lemma6_recursion_check(1.0, -1.0, 0.0, 2.0, 1.0, 10), InvalidParameter);
}

TEST_CASE("property: random in-domain lemma6 draws satisfy the bound") {
  Rng rng = test::gen(6);
  for (int trial = 0; trial < 100; ++trial) {
    const double r1 = test::uniform(rng, 1.0, 5.0);
    const double a = r1 + test::uniform(rng, 0.01, 50.0);
    const double r2 = test::uniform(rng, 0.0, 10.0);
    const double r3 = test::uniform(rng, 0.0, 1.0);
    const double psi0 = test::uniform(rng, 0.0, 10.0);
    const Lemma6Report rep = lemma6_recursion_check(r1, r2, r3, a, psi0, 10000);
    CHECK_MESSAGE(rep.pass, "r1=" << r1 << " a=" << a << " t=" << rep.first_violation);
  }
}

TEST_CASE("property: gamma below the bound keeps zeta1 positive") {
  Rng rng = test::gen(7);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double phi = test::uniform(rng, 0.05, 1.0);
    const double kappa = test::uniform(rng, 0.01, 1.0);
    const double alpha = test::uniform(rng, 0.01, 2.0);
    const double r = test::uniform(rng, 1.0, 3.0);
    const double psi = test::uniform(rng, 0.75 / r, 1.0 / r);
    const double g = gamma_upper_bound(phi, kappa, alpha, psi, r) * test::uniform(rng, 1e-3, 1.0);
    const Zeta1Branches z = zeta1_branches(g, phi, kappa, alpha, psi, r);
    CHECK(z.first > 0.0);
    CHECK(z.second > 0.0);
    ++checked;
  }
  CHECK(checked == 1000);
}
