#include "fplap/weights.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fpl;

namespace {

const SpaceParams ball{3, 2., 1., 2.};

bool recheck(WeightClass c, const WeightSpec &w, const SpaceParams &P, const ClassReport &r)
{
  return r.witness && witness_margin(c, w, P, *r.witness) > 0. &&
         witness_holds_exactly(c, w, P, *r.witness);
}

} // namespace

TEST_SUITE("weights")
{
  TEST_CASE("critical exponent")
  {
    CHECK(critical_exponent(3, 2., 1.) == doctest::Approx(6.));
    CHECK(critical_exponent(1, 2., 0.4) == doctest::Approx(10.));
    CHECK(std::isinf(critical_exponent(1, 2., 0.6)));
  }

  TEST_CASE("parameter validation")
  {
    CHECK_THROWS_AS(validate(SpaceParams{3, 2., 1., 6.}), ValidationError);
    CHECK_THROWS_AS(validate(SpaceParams{3, 1., 1., 2.}), ValidationError);
    CHECK_THROWS_AS(validate(SpaceParams{3, 2., 0., 2.}), ValidationError);
    CHECK_NOTHROW(validate(ball));
    CHECK_THROWS_AS(check_Wq(WeightSpec::power(0.), SpaceParams{3, 2., 1., 7.}), ValidationError);
  }

  TEST_CASE("A_q examples")
  {
    auto r = check_Aq(WeightSpec::power(2. / 3. + 1e-3), ball);
    CHECK_FALSE(r.member);
    auto r2 = check_Aq(WeightSpec::power(0.1), ball);
    CHECK(r2.member);
    CHECK(recheck(WeightClass::Aq, WeightSpec::power(0.1), ball, r2));
    Witness five{0., 5.};
    CHECK(witness_holds_exactly(WeightClass::Aq, WeightSpec::power(0.1), ball, five));
    CHECK(check_Aq(WeightSpec::power(0.), ball).member);
  }

  TEST_CASE("W_q examples")
  {
    CHECK_FALSE(check_Wq(WeightSpec::power(2.), ball).member);
    auto r = check_Wq(WeightSpec::power(0.), ball);
    CHECK(r.member);
    CHECK(recheck(WeightClass::Wq, WeightSpec::power(0.), ball, r));
  }

  TEST_CASE("beta = 2s/3 + eps family is in tilde W_2")
  {
    for (double s : {1., 0.5})
      {
        SpaceParams P{3, 2., s, 2.};
        // at s = 1 the whole family; for s < 1 the part compatible with rho^{sa}
        const double eps_max = s == 1. ? (3. - 2. * s) / 3. : 1. / 3.;
        for (double frac : {0., 0.25, 0.5, 0.75, 0.95})
          {
            const double beta = 2. * s / 3. + frac * eps_max;
            auto         w    = WeightSpec::power(beta);
            auto         rep  = check_tildeWq(w, P);
            CAPTURE(s);
            CAPTURE(beta);
            CHECK(rep.member);
            CHECK(rep.margin > 0.);
            CHECK(recheck(WeightClass::tildeWq, w, P, rep));
            CHECK(rep.in_Wq);
          }
      }
  }

  TEST_CASE("explicit (delta, a, r) witness at s = 1")
  {
    const double eps = 0.1, s = 1.;
    const double delta = 0.5 * (s * eps / (3. - s) + 2. * s / 3.);
    const double a     = 0.5 * (eps + delta + std::min(1., 3. * delta / s));
    Witness      w{a, 3. / (2. * s - 3. * delta)};
    CHECK(witness_holds_exactly(WeightClass::tildeWq, WeightSpec::power(2. * s / 3. + eps), ball, w));
  }

  TEST_CASE("beta = 2/3: not in L^{3/2}, witness (2/3, 3)")
  {
    auto w = WeightSpec::power(2. / 3.);
    CHECK_FALSE(in_Lr(w, 1.5));
    CHECK(in_Lr(w, 1.49));
    auto rep = check_tildeWq(w, ball);
    CHECK(rep.member);
    CHECK(recheck(WeightClass::tildeWq, w, ball, rep));
    CHECK(witness_holds_exactly(WeightClass::tildeWq, w, ball, Witness{2. / 3., 3.}));
    CHECK(witness_margin(WeightClass::tildeWq, w, ball, Witness{2. / 3., 3.}) > 0.);
    CHECK(check_tildeWq(WeightSpec::power(0.), ball).member);
    CHECK_FALSE(lorentz_membership_analytic(w, 3, {1.5, 2.}).verdict == Verdict::yes);
  }

  TEST_CASE("class inclusions over a beta scan")
  {
    for (double q : {1.5, 2., 3.})
      for (double beta = 0.; beta <= 1.6; beta += 0.05)
        {
          SpaceParams P{3, 2., 1., q};
          auto        w  = WeightSpec::power(beta);
          auto        aq = check_Aq(w, P);
          auto        wq = check_Wq(w, P);
          auto        tw = check_tildeWq(w, P);
          if (aq.member)
            CHECK(wq.member);
          if (tw.member && q >= P.p)
            CHECK(wq.member);
          for (auto *r : {&aq, &wq, &tw})
            if (r->member)
              CHECK(r->margin > 0.);
        }
  }

  TEST_CASE("wrong witnesses are rejected exactly")
  {
    auto w = WeightSpec::power(2. / 3.);
    CHECK_FALSE(witness_holds_exactly(WeightClass::tildeWq, w, ball, Witness{2. / 3., 2.}));
    CHECK_FALSE(witness_holds_exactly(WeightClass::tildeWq, w, ball, Witness{1.5, 10.}));
    CHECK_FALSE(witness_holds_exactly(WeightClass::Aq, w, ball, Witness{0., 3.}));
  }

  TEST_CASE("distribution function")
  {
    auto         w   = WeightSpec::power(2. / 3.);
    const double vol = 4. * std::numbers::pi / 3.;
    CHECK(distribution_function(w, 3, 1.) == doctest::Approx(vol));
    CHECK(distribution_function(w, 3, 0.3) == doctest::Approx(vol));
    CHECK(distribution_function(w, 3, 1e12) < 1e-6);

    const double x      = 1. / (16. * std::sqrt(2.));
    const double expect = vol * (1. - std::pow(1. - x, 3));
    CHECK(distribution_function(w, 3, 8.) == doctest::Approx(expect).epsilon(1e-12));

    // Monte Carlo volume of {(1-|x|)^{-2/3} > 8} in the unit ball
    std::mt19937_64                        rng(5);
    std::uniform_real_distribution<double> u(-1., 1.);
    long                                   hit = 0, inside = 0;
    for (int k = 0; k < 4000000; ++k)
      {
        const double a = u(rng), b = u(rng), c = u(rng);
        const double r = std::sqrt(a * a + b * b + c * c);
        if (r >= 1.)
          continue;
        ++inside;
        if (std::pow(1. - r, -2. / 3.) > 8.)
          ++hit;
      }
    const double mc = 8. * static_cast<double>(hit) / 4000000.;
    (void)inside;
    CHECK(mc == doctest::Approx(expect).epsilon(0.01));

    double prev = distribution_function(w, 3, 0.5);
    for (double level = 1.; level < 1e6; level *= 1.7)
      {
        const double a = distribution_function(w, 3, level);
        CHECK(a <= prev);
        prev = a;
      }
  }

  TEST_CASE("decreasing rearrangement")
  {
    auto         w   = WeightSpec::power(2. / 3.);
    const double vol = 4. * std::numbers::pi / 3.;
    CHECK(decreasing_rearrangement(w, 3, vol) == 0.);
    CHECK(decreasing_rearrangement(w, 3, 2. * vol) == 0.);
    CHECK(decreasing_rearrangement(w, 3, 1e-12) > 1e3);
    CHECK(decreasing_rearrangement(w, 3, 7. * std::numbers::pi / 6.) ==
          doctest::Approx(std::pow(2., 2. / 3.)).epsilon(1e-12));
    CHECK_THROWS_AS(decreasing_rearrangement(w, 3, 0.), ValidationError);

    double prev = decreasing_rearrangement(w, 3, 1e-6);
    for (double t = 1e-5; t < vol; t *= 2.)
      {
        const double v = decreasing_rearrangement(w, 3, t);
        CHECK(v <= prev);
        prev = v;
      }
    for (double level : {1.5, 3., 10., 100.})
      CHECK(decreasing_rearrangement(w, 3, distribution_function(w, 3, level)) <=
            level * (1. + 1e-12));
  }

  TEST_CASE("tabulated weight")
  {
    auto   d   = build_grid(-1., 1., 399);
    auto   rho = distance_to_boundary(d);
    Vector v   = rho.array().pow(-0.4);
    auto   w   = WeightSpec::tabulated(d, v);
    CHECK(singularity_exponent(w) == doctest::Approx(0.4).epsilon(1e-6));
    CHECK((evaluate_weight(w, d) - v).norm() == 0.);
    CHECK_THROWS_AS(evaluate_weight(w, build_grid(-1., 1., 10)), ValidationError);

    // generalized inverse on samples
    for (double level : {1.2, 2., 5.})
      CHECK(decreasing_rearrangement(w, 1, std::max(distribution_function(w, 1, level), 1e-9)) <=
            level);
    CHECK_THROWS_AS(WeightSpec::tabulated(d, Vector::Ones(3)), ValidationError);
  }

  TEST_CASE("sign mask")
  {
    auto d = build_grid(-1., 1., 20);
    auto h = evaluate_weight(WeightSpec::power(0.2, 0.3), d);
    for (int i = 0; i < d.size(); ++i)
      CHECK((d.node(i) > 0.3 ? h[i] < 0. : h[i] > 0.));
  }

  TEST_CASE("Lorentz threshold")
  {
    CHECK(lorentz_membership_analytic(WeightSpec::power(2. / 3.), 3, {1.5, 2.}).verdict == Verdict::no);
    CHECK(lorentz_membership_analytic(WeightSpec::power(0.5), 3, {1.5, 2.}).verdict == Verdict::yes);
    CHECK(lorentz_membership_analytic(WeightSpec::power(0.7), 3, {1.5, 4.}).verdict == Verdict::no);
    for (double q0 : {1.5, 3.})
      CHECK(lorentz_membership_analytic(WeightSpec::power(2. / 3.), 3, {1.5, q0}).verdict ==
            Verdict::no);
    CHECK(lorentz_membership_numeric(WeightSpec::power(0.5), 3, {1.5, 2.}).verdict == Verdict::yes);
    CHECK(lorentz_membership_numeric(WeightSpec::power(0.8), 3, {1.5, 2.}).verdict == Verdict::no);
    CHECK(lorentz_membership_numeric(WeightSpec::power(2. / 3.), 3, {1.5, 2.}).verdict !=
          Verdict::yes);
    CHECK_THROWS_AS(lorentz_membership_analytic(WeightSpec::power(0.5), 3, {1., 2.}), ValidationError);
  }
}
