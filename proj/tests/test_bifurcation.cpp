#include "fplap/bifurcation.hpp"
#include "oracle_values.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace fpl;
using testing::rel_diff;

namespace {

struct Fixture
{
  Domain1D        d = build_grid(-1., 1., 64);
  KernelMatrix    k = KernelMatrix::assemble(d, 0.4, 2.);
  OperatorContext ctx{k, Vector::Ones(64)};
  DiscreteRhs     rhs = make_rhs();
  EigenPair       e1  = solve_first(ctx);

  DiscreteRhs make_rhs() const
  {
    RhsSpec r;
    r.terms.push_back({-1., WeightSpec::constant_one(), 4., true});
    r.coupling = LambdaCoupling{0., WeightSpec::constant_one()};
    return DiscreteRhs(r, d, 2.);
  }
};

Branch synthetic(double lambda1, int count, double slope)
{
  Branch b;
  for (int j = 0; j < count; ++j)
    {
      BranchPoint pt;
      pt.norm   = 0.01 * (j + 1);
      pt.lambda = lambda1 + slope * pt.norm * pt.norm;
      b.points.push_back(pt);
    }
  return b;
}

} // namespace

TEST_SUITE("bifurcation")
{
  TEST_CASE_FIXTURE(Fixture, "small-norm ratio")
  {
    Vector dir = e1.u / norm(e1.u, k);
    auto   fit = small_norm_slope(rhs, dir, k);
    CHECK(fit.slope == doctest::Approx(2.).epsilon(0.1));
    CHECK(fit.monotone);
    CHECK(small_norm_ratio(rhs, 0.05, dir, k) == doctest::Approx(small_norm_ratio(rhs, 0.05, -dir, k)));

    RhsSpec none;
    none.coupling = LambdaCoupling{3., WeightSpec::constant_one()};
    CHECK(small_norm_ratio(DiscreteRhs(none, d, 2.), 0.05, dir, k) == 0.);
    CHECK_THROWS_AS(small_norm_ratio(rhs, 0.05, 2. * dir, k), ValidationError);
  }

  TEST_CASE_FIXTURE(Fixture, "Newton solve matches the oracle branch point")
  {
    Vector guess = 0.5 * e1.u;
    auto   pt    = solve_at_lambda(rhs, oracle::branch_lambda, guess, k, 1e-12);
    REQUIRE(pt);
    CHECK(rel_diff(pt->norm, oracle::branch_norm) < 1e-8);
    auto mirror = solve_at_lambda(rhs, oracle::branch_lambda, Vector(-guess), k, 1e-12);
    REQUIRE(mirror);
    CHECK((mirror->u + pt->u).norm() < 1e-8 * pt->u.norm());
  }

  TEST_CASE_FIXTURE(Fixture, "continuation")
  {
    ContinuationOptions opts;
    auto                start = branch_start(rhs, e1, k, opts);
    CHECK(start.residual <= opts.tol);
    CHECK(start.norm == doctest::Approx(opts.epsilon).epsilon(1e-6));
    auto br = continue_branch(rhs, start, 120, k, opts);
    REQUIRE(br.points.size() > 20);

    for (std::size_t j = 0; j < br.points.size(); ++j)
      {
        const auto &pt = br.points[j];
        CHECK(residual(pt.u, rhs.with_lambda(pt.lambda), k).norm <= opts.tol);
        CHECK(residual(Vector(-pt.u), rhs.with_lambda(pt.lambda), k).norm <= opts.tol);
        if (j > 0)
          {
            CHECK(pt.lambda > br.points[j - 1].lambda);
            CHECK(pt.norm > br.points[j - 1].norm);
            const double dist = e_norm(pt.lambda - br.points[j - 1].lambda, Vector(pt.u - br.points[j - 1].u), k);
            CHECK(dist == doctest::Approx(pt.arc_step).epsilon(1e-9));
          }
      }

    // three points cross-checked by Newton solves from perturbed starts
    for (std::size_t j : {br.points.size() / 4, br.points.size() / 2, br.points.size() - 1})
      {
        const auto &pt    = br.points[j];
        Vector      guess = 1.05 * pt.u;
        auto        check = solve_at_lambda(rhs, pt.lambda, guess, k, 1e-12);
        REQUIRE(check);
        CHECK((check->u - pt.u).norm() < 1e-7 * pt.u.norm());
      }

    auto rep = detect_bifurcation(br, e1.lambda);
    CHECK(rep.verdict == Verdict::yes);
    CHECK(rep.deviation < 0.01);

    ContinuationOptions neg = opts;
    neg.epsilon             = -opts.epsilon;
    auto mstart             = branch_start(rhs, e1, k, neg);
    auto mb                 = continue_branch(rhs, mstart, 20, k, neg);
    for (std::size_t j = 0; j < std::min<std::size_t>(20, mb.points.size()); ++j)
      {
        CHECK(mb.points[j].lambda == doctest::Approx(br.points[j].lambda).epsilon(1e-8));
        CHECK((mb.points[j].u + br.points[j].u).norm() < 1e-7 * br.points[j].u.norm());
      }
  }

  TEST_CASE("synthetic detection cases")
  {
    auto flat = detect_bifurcation(synthetic(7., 9, 0.), 7.);
    CHECK(flat.verdict == Verdict::yes);
    CHECK(flat.deviation == doctest::Approx(0.).epsilon(1e-14));
    CHECK(flat.deviation < 1e-12);
    CHECK(detect_bifurcation(synthetic(7., 4, 1.), 7.).verdict == Verdict::inconclusive);
    auto off = detect_bifurcation(synthetic(8., 9, 0.), 7.);
    CHECK(off.verdict == Verdict::no);
    CHECK(off.deviation == doctest::Approx(1. / 7.));
  }

  TEST_CASE("to_string")
  {
    CHECK(std::string(to_string(BranchStatus::norm_limit)) == "norm_limit");
    CHECK(std::string(to_string(BranchStatus::step_underflow)) == "step_underflow");
  }
}
