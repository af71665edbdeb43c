#include "fplap/errors.hpp"
#include "fplap/grid.hpp"

#include <doctest.h>

using namespace fpl;

TEST_SUITE("grid")
{
  TEST_CASE("three nodes on (-1,1)")
  {
    auto d = build_grid(-1., 1., 3);
    CHECK(d.cell_weight() == doctest::Approx(0.5));
    CHECK(d.node(0) == doctest::Approx(-0.5));
    CHECK(d.node(1) == doctest::Approx(0.));
    CHECK(d.node(2) == doctest::Approx(0.5));
    auto rho = distance_to_boundary(d);
    CHECK(rho[0] == doctest::Approx(0.5));
    CHECK(rho[1] == doctest::Approx(1.));
    CHECK(rho[2] == doctest::Approx(0.5));
  }

  TEST_CASE("four nodes on (0,1)")
  {
    auto d = build_grid(0., 1., 4);
    const double expect[] = {0.2, 0.4, 0.6, 0.8};
    for (int i = 0; i < 4; ++i)
      CHECK(d.node(i) == doctest::Approx(expect[i]).epsilon(1e-15));
    auto rho = distance_to_boundary(d);
    CHECK(rho[1] == doctest::Approx(0.4));
    CHECK(rho[2] == doctest::Approx(0.4));
    CHECK(rho[3] == doctest::Approx(0.2));
  }

  TEST_CASE("degenerate input rejected")
  {
    CHECK_THROWS_AS(build_grid(0., 1., 1), ValidationError);
    CHECK_THROWS_AS(build_grid(1., 1., 8), ValidationError);
    CHECK_THROWS_AS(build_grid(2., 1., 8), ValidationError);
  }

  TEST_CASE("invariants")
  {
    auto d = build_grid(-0.3, 2.1, 41);
    for (int i = 0; i + 1 < d.size(); ++i)
      CHECK(d.node(i + 1) - d.node(i) == doctest::Approx(d.cell_weight()).epsilon(1e-12));
    CHECK(d.node(0) > d.left());
    CHECK(d.node(d.size() - 1) < d.right());
    auto rho = distance_to_boundary(d);
    CHECK((rho - reflect(rho)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(rho[20] == doctest::Approx(d.length() / 2));
    CHECK(rho.minCoeff() > 0.);
  }

  TEST_CASE("quadrature")
  {
    auto d = build_grid(0., 1., 100);
    CHECK(integrate(Vector::Ones(100), d) == doctest::Approx(100. / 101.));
    CHECK(integrate(Vector::Zero(100), d) == 0.);
    CHECK_THROWS_AS(integrate(Vector::Ones(99), d), ValidationError);

    double prev_err = 1.;
    for (int n : {10, 100, 1000})
      {
        auto g   = build_grid(0., 1., n);
        double e = std::abs(integrate(g.nodes(), g) - 0.5);
        CHECK(e < prev_err);
        prev_err = e;
      }
    CHECK(prev_err < 1e-3);

    Vector u = d.nodes().array().square(), v = u.array() + 0.1;
    CHECK(integrate(u, d) <= integrate(v, d));
    CHECK(integrate(2. * u + v, d) == doctest::Approx(2. * integrate(u, d) + integrate(v, d)));
  }
}
