// Acceptance run: one PASS/FAIL line per criterion.
#include "fplap/apriori.hpp"
#include "fplap/bifurcation.hpp"
#include "fplap/nonlinear.hpp"
#include "fplap/weights.hpp"
#include "oracle_values.hpp"
#include "support.hpp"

#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

using namespace fpl;
using testing::random_vector;
using testing::rel_diff;

namespace {

struct Outcome
{
  bool        pass = true;
  std::string detail;
};

class Detail
{
public:
  template <class T>
  Detail &operator()(const char *key, const T &value)
  {
    ss_ << (first_ ? "" : ", ") << key << '=' << value;
    first_ = false;
    return *this;
  }
  std::string str() const { return ss_.str(); }

private:
  std::ostringstream ss_;
  bool               first_ = true;
};

const int n = 64;

double s_for(double p)
{
  return p == 3. ? 0.3 : 0.4;
}

Outcome lorentz_threshold()
{
  int mismatches = 0, numeric_disagree = 0, cases = 0;
  for (double beta : {0.3, 0.5, 0.6, 0.7, 0.8, 1.0})
    for (double q0 : {1.5, 2., 4.})
      {
        ++cases;
        auto       w        = WeightSpec::power(beta);
        const bool expected = beta < 2. / 3.;
        const auto a        = lorentz_membership_analytic(w, 3, {1.5, q0});
        if ((a.verdict == Verdict::yes) != expected || a.verdict == Verdict::inconclusive)
          ++mismatches;
        if (std::abs(beta - 2. / 3.) > 0.02)
          {
            const auto num = lorentz_membership_numeric(w, 3, {1.5, q0});
            if (num.verdict != a.verdict)
              ++numeric_disagree;
          }
      }
  Detail d;
  d("cases", cases)("analytic_mismatches", mismatches)("numeric_disagreements", numeric_disagree);
  return {mismatches == 0 && numeric_disagree == 0, d.str()};
}

Outcome witness_verification()
{
  const SpaceParams P{3, 2., 1., 2.};
  auto              w   = WeightSpec::power(2. / 3.);
  auto              rep = check_tildeWq(w, P);
  bool              ok  = rep.member && rep.witness && rep.margin > 0.;
  double            m   = 0.;
  if (ok)
    {
      m  = witness_margin(WeightClass::tildeWq, w, P, *rep.witness);
      ok = m > 0. && witness_holds_exactly(WeightClass::tildeWq, w, P, *rep.witness);
    }
  const Witness fixed{2. / 3., 3.};
  const double  pm    = witness_margin(WeightClass::tildeWq, w, P, fixed);
  const bool    exact = witness_holds_exactly(WeightClass::tildeWq, w, P, fixed);
  Detail        d;
  if (rep.witness)
    d("a", rep.witness->a)("r", rep.witness->r);
  d("margin", m)("fixed_witness_margin", pm)("fixed_witness_exact", exact);
  return {ok && pm > 0. && exact, d.str()};
}

Outcome operator_identities()
{
  const auto      dom = build_grid(-1., 1., n);
  std::mt19937_64 rng(2024);
  double          homog = 0., euler = 0., mono = 0., fd = 0., fd_pointwise = 0.;
  for (double p : {1.5, 2., 3.})
    {
      auto k = KernelMatrix::assemble(dom, s_for(p), p);
      for (int trial = 0; trial < 1000; ++trial)
        {
          Vector       u  = random_vector(n, rng);
          Vector       v  = random_vector(n, rng);
          const double t  = std::uniform_real_distribution<double>(-3., 3.)(rng);
          const double Eu = energy(u, k);
          homog           = std::max(homog, rel_diff(energy(t * u, k), std::pow(std::abs(t), p) * Eu));
          Vector Au       = apply_A(u, k);
          euler           = std::max(euler, rel_diff(pairing(Au, u, dom), Eu));

          Vector       Av  = apply_A(v, k);
          const double gap = pairing(Au - Av, u - v, dom);
          const double scale =
            std::abs(pairing(Au, u - v, dom)) + std::abs(pairing(Av, u - v, dom));
          mono = std::min(mono, gap / scale);

          const double eps = 1e-6;
          const double dd  = (energy(u + eps * v, k) - energy(u - eps * v, k)) / (2. * p * eps);
          // relative to the dual scale ||u||^{p-1} ||v|| bounding <A(u), v>
          const double err = std::abs(pairing(Au, v, dom) - dd);
          fd               = std::max(fd, err / (std::pow(norm(u, k), p - 1.) * norm(v, k)));
          fd_pointwise     = std::max(fd_pointwise, err / std::abs(dd));
        }
    }
  Detail d;
  d("max_homogeneity_rel", homog)("max_euler_rel", euler)("min_monotonicity_rel", mono)("max_fd_rel", fd)(
    "max_fd_rel_to_value", fd_pointwise);
  return {homog <= 1e-12 && euler <= 1e-12 && mono >= -1e-12 && fd <= 1e-6, d.str()};
}

Outcome inequality_suite()
{
  std::mt19937_64                        rng(77);
  std::uniform_real_distribution<double> uni(0., 1.);
  const auto                             dom = build_grid(-1., 1., 24);
  double                                 trunc = 0., trunc_global = 0., picone = 0.;
  long                                   pairs = 0;
  for (double p : {1.5, 2., 3.})
    {
      auto k = KernelMatrix::assemble(dom, s_for(p), p);
      for (int trial = 0; trial < 1000; ++trial)
        {
          Vector v  = random_vector(24, rng);
          Vector vp = v.cwiseMax(0.);
          for (int i = 0; i < 24; ++i)
            for (int j = 0; j < 24; ++j)
              {
                const double lhs = phi(v[i] - v[j], p) * (vp[i] - vp[j]);
                const double rhs = std::pow(std::abs(vp[i] - vp[j]), p);
                trunc            = std::min(trunc, (lhs - rhs) / std::max(1., std::abs(rhs)));
                ++pairs;
              }
          const double g = pairing(apply_A(v, k), vp, dom);
          const double e = energy(vp, k);
          trunc_global   = std::min(trunc_global, (g - e) / std::max(1., e));

          Vector       w(24), ev(24);
          const double eps = 1e-3 + uni(rng);
          for (int i = 0; i < 24; ++i)
            {
              w[i]  = 1e-3 + uni(rng);
              ev[i] = 1e-3 + uni(rng);
            }
          for (int i = 0; i < 24; ++i)
            for (int j = 0; j < 24; ++j)
              {
                const double lhs = phi(w[i] - w[j], p) * (std::pow(ev[i], p) / std::pow(w[i] + eps, p - 1.) -
                                                          std::pow(ev[j], p) / std::pow(w[j] + eps, p - 1.));
                const double rhs = std::pow(std::abs(ev[i] - ev[j]), p);
                picone           = std::min(picone, (rhs - lhs) / std::max({1., std::abs(lhs), rhs}));
              }
        }
    }
  Detail d;
  d("pairs_per_inequality", pairs)("min_truncation_slack", trunc)("min_truncation_energy_slack", trunc_global)(
    "min_picone_slack", picone);
  return {trunc >= -1e-12 && trunc_global >= -1e-12 && picone >= -1e-12, d.str()};
}

struct P2Setup
{
  Domain1D        dom = build_grid(-1., 1., n);
  KernelMatrix    k   = KernelMatrix::assemble(dom, 0.4, 2.);
  OperatorContext ctx{k, Vector::Ones(n)};
};

Outcome eigen_oracle()
{
  P2Setup      s;
  auto         modes = oracle_spectrum_p2(s.ctx);
  auto         e1    = solve_first(s.ctx);
  const double dev   = rel_diff(e1.lambda, modes[0].lambda);
  const double dev_py = rel_diff(e1.lambda, oracle::lambda_h1[0]);
  auto         simp  = check_simplicity(s.ctx, 10);
  Detail       d;
  d("lambda1", e1.lambda)("oracle", modes[0].lambda)("rel_dev", dev)("rel_dev_independent", dev_py)(
    "residual", e1.residual)("min_e1", e1.u.minCoeff())("simplicity", to_string(simp.verdict))(
    "min_alignment", simp.min_alignment);
  return {dev < 1e-6 && dev_py < 1e-6 && e1.residual < 1e-8 && e1.u.minCoeff() > 0. &&
            simp.verdict == Verdict::yes && simp.min_alignment > 1. - 1e-6,
          d.str()};
}

struct SecondResult
{
  double lambda1, lambda2;
  bool   sign_changing;
};

SecondResult second(double p, const Vector &h)
{
  const auto      dom = build_grid(-1., 1., n);
  OperatorContext ctx(KernelMatrix::assemble(dom, s_for(p), p), h);
  auto            e1  = solve_first(ctx);
  auto            sec = solve_second(ctx, initial_path(ctx, e1.u));
  return {e1.lambda, sec.lambda2, sec.maximizer.maxCoeff() > 1e-6 && sec.maximizer.minCoeff() < -1e-6};
}

Outcome second_eigenvalue()
{
  Detail d;
  bool   ok = true;
  for (double p : {1.5, 2., 3.})
    {
      const auto r = second(p, Vector::Ones(n));
      ok           = ok && r.lambda2 > r.lambda1 && r.sign_changing;
      const std::string tag = "p=" + std::to_string(p).substr(0, 3);
      d((tag + " lambda1").c_str(), r.lambda1)((tag + " lambda2").c_str(), r.lambda2)(
        (tag + " sign_changing").c_str(), r.sign_changing);
      if (p == 2.)
        {
          const double dev = rel_diff(r.lambda2, oracle::lambda_h1[1]);
          d("p=2 rel_dev_from_oracle", dev);
          ok = ok && dev < 0.02;
        }
    }
  return {ok, d.str()};
}

Outcome isolation()
{
  P2Setup s;
  Detail  d;
  bool    ok = true;
  Vector  sing = distance_to_boundary(s.dom).array().pow(-0.3).matrix();
  for (auto [name, h] : {std::pair<const char *, Vector>{"h=1", Vector::Ones(n)}, {"h=rho^-0.3", sing}})
    {
      OperatorContext ctx(s.k, h);
      auto            modes = oracle_spectrum_p2(ctx);
      auto            r     = second(2., h);
      int             inside = 0;
      for (const auto &m : modes)
        if (m.lambda > r.lambda1 * (1. + 1e-6) && m.lambda < r.lambda2 * (1. - 0.02))
          ++inside;
      ok = ok && inside == 0;
      d((std::string(name) + " lambda1").c_str(), r.lambda1)((std::string(name) + " lambda2_num").c_str(),
                                                             r.lambda2)(
        (std::string(name) + " eigenvalues_in_gap").c_str(), inside);
    }
  return {ok, d.str()};
}

Outcome degiorgi_certification()
{
  const auto          dom = build_grid(-1., 1., n);
  std::vector<Vector> sols;
  std::vector<double> ps;
  Vector              f = (1. + dom.nodes().array()).matrix();
  for (double p : {1.5, 2., 3.})
    {
      OperatorContext ctx(KernelMatrix::assemble(dom, s_for(p), p), Vector::Ones(n));
      sols.push_back(solve_first(ctx).u);
      ps.push_back(p);
      if (p != 3.)
        {
          auto e1 = solve_first(ctx);
          sols.push_back(solve_fredholm(0.5 * e1.lambda, f, ctx).u);
          ps.push_back(p);
        }
    }
  P2Setup s;
  auto    modes = oracle_spectrum_p2(s.ctx);
  for (int j : {1, 2})
    {
      sols.push_back(modes[j].u);
      ps.push_back(2.);
    }
  sols.push_back(solve_fredholm(0.5 * (modes[0].lambda + modes[1].lambda), f, s.ctx).u);
  ps.push_back(2.);
  OperatorContext sing(s.k, distance_to_boundary(s.dom).array().pow(-0.3).matrix());
  sols.push_back(solve_first(sing).u);
  ps.push_back(2.);
  sols.push_back(solve_fredholm(0.5 * modes[0].lambda, Vector::Ones(n), s.ctx).u);
  ps.push_back(2.);

  int certified = 0;
  for (std::size_t j = 0; j < sols.size(); ++j)
    {
      const double p  = ps[j];
      GrowthSpec   g{{{p, 100., 0.}}};
      const double qt = compute_qtilde(g, {1, p, s_for(p), p});
      const double ks = find_kstar(sols[j], dom, qt);
      bool         ok = sols[j].cwiseAbs().maxCoeff() <= 2. * ks;
      for (const Vector &u : {sols[j], Vector(-sols[j])})
        {
          auto tr = degiorgi_trace(u, dom, ks, qt);
          ok      = ok && tr.converged && check_chain(u, dom, tr).ok();
          for (std::size_t m = 0; m + 1 < tr.masses.size(); ++m)
            ok = ok && tr.masses[m + 1] <= tr.masses[m];
        }
      certified += ok;
    }
  Detail d;
  d("solutions", sols.size())("certified", certified);
  return {sols.size() == 10 && certified == 10, d.str()};
}

Outcome fredholm()
{
  P2Setup s;
  auto    modes = oracle_spectrum_p2(s.ctx);
  Vector  f     = (1. + s.dom.nodes().array()).matrix();
  Detail  d;
  bool    ok = true;
  for (double lam : {0.5 * modes[0].lambda, 0.5 * (modes[0].lambda + modes[1].lambda)})
    {
      auto   sol  = solve_fredholm(lam, f, s.ctx);
      Vector lin  = fredholm_linear_oracle(lam, f, s.ctx);
      double diff = (sol.u - lin).norm() / lin.norm();
      ok          = ok && sol.residual < 1e-8 && diff < 1e-8;
      d("lambda", lam)("residual", sol.residual)("rel_diff", diff);
    }
  const double umid = solve_fredholm(oracle::fredholm_mid_lambda, f, s.ctx).u[n / 2];
  ok                = ok && rel_diff(umid, oracle::fredholm_mid_umid) < 1e-8;

  const double pair = pairing(f, modes[0].u, s.dom);
  bool         detected = false;
  double       cond     = 0.;
  try
    {
      solve_fredholm(modes[0].lambda, f, s.ctx);
    }
  catch (const ResonanceError &e)
    {
      detected = true;
      cond     = e.condition();
    }
  d("pairing_f_e1", pair)("resonance_detected", detected)("condition", cond);
  return {ok && pair != 0. && detected && cond > 1e10, d.str()};
}

Outcome bifurcation()
{
  P2Setup s;
  RhsSpec r;
  r.terms.push_back({-1., WeightSpec::constant_one(), 4., true});
  r.coupling = LambdaCoupling{0., WeightSpec::constant_one()};
  DiscreteRhs rhs(r, s.dom, 2.);
  auto        e1  = solve_first(s.ctx);
  auto        br  = continue_branch(rhs, branch_start(rhs, e1, s.k), 300, s.k);
  auto        rep = detect_bifurcation(br, e1.lambda);
  auto        fit = small_norm_slope(rhs, Vector(e1.u / norm(e1.u, s.k)), s.k, 1e-3, 1e-1);
  Detail      d;
  d("lambda1", e1.lambda)("lambda0", rep.lambda0)("rel_dev", rep.deviation)("points", br.points.size())(
    "slope", fit.slope)("monotone", fit.monotone);
  return {rep.verdict == Verdict::yes && rep.deviation < 0.01 && std::abs(fit.slope - 2.) < 0.2, d.str()};
}

Outcome small_solutions()
{
  P2Setup s;
  RhsSpec r;
  r.terms.push_back({1., WeightSpec::constant_one(), 1.5, true});
  const auto spec  = default_truncation(r, s.k);
  const auto tr    = build_truncation(r, spec, s.k);
  const auto found = find_small_solutions(tr, s.k, 6);

  bool ok = found.solutions.size() >= 3;
  for (std::size_t j = 0; j < found.solutions.size(); ++j)
    {
      const auto &sol = found.solutions[j];
      ok = ok && sol.solution.energy < 0. && sol.sup_norm < spec.t1 && sol.below_t1;
      if (j > 0)
        ok = ok && found.solutions[j - 1].solution.energy <= sol.solution.energy;
      for (std::size_t i = 0; i < j; ++i)
        {
          const Vector &v = found.solutions[i].solution.u;
          ok = ok && lq_norm(sol.solution.u - v, s.dom, 2.) > 1e-4 && lq_norm(sol.solution.u + v, s.dom, 2.) > 1e-4;
        }
    }

  long violations = 0, samples = 0;
  for (int i = 0; i < n; i += 7)
    for (int k = -4000; k <= 4000; ++k)
      {
        const double t = 2.5 * spec.t1 * k / 4000.;
        ++samples;
        if (std::abs(t) <= spec.t2 && tr.value(i, t) != tr.base().value(i, t))
          ++violations;
        if (std::abs(t) >= 2. * spec.t2 && tr.value(i, t) != 2. * spec.gamma * phi(t, 2.))
          ++violations;
        if (tr.value(i, -t) != -tr.value(i, t))
          ++violations;
        if (2. * tr.primitive(i, t) - tr.value(i, t) * t < 0.)
          ++violations;
      }
  Detail d;
  d("pairs", found.solutions.size())("t1", spec.t1)("t2", spec.t2);
  for (const auto &sol : found.solutions)
    d("energy", sol.solution.energy)("sup", sol.sup_norm);
  d("identity_samples", samples)("identity_violations", violations);
  return {ok && violations == 0, d.str()};
}

Outcome hardy_stability()
{
  auto         a   = hardy_supremum(KernelMatrix::assemble(build_grid(-1., 1., 64), 0.4, 2.));
  auto         b   = hardy_supremum(KernelMatrix::assemble(build_grid(-1., 1., 128), 0.4, 2.));
  const double chg = rel_diff(b.value, a.value);
  Detail       d;
  d("sup_n64", a.value)("sup_n128", b.value)("rel_change", chg)("independent_n64", oracle::hardy_sup_n64)(
    "independent_n128", oracle::hardy_sup_n128);
  return {a.converged && b.converged && chg < 0.2 && rel_diff(a.value, oracle::hardy_sup_n64) < 1e-6 &&
            rel_diff(b.value, oracle::hardy_sup_n128) < 1e-6,
          d.str()};
}

} // namespace

int main()
{
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
    {"Lorentz threshold", lorentz_threshold},
    {"witness verification", witness_verification},
    {"operator identities", operator_identities},
    {"inequality suite", inequality_suite},
    {"eigen oracle", eigen_oracle},
    {"second eigenvalue", second_eigenvalue},
    {"isolation", isolation},
    {"De Giorgi certification", degiorgi_certification},
    {"Fredholm", fredholm},
    {"bifurcation", bifurcation},
    {"small solutions", small_solutions},
    {"Hardy stability", hardy_stability}};

  int failed = 0;
  for (std::size_t j = 0; j < criteria.size(); ++j)
    {
      Outcome o;
      try
        {
          o = criteria[j].second();
        }
      catch (const std::exception &e)
        {
          o = {false, std::string("exception: ") + e.what()};
        }
      failed += !o.pass;
      std::printf("criterion %2zu %s: %s (%s)\n", j + 1, o.pass ? "PASS" : "FAIL", criteria[j].first,
                  o.detail.c_str());
      std::fflush(stdout);
    }
  return failed == 0 ? 0 : 1;
}
