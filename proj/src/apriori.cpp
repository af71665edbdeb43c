#include "fplap/apriori.hpp"

#include "fplap/gagliardo.hpp"
#include "fplap/parallel.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace fpl {

void validate(const GrowthSpec &spec, const SpaceParams &params)
{
  validate(params);
  if (spec.terms.empty())
    throw ValidationError("growth spec: at least one term required");
  const double ps = critical_exponent(params);
  for (std::size_t i = 0; i < spec.terms.size(); ++i)
    {
      const GrowthTerm &t = spec.terms[i];
      std::ostringstream where;
      where << "growth term " << i << ": ";
      if (!(t.q >= 1.) || !(t.q < ps))
        throw ValidationError(where.str() + "q must lie in [1, p_s*)");
      if (!(t.r > 1.))
        throw ValidationError(where.str() + "r must exceed 1");
      if (!(t.a >= 0. && t.a <= 1.))
        throw ValidationError(where.str() + "a must lie in [0, 1]");
      const double lhs = 1. / t.r + t.a / params.p + (std::max(params.p, t.q) - t.a) / ps;
      if (!(lhs < 1.))
        throw ValidationError(where.str() +
                              "violates 1/r + a/p + (max{p,q} - a)/p_s* < 1");
    }
}

double compute_qtilde(const GrowthSpec &spec, const SpaceParams &params)
{
  validate(spec, params);
  double best = 0.;
  for (const GrowthTerm &t : spec.terms)
    {
      const double den = 1. - 1. / t.r - t.a / params.p;
      const double qt  = (std::max(params.p, t.q) - t.a) / den;
      best             = std::max(best, qt);
    }
  return best;
}

DeGiorgiTrace degiorgi_trace(const Vector &u, const Domain1D &domain, double k_star, double q_tilde, int n_max)
{
  if (!(k_star > 0.))
    throw ValidationError("De Giorgi trace: k* must be positive");
  if (n_max < 1)
    throw ValidationError("De Giorgi trace: n_max must be at least 1");
  if (u.size() != domain.size())
    throw ValidationError("De Giorgi trace: grid function does not match the grid");

  DeGiorgiTrace tr;
  tr.k_star  = k_star;
  tr.q_tilde = q_tilde;
  tr.levels.resize(n_max + 1);
  tr.masses.resize(n_max + 1);
  const double w = domain.cell_weight();
  for (int n = 0; n <= n_max; ++n)
    {
      const double k = k_star * (2. - std::ldexp(1., -n));
      double       z = 0.;
      for (int i = 0; i < u.size(); ++i)
        if (u[i] > k)
          z += std::pow(u[i] - k, q_tilde);
      tr.levels[n] = k;
      tr.masses[n] = w * z;
    }
  const double z0 = tr.masses.front();
  tr.converged    = z0 == 0. || tr.masses.back() < z_relative_threshold * z0;
  return tr;
}

ChainReport check_chain(const Vector &u, const Domain1D &domain, const DeGiorgiTrace &trace)
{
  ChainReport  rep;
  const double w  = domain.cell_weight();
  const double ks = trace.k_star;
  const double qt = trace.q_tilde;
  const int    nl = static_cast<int>(trace.levels.size());
  for (int n = 0; n + 1 < nl; ++n)
    {
      const double kn  = trace.levels[n];
      const double kn1 = trace.levels[n + 1];
      if (!(kn < kn1 && kn1 < 2. * ks && kn >= ks))
        rep.levels_increasing = false;
      if (trace.masses[n + 1] > trace.masses[n])
        rep.masses_monotone = false;

      int          count = 0;
      const double amp   = std::ldexp(1., n + 2) - 1.;
      for (int i = 0; i < u.size(); ++i)
        {
          const double wn  = std::max(u[i] - kn, 0.);
          const double wn1 = std::max(u[i] - kn1, 0.);
          if (wn1 > wn)
            rep.truncation_order = false;
          if (u[i] > kn1)
            {
              ++count;
              if (!(u[i] < amp * wn))
                rep.truncation_bound = false;
            }
        }
      const double lhs = w * count;
      const double rhs = std::pow(2., (n + 1) * qt) / std::pow(ks, qt) * trace.masses[n];
      // the sum behind Z_n carries rounding of relative order n*eps
      if (lhs > rhs * (1. + 1e-12))
        rep.mass_comparison = false;
    }
  return rep;
}

namespace {

bool certifies(const Vector &u_hat, const Domain1D &domain, double c, double q_tilde, int n_max)
{
  if (!(u_hat.maxCoeff() <= 2. * c))
    return false;
  const DeGiorgiTrace tr = degiorgi_trace(u_hat, domain, c, q_tilde, n_max);
  if (!tr.converged)
    return false;
  for (std::size_t n = 0; n + 1 < tr.masses.size(); ++n)
    if (tr.masses[n + 1] > tr.masses[n])
      return false;
  return true;
}

/// Smallest normalized level c in (0, 1/2 (1+1e-9)] certifying u_hat, where
/// max|u_hat| = 1. Returns 0 when u_hat <= 0.
double bisect_level(const Vector &u_hat, const Domain1D &domain, double q_tilde, int n_max)
{
  if (!(u_hat.maxCoeff() > 0.))
    return 0.;
  double lo = 0.;
  double hi = 0.5 * (1. + 1e-9);
  if (!certifies(u_hat, domain, hi, q_tilde, n_max))
    hi = 1.;  // unreachable for a normalized grid function; kept as a safe bracket
  // quadrisection: the three interior candidates are independent
  for (int round = 0; round < 40 && hi - lo > 1e-15; ++round)
    {
      std::array<double, 3> cand{};
      std::array<int, 3>    ok{};
      for (int j = 0; j < 3; ++j)
        cand[j] = lo + (hi - lo) * (j + 1) / 4.;
      parallel_for(3, [&](int j) { ok[j] = certifies(u_hat, domain, cand[j], q_tilde, n_max) ? 1 : 0; });
      double new_lo = cand[2];
      double new_hi = hi;
      for (int j = 2; j >= 0; --j)
        if (ok[j])
          {
            new_hi = cand[j];
            new_lo = j == 0 ? lo : cand[j - 1];
          }
      lo = new_lo;
      hi = new_hi;
    }
  return hi;
}

} // namespace

double find_kstar(const Vector &u, const Domain1D &domain, double q_tilde, int n_max)
{
  if (u.size() != domain.size())
    throw ValidationError("find_kstar: grid function does not match the grid");
  const double m = u.cwiseAbs().maxCoeff();
  if (!(m > 0.))
    throw ValidationError("find_kstar: u must be nonzero");
  const Vector u_hat = u / m;
  const double c     = std::max(bisect_level(u_hat, domain, q_tilde, n_max),
                            bisect_level(-u_hat, domain, q_tilde, n_max));
  return c * m;
}

ScalingFit scaling_fit(const std::vector<Vector> &solutions, const Domain1D &domain, double q_tilde)
{
  ScalingFit fit;
  const int  m = static_cast<int>(solutions.size());
  if (m < 5)
    return fit;

  Vector x(m), y(m);
  for (int j = 0; j < m; ++j)
    {
      const double lq = lq_norm(solutions[j], domain, q_tilde);
      const double li = solutions[j].cwiseAbs().maxCoeff();
      if (!(lq > 0.) || !(li > 0.))
        return fit;
      x[j] = std::log(lq);
      y[j] = std::log(li);
    }
  if (x.maxCoeff() - x.minCoeff() < 2. * std::log(10.))
    return fit;

  const bool has_low  = (x.array() < 0.).any();
  const bool has_high = (x.array() > 0.).any();
  Vector     coef;
  if (has_low && has_high)
    {
      Matrix X(m, 3);
      for (int j = 0; j < m; ++j)
        X.row(j) << 1., std::min(x[j], 0.), std::max(x[j], 0.);
      coef           = X.colPivHouseholderQr().solve(y);
      fit.gamma_low  = coef[1];
      fit.gamma_high = coef[2];
      fit.fit_residual = std::sqrt((X * coef - y).squaredNorm() / m);
    }
  else
    {
      // one regime only: a single slope serves both
      Matrix X(m, 2);
      X.col(0).setOnes();
      X.col(1) = x;
      coef             = X.colPivHouseholderQr().solve(y);
      fit.gamma_low    = coef[1];
      fit.gamma_high   = coef[1];
      fit.fit_residual = std::sqrt((X * coef - y).squaredNorm() / m);
    }

  double log_c = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j)
    log_c = std::max(log_c, y[j] - std::max(fit.gamma_low * x[j], fit.gamma_high * x[j]));
  fit.log_c = log_c;

  bool envelope = std::isfinite(log_c);
  for (int j = 0; j < m && envelope; ++j)
    envelope = y[j] <= log_c + std::max(fit.gamma_low * x[j], fit.gamma_high * x[j]);
  fit.verdict = envelope && fit.gamma_low > 0. && fit.gamma_high > 0. ? Verdict::yes : Verdict::no;
  return fit;
}

} // namespace fpl
