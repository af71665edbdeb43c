#pragma once

#include "fplap/errors.hpp"
#include "fplap/grid.hpp"
#include "fplap/weights.hpp"

#include <vector>

namespace fpl {

/// One growth term |f(x,t)| <= h_i |t|^{q_i-1} with h_i rho^{s a_i} in L^{r_i}.
struct GrowthTerm
{
  double q = 2.;
  double r = 2.;
  double a = 0.;
};

struct GrowthSpec
{
  std::vector<GrowthTerm> terms;
};

/// Checks q_i in [1, p_s*), r_i > 1, a_i in [0,1] and
/// 1/r_i + a_i/p + (max{p,q_i} - a_i)/p_s* < 1 for every term.
void validate(const GrowthSpec &spec, const SpaceParams &params);

/// max_i (max{p,q_i} - a_i) / (1 - 1/r_i - a_i/p)
double compute_qtilde(const GrowthSpec &spec, const SpaceParams &params);

struct DeGiorgiTrace
{
  double              k_star    = 0.;
  double              q_tilde   = 0.;
  std::vector<double> levels;  ///< k_n = k*(2 - 2^{-n}), n = 0..n_max
  std::vector<double> masses;  ///< Z_n = int_{u > k_n} (u - k_n)^q~
  bool                converged = false;
};

constexpr int    default_n_max       = 40;
constexpr double z_relative_threshold = 1e-14;

DeGiorgiTrace degiorgi_trace(const Vector   &u,
                             const Domain1D &domain,
                             double          k_star,
                             double          q_tilde,
                             int             n_max = default_n_max);

/// Pointwise checks of the level-set chain on a trace:
///   |A_{k_{n+1}}| <= 2^{(n+1)q~} / k*^q~ * Z_n
///   w_{n+1} <= w_n
///   u < (2^{n+2} - 1) w_n on A_{k_{n+1}}
/// with w_n = (u - k_n)_+.
struct ChainReport
{
  bool levels_increasing = true;
  bool masses_monotone   = true;
  bool mass_comparison   = true;
  bool truncation_order  = true;
  bool truncation_bound  = true;

  bool ok() const
  {
    return levels_increasing && masses_monotone && mass_comparison && truncation_order &&
           truncation_bound;
  }
};

ChainReport check_chain(const Vector &u, const Domain1D &domain, const DeGiorgiTrace &trace);

/// Smallest k* (up to bisection resolution) whose trace converges with
/// nonincreasing masses and satisfies max(u) <= 2k*; runs on u and -u and
/// returns the larger value, so that max|u| <= 2k*.
double find_kstar(const Vector   &u,
                  const Domain1D &domain,
                  double          q_tilde,
                  int             n_max = default_n_max);

struct ScalingFit
{
  Verdict verdict      = Verdict::inconclusive;
  double  gamma_low    = 0.;
  double  gamma_high   = 0.;
  double  log_c        = 0.;  ///< envelope constant: log C
  double  fit_residual = 0.;  ///< rms of the piecewise-linear fit in log-log
};

/// Fits log|u|_inf = c + g1 min(x,0) + g2 max(x,0), x = log|u|_q~, and tests the
/// envelope |u|_inf <= C max(|u|_q~^g1, |u|_q~^g2) with the smallest such C.
/// Inconclusive with fewer than 5 solutions or less than 2 decades of spread.
ScalingFit scaling_fit(const std::vector<Vector> &solutions, const Domain1D &domain, double q_tilde);

} // namespace fpl
