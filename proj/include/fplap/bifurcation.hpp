#pragma once

#include "fplap/nonlinear.hpp"

#include <optional>
#include <vector>

namespace fpl {

struct BranchPoint
{
  double lambda   = 0.;
  Vector u;
  double norm     = 0.;  ///< ||u||
  double residual = 0.;  ///< dual norm of A(u) - lambda h phi_p(u) - f(x,u)
  double arc_step = 0.;  ///< E-distance to the previous point (0 for the first)
};

enum class BranchStatus
{
  max_steps,
  norm_limit,
  lambda_limit,
  step_underflow
};

const char *to_string(BranchStatus s);

struct Branch
{
  std::vector<BranchPoint> points;
  double                   step   = 0.;
  BranchStatus             status = BranchStatus::max_steps;
};

struct ContinuationOptions
{
  double                step       = 0.01;
  double                min_step   = 1e-6;
  double                tol        = 1e-10;
  double                epsilon    = 1e-2;  ///< amplitude ||u|| of the start point
  double                norm_limit = 1e3;
  double                lambda_box = 10.;   ///< lambda must stay in [0, lambda_box * lambda_2]
  int                   newton_iter = 30;
  std::optional<double> lambda2;
};

/// ||(lambda, u)||_E = (lambda^2 + ||u||^2)^{1/2}
double e_norm(double lambda, const Vector &u, const KernelMatrix &kernel);

/// Dual norm of F_lambda(t d) divided by t^{p-1}, where F_lambda collects the
/// terms of rhs other than the lambda h phi_p coupling and the forcing.
/// Requires ||d|| = 1 and t > 0.
double small_norm_ratio(const DiscreteRhs &rhs, double t, const Vector &direction, const KernelMatrix &kernel);

struct SlopeFit
{
  double slope     = 0.;
  bool   monotone  = false;  ///< ratio decreases as t decreases
  std::vector<double> t;
  std::vector<double> ratio;
};

/// Least-squares slope of log ratio against log t on a log grid in [t_lo, t_hi].
SlopeFit small_norm_slope(const DiscreteRhs &rhs,
                          const Vector      &direction,
                          const KernelMatrix &kernel,
                          double             t_lo  = 1e-3,
                          double             t_hi  = 1e-1,
                          int                count = 9);

/// Newton solve of A(u) = lambda h phi_p(u) + f(x,u) at fixed lambda.
/// Returns nullopt when the residual does not drop below tol.
std::optional<BranchPoint> solve_at_lambda(const DiscreteRhs  &rhs,
                                           double              lambda,
                                           Vector              guess,
                                           const KernelMatrix &kernel,
                                           double              tol,
                                           int                 max_iter = 50);

/// Point on the branch near (lambda_1, epsilon e1 / ||e1||): lambda_1 and the
/// component along e1 are predicted from the eigenpair, the remainder is
/// corrected on the hyperplane orthogonal to (0, e1). A negative epsilon
/// gives the mirrored start.
BranchPoint branch_start(const DiscreteRhs        &rhs,
                         const EigenPair          &e1,
                         const KernelMatrix       &kernel,
                         const ContinuationOptions &opts = {});

/// Pseudo-arclength continuation in the E-norm with a secant predictor (the
/// first step follows (0, start.u / ||start.u||)) and a damped Newton
/// corrector on the bordered system.
Branch continue_branch(const DiscreteRhs        &rhs,
                       const BranchPoint        &start,
                       int                       steps,
                       const KernelMatrix       &kernel,
                       const ContinuationOptions &opts = {});

struct BifurcationReport
{
  Verdict verdict     = Verdict::inconclusive;
  double  lambda0     = 0.;
  double  deviation   = 0.;  ///< |lambda0 - lambda1| / lambda1
  int     points_used = 0;
};

/// Linear extrapolation of lambda against ||u|| to ||u|| = 0 over the points
/// with ||u|| < small_norm (at least 5). Verdict yes when the deviation is
/// below tolerance.
BifurcationReport detect_bifurcation(const Branch &branch,
                                     double        lambda1,
                                     double        tolerance  = 0.01,
                                     double        small_norm = 0.1);

} // namespace fpl
