#include "fplap/bifurcation.hpp"

#include <Eigen/LU>

#include <cmath>

namespace fpl {

const char *to_string(BranchStatus s)
{
  switch (s)
    {
      case BranchStatus::max_steps:
        return "max_steps";
      case BranchStatus::norm_limit:
        return "norm_limit";
      case BranchStatus::lambda_limit:
        return "lambda_limit";
      default:
        return "step_underflow";
    }
}

double e_norm(double lambda, const Vector &u, const KernelMatrix &kernel)
{
  const double n = norm(u, kernel);
  return std::sqrt(lambda * lambda + n * n);
}

double small_norm_ratio(const DiscreteRhs &rhs, double t, const Vector &direction, const KernelMatrix &kernel)
{
  if (!(t > 0.))
    throw ValidationError("small-norm ratio: t must be positive");
  if (std::abs(norm(direction, kernel) - 1.) > 1e-9)
    throw ValidationError("small-norm ratio: direction must have unit norm");
  const DiscreteRhs terms = rhs.terms_only();
  const Vector      F     = terms.evaluate(Vector(t * direction));
  return dual_norm(F, kernel).value / std::pow(t, kernel.p() - 1.);
}

SlopeFit small_norm_slope(const DiscreteRhs &rhs, const Vector &direction, const KernelMatrix &kernel, double t_lo, double t_hi, int count)
{
  if (count < 2 || !(t_lo > 0.) || !(t_hi > t_lo))
    throw ValidationError("small-norm slope: need 0 < t_lo < t_hi and at least two samples");
  SlopeFit fit;
  double   sx = 0., sy = 0., sxx = 0., sxy = 0.;
  int      used = 0;
  for (int k = 0; k < count; ++k)
    {
      const double t = t_lo * std::pow(t_hi / t_lo, static_cast<double>(k) / (count - 1));
      const double r = small_norm_ratio(rhs, t, direction, kernel);
      fit.t.push_back(t);
      fit.ratio.push_back(r);
      if (r > 0.)
        {
          const double x = std::log(t), y = std::log(r);
          sx += x;
          sy += y;
          sxx += x * x;
          sxy += x * y;
          ++used;
        }
    }
  if (used >= 2)
    fit.slope = (used * sxy - sx * sy) / (used * sxx - sx * sx);
  fit.monotone = true;
  for (std::size_t k = 1; k < fit.ratio.size(); ++k)
    if (!(fit.ratio[k - 1] < fit.ratio[k]))
      fit.monotone = false;
  return fit;
}

namespace {

struct System
{
  const DiscreteRhs  &rhs;
  const KernelMatrix &kernel;
  double              w;

  /// Euclidean residual w (A(u) - lambda h phi_p(u) - f(x,u)).
  Vector residual(const Vector &u, double lambda) const
  {
    return w * (apply_A(u, kernel) - rhs.with_lambda(lambda).evaluate(u));
  }
  Matrix jac_u(const Vector &u, double lambda) const
  {
    const DiscreteRhs r   = rhs.with_lambda(lambda);
    Matrix            jac = jacobian_A(u, kernel);
    for (int i = 0; i < u.size(); ++i)
      jac(i, i) -= w * r.derivative(i, u[i]);
    return jac;
  }
  /// d/dlambda of the residual: -w h phi_p(u)
  Vector jac_lambda(const Vector &u) const
  {
    Vector out(u.size());
    for (int i = 0; i < u.size(); ++i)
      out[i] = -w * rhs.coupling_weight()[i] * phi(u[i], kernel.p());
    return out;
  }
  double merit(const Vector &R) const { return std::sqrt(std::max(0., R.dot(kernel.solve_gram(R)))); }
};

/// Newton on R(u, lambda) = 0 together with the linear constraint
/// c_lambda (lambda - lambda_ref) + c_u . (u - u_ref) = 0.
bool bordered_newton(const System &sys,
                     Vector       &u,
                     double       &lambda,
                     const Vector &c_u,
                     double        c_lambda,
                     const Vector &u_ref,
                     double        lambda_ref,
                     double        tol,
                     int           max_iter)
{
  const int n    = static_cast<int>(u.size());
  auto      cons = [&](const Vector &uu, double ll) { return c_lambda * (ll - lambda_ref) + c_u.dot(uu - u_ref); };
  Vector    R    = sys.residual(u, lambda);
  double    m    = sys.merit(R);
  double    c    = cons(u, lambda);
  const double cscale = std::max(1., std::abs(c_lambda) + c_u.cwiseAbs().maxCoeff());
  for (int it = 0; it < max_iter; ++it)
    {
      if (m < 0.1 * tol && std::abs(c) < 1e-13 * cscale)
        return true;
      Matrix B(n + 1, n + 1);
      B.topLeftCorner(n, n)     = sys.jac_u(u, lambda);
      B.topRightCorner(n, 1)    = sys.jac_lambda(u);
      B.bottomLeftCorner(1, n)  = c_u.transpose();
      B(n, n)                   = c_lambda;
      Vector rhs(n + 1);
      rhs.head(n) = -R;
      rhs[n]      = -c;
      const Vector d = Eigen::PartialPivLU<Matrix>(B).solve(rhs);
      if (!d.allFinite())
        return false;
      double tau      = 1.;
      bool   accepted = false;
      const double m0 = std::hypot(m, c);
      for (int h = 0; h < 30; ++h)
        {
          const Vector ut = u + tau * d.head(n);
          const double lt = lambda + tau * d[n];
          const Vector Rt = sys.residual(ut, lt);
          const double mt = sys.merit(Rt);
          const double ct = cons(ut, lt);
          if (std::isfinite(mt) && std::hypot(mt, ct) < (1. - 1e-4 * tau) * m0)
            {
              u        = ut;
              lambda   = lt;
              R        = Rt;
              m        = mt;
              c        = ct;
              accepted = true;
              break;
            }
          tau *= 0.5;
        }
      if (!accepted)
        return m < 0.1 * tol && std::abs(c) < 1e-10 * cscale;
    }
  return m < 0.1 * tol && std::abs(c) < 1e-13 * cscale;
}

BranchPoint make_point(const DiscreteRhs &rhs, double lambda, const Vector &u, const KernelMatrix &kernel)
{
  BranchPoint pt;
  pt.lambda   = lambda;
  pt.u        = u;
  pt.norm     = norm(u, kernel);
  pt.residual = residual(u, rhs.with_lambda(lambda), kernel).norm;
  return pt;
}

double lambda_upper(const DiscreteRhs &rhs, const KernelMatrix &kernel, const ContinuationOptions &opts)
{
  if (opts.lambda2)
    return *opts.lambda2;
  const OperatorContext ctx(kernel, rhs.coupling_weight());
  if (kernel.p() == 2.)
    return oracle_spectrum_p2(ctx).at(1).lambda;
  const EigenPair e1 = solve_first(ctx);
  return solve_second(ctx, initial_path(ctx, e1.u)).lambda2;
}

} // namespace

std::optional<BranchPoint> solve_at_lambda(const DiscreteRhs &rhs, double lambda, Vector guess, const KernelMatrix &kernel, double tol, int max_iter)
{
  const System sys{rhs, kernel, kernel.domain().cell_weight()};
  Vector       R = sys.residual(guess, lambda);
  double       m = sys.merit(R);
  for (int it = 0; it < max_iter && m >= 0.1 * tol; ++it)
    {
      const Vector d = Eigen::PartialPivLU<Matrix>(sys.jac_u(guess, lambda)).solve(-R);
      if (!d.allFinite())
        break;
      double tau = 1.;
      bool   ok  = false;
      for (int h = 0; h < 30; ++h)
        {
          const Vector trial = guess + tau * d;
          const Vector Rt    = sys.residual(trial, lambda);
          const double mt    = sys.merit(Rt);
          if (std::isfinite(mt) && mt < (1. - 1e-4 * tau) * m)
            {
              guess = trial;
              R     = Rt;
              m     = mt;
              ok    = true;
              break;
            }
          tau *= 0.5;
        }
      if (!ok)
        break;
    }
  BranchPoint pt = make_point(rhs, lambda, guess, kernel);
  if (!(pt.residual <= tol))
    return std::nullopt;
  return pt;
}

BranchPoint branch_start(const DiscreteRhs &rhs, const EigenPair &e1, const KernelMatrix &kernel, const ContinuationOptions &opts)
{
  if (e1.u.size() != kernel.size())
    throw ValidationError("branch start: eigenfunction does not match the grid");
  if (opts.epsilon == 0.)
    throw ValidationError("branch start: epsilon must be nonzero");
  const Vector d      = e1.u / norm(e1.u, kernel);
  Vector       u      = opts.epsilon * d;
  double       lambda = e1.lambda;
  const System sys{rhs, kernel, kernel.domain().cell_weight()};
  const Vector u_ref  = u;
  // hyperplane orthogonal to the tangent surrogate (0, d)
  const Vector c_u = kernel.gram() * d;
  if (!bordered_newton(sys, u, lambda, c_u, 0., u_ref, lambda, opts.tol, opts.newton_iter))
    throw ConvergenceError("branch start: corrector did not converge");
  BranchPoint pt = make_point(rhs, lambda, u, kernel);
  if (!(pt.residual <= opts.tol))
    throw ConvergenceError("branch start: residual above tolerance");
  return pt;
}

Branch continue_branch(const DiscreteRhs &rhs, const BranchPoint &start, int steps, const KernelMatrix &kernel, const ContinuationOptions &opts)
{
  if (start.u.size() != kernel.size())
    throw ValidationError("continuation: start point does not match the grid");
  if (!(start.residual < opts.tol))
    throw ValidationError("continuation: start residual must be below tolerance");
  if (!(opts.step > 0.) || steps < 0)
    throw ValidationError("continuation: step must be positive and steps nonnegative");

  const System sys{rhs, kernel, kernel.domain().cell_weight()};
  const double lam_max = opts.lambda_box * lambda_upper(rhs, kernel, opts);
  const Matrix &G      = kernel.gram();
  auto g_norm          = [&](double dl, const Vector &du) { return std::sqrt(dl * dl + du.dot(G * du)); };

  Branch branch;
  branch.step = opts.step;
  branch.points.push_back(start);
  branch.points.front().arc_step = 0.;

  // tangent surrogate for the first step
  double t_lambda = 0.;
  Vector t_u      = start.u / std::sqrt(start.u.dot(G * start.u));
  double ds       = opts.step;

  while (static_cast<int>(branch.points.size()) <= steps)
    {
      const BranchPoint &prev = branch.points.back();
      const double       lp   = prev.lambda + ds * t_lambda;
      const Vector       up   = prev.u + ds * t_u;
      double             lam  = lp;
      Vector             u    = up;
      const bool ok = bordered_newton(sys, u, lam, G * t_u, t_lambda, up, lp, opts.tol, opts.newton_iter);

      bool accepted = false;
      if (ok)
        {
          BranchPoint  pt   = make_point(rhs, lam, u, kernel);
          const double dist = e_norm(lam - prev.lambda, Vector(u - prev.u), kernel);
          if (pt.residual <= opts.tol && dist >= 0.5 * ds && dist <= 2. * ds)
            {
              pt.arc_step = dist;
              // secant tangent in the G metric
              const double dl = lam - prev.lambda;
              const Vector du = u - prev.u;
              const double gn = g_norm(dl, du);
              t_lambda        = dl / gn;
              t_u             = du / gn;
              branch.points.push_back(std::move(pt));
              accepted = true;
            }
        }
      if (!accepted)
        {
          ds *= 0.5;
          if (ds < opts.min_step)
            {
              branch.status = BranchStatus::step_underflow;
              return branch;
            }
          continue;
        }
      ds = std::min(2. * ds, opts.step);

      const BranchPoint &last = branch.points.back();
      if (last.norm > opts.norm_limit)
        {
          branch.status = BranchStatus::norm_limit;
          return branch;
        }
      if (last.lambda < 0. || last.lambda > lam_max)
        {
          branch.status = BranchStatus::lambda_limit;
          return branch;
        }
    }
  branch.status = BranchStatus::max_steps;
  return branch;
}

BifurcationReport detect_bifurcation(const Branch &branch, double lambda1, double tolerance, double small_norm)
{
  BifurcationReport rep;
  double            sx = 0., sy = 0., sxx = 0., sxy = 0.;
  int               m  = 0;
  for (const BranchPoint &pt : branch.points)
    if (pt.norm < small_norm)
      {
        sx += pt.norm;
        sy += pt.lambda;
        sxx += pt.norm * pt.norm;
        sxy += pt.norm * pt.lambda;
        ++m;
      }
  rep.points_used = m;
  if (m < 5)
    return rep;
  const double den = m * sxx - sx * sx;
  if (!(den > 0.))
    return rep;
  const double slope = (m * sxy - sx * sy) / den;
  rep.lambda0        = (sy - slope * sx) / m;
  rep.deviation      = std::abs(rep.lambda0 - lambda1) / lambda1;
  rep.verdict        = rep.deviation < tolerance ? Verdict::yes : Verdict::no;
  return rep;
}

} // namespace fpl
