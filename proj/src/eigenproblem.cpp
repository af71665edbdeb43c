#include "fplap/eigenproblem.hpp"

#include "fplap/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace fpl {

namespace {

// One preconditioned descent step for the Rayleigh quotient at a normalized
// point. Returns false when no step size lowers the energy.
struct DescentPoint
{
  Vector u;
  double lambda = 0.;
  double tau    = 1.;
  /// sqrt(r^T G^{-1} r) for the Euclidean residual r; equivalent to the dual
  /// norm and exact for p = 2.
  double proxy = 0.;
};

double residual_proxy(const Vector &u, double lambda, const OperatorContext &ctx)
{
  const double w = ctx.domain().cell_weight();
  const Vector r = w * (apply_A(u, ctx.kernel) - lambda * apply_H(u, ctx));
  return std::sqrt(std::max(0., r.dot(ctx.kernel.solve_gram(r))));
}

/// Gram-preconditioned step by default; with local_metric the direction is
/// (p-1) J_A(u)^{-1} r, which at p = 2 is inverse iteration and otherwise its
/// nonlinear analogue (J_A(u) u = (p-1) h A(u) by homogeneity).
bool descent_step(DescentPoint &pt, const OperatorContext &ctx, bool keep_positive, bool local_metric = false)
{
  const double w = ctx.domain().cell_weight();
  const Vector r = w * (apply_A(pt.u, ctx.kernel) - pt.lambda * apply_H(pt.u, ctx));
  Vector       d = ctx.kernel.solve_gram(r);
  pt.proxy       = std::sqrt(std::max(0., r.dot(d)));
  if (pt.proxy == 0.)
    return false;

  double scale = 1.;
  if (local_metric)
    {
      Eigen::LDLT<Matrix> J(jacobian_A(pt.u, ctx.kernel));
      if (J.info() != Eigen::Success)
        return false;
      d = (ctx.p() - 1.) * J.solve(r);
      if (!d.allFinite())
        return false;
    }
  else
    {
      // keep the search direction commensurate with u
      scale = std::sqrt(pt.u.dot(ctx.kernel.gram() * pt.u)) / std::sqrt(d.dot(ctx.kernel.gram() * d));
    }
  // Near the minimizer the quotient is flat to second order in the residual,
  // so energy changes drown in rounding; there the residual decides.
  const double flat = 8. * std::numeric_limits<double>::epsilon() * std::abs(pt.lambda);
  for (int halving = 0; halving < 60; ++halving)
    {
      Vector trial = pt.u - pt.tau * std::min(1., scale) * d;
      if (keep_positive)
        trial = trial.cwiseAbs();
      if (weighted_power(trial, ctx) > 0.)
        {
          trial            = project_to_constraint(trial, ctx);
          const double lam = energy(trial, ctx.kernel);
          const bool   ok  = lam < pt.lambda - flat ||
                          (lam <= pt.lambda + flat && residual_proxy(trial, lam, ctx) < pt.proxy);
          if (ok)
            {
              pt.u      = std::move(trial);
              pt.lambda = lam;
              pt.tau    = std::min(2. * pt.tau, 1.);
              return true;
            }
        }
      pt.tau *= 0.5;
    }
  pt.tau = 1.;
  return false;
}

Vector positive_bump(const OperatorContext &ctx, std::uint64_t seed)
{
  std::mt19937_64                  rng(seed);
  std::uniform_real_distribution<> U(0.5, 1.5);
  const int                        n = ctx.kernel.size();
  Vector                           u = Vector::Zero(n);
  for (int i = 0; i < n; ++i)
    {
      const double draw = U(rng);
      if (ctx.weight[i] > 0.)
        u[i] = draw;
    }
  return u;
}

double weighted_l2(const Vector &a, const Vector &b, double w)
{
  return std::sqrt(w * (a - b).squaredNorm());
}

} // namespace

double weighted_power(const Vector &u, const OperatorContext &ctx)
{
  const double p = ctx.p();
  double       s = 0.;
  for (int i = 0; i < u.size(); ++i)
    s += ctx.weight[i] * std::pow(std::abs(u[i]), p);
  return ctx.domain().cell_weight() * s;
}

Vector project_to_constraint(const Vector &u, const OperatorContext &ctx)
{
  const double c = weighted_power(u, ctx);
  if (!(c > 0.))
    throw ValidationError("constraint projection undefined: int h|u|^p <= 0");
  return u / std::pow(c, 1. / ctx.p());
}

double eigen_residual(double lambda, const Vector &u, const OperatorContext &ctx)
{
  const Vector F = apply_A(u, ctx.kernel) - lambda * apply_H(u, ctx);
  return dual_norm(F, ctx.kernel).value;
}

double eigen_residual(const EigenPair &pair, const OperatorContext &ctx)
{
  return eigen_residual(pair.lambda, pair.u, ctx);
}

EigenPair solve_first(const OperatorContext &ctx, const SolverOptions &opts)
{
  if (!(ctx.weight.maxCoeff() > 0.))
    throw ValidationError("first eigenpair: weight must be positive at some node");

  constexpr int max_restarts = 5;
  for (int attempt = 0; attempt < max_restarts; ++attempt)
    {
      DescentPoint pt;
      pt.u      = project_to_constraint(positive_bump(ctx, opts.seed + 7919 * attempt), ctx);
      pt.lambda = energy(pt.u, ctx.kernel);
      pt.tau    = opts.step0;

      int  it      = 0;
      bool stalled = false;
      bool local   = false;
      for (; it < opts.max_iter; ++it)
        {
          if (!descent_step(pt, ctx, true, local))
            {
              if (local || ctx.p() == 2.)
                {
                  stalled = true;
                  break;
                }
              local = true;  // polish in the local metric once the Gram steps stall
              continue;
            }
          if (pt.proxy < 0.1 * opts.tol)
            break;
          if (!local && ctx.p() != 2. && it >= 200)
            local = true;
        }

      EigenPair out;
      out.u             = pt.u;
      out.lambda        = energy(pt.u, ctx.kernel);
      out.normalization = weighted_power(pt.u, ctx);
      out.iterations    = it;
      if (out.u.sum() < 0.)
        out.u = -out.u;
      out.residual = eigen_residual(out, ctx);
      if (out.residual <= opts.tol || (stalled && out.residual <= 10. * opts.tol))
        return out;
      if (it >= opts.max_iter)
        {
          std::ostringstream msg;
          msg << "first eigenpair: no convergence in " << opts.max_iter
              << " iterations (residual " << out.residual << ")";
          throw ConvergenceError(msg.str());
        }
      // stalled above tolerance: restart from a fresh bump
    }
  throw ConvergenceError("first eigenpair: all restarts failed");
}

SimplicityReport check_simplicity(const OperatorContext &ctx, int trials, const SolverOptions &opts)
{
  SimplicityReport report;
  report.trials = trials;
  std::vector<Vector> mins(trials);
  std::vector<int>    ok(trials, 0);
  parallel_for(trials, [&](int k) {
    SolverOptions o = opts;
    o.seed          = opts.seed + 1000003ULL * static_cast<std::uint64_t>(k);
    try
      {
        mins[k] = solve_first(ctx, o).u;
        ok[k]   = 1;
      }
    catch (const ConvergenceError &)
      {
      }
  });
  if (std::find(ok.begin(), ok.end(), 0) != ok.end())
    return report;

  report.min_alignment = 1.;
  for (int i = 0; i < trials; ++i)
    for (int j = i + 1; j < trials; ++j)
      {
        const double c = std::abs(mins[i].dot(mins[j])) / (mins[i].norm() * mins[j].norm());
        report.min_alignment = std::min(report.min_alignment, c);
      }
  report.verdict = report.min_alignment >= 1. - 1e-6 ? Verdict::yes : Verdict::no;
  return report;
}

OddPath initial_path(const OperatorContext &ctx, const Vector &e1, int m)
{
  if (m < 4 || m % 2 != 0)
    throw ValidationError("odd path: even m >= 4 required");
  const Domain1D &dom = ctx.domain();
  const double    w   = dom.cell_weight();

  Vector dir = dom.nodes().array() - dom.midpoint();
  // h-orthogonalize against e1
  const Vector he1 = ctx.weight.cwiseProduct(e1);
  dir -= (w * dir.dot(he1)) / (w * e1.dot(he1)) * e1;
  dir = project_to_constraint(dir, ctx);
  const Vector base = project_to_constraint(e1, ctx);

  OddPath path;
  path.points.resize(m);
  const int half = m / 2;
  for (int k = 0; k < half; ++k)
    {
      const double theta = std::numbers::pi * k / half;
      path.points[k]     = project_to_constraint(std::cos(theta) * base + std::sin(theta) * dir, ctx);
      path.points[k + half] = -path.points[k];
    }
  return path;
}

OddPath refine_path(const OddPath &path, const OperatorContext &ctx)
{
  const int m    = path.size();
  const int half = m;
  OddPath   out;
  out.points.resize(2 * m);
  for (int k = 0; k < m / 2; ++k)
    {
      out.points[2 * k]     = path.points[k];
      out.points[2 * k + 1] = project_to_constraint(0.5 * (path.points[k] + path.points[k + 1]), ctx);
    }
  for (int k = 0; k < half; ++k)
    out.points[k + half] = -out.points[k];
  return out;
}

bool is_admissible(const OddPath &path, const OperatorContext &ctx, double tol)
{
  const int m = path.size();
  if (m < 4 || m % 2 != 0)
    return false;
  for (int k = 0; k < m; ++k)
    {
      if (std::abs(weighted_power(path.points[k], ctx) - 1.) > tol)
        return false;
      if (k < m / 2 && path.points[k + m / 2] != -path.points[k])
        return false;
    }
  return true;
}

SecondEigenResult solve_second(const OperatorContext &ctx, const OddPath &path, const SolverOptions &opts)
{
  if (!is_admissible(path, ctx))
    throw ValidationError("second eigenvalue: initial path must be odd and normalized");

  const int    m    = path.size();
  const int    half = m / 2;
  const double w    = ctx.domain().cell_weight();

  std::vector<DescentPoint> pts(half);
  for (int k = 0; k < half; ++k)
    {
      pts[k].u      = path.points[k];
      pts[k].lambda = energy(pts[k].u, ctx.kernel);
      pts[k].tau    = opts.step0;
    }

  auto max_energy = [&]() {
    double best = -1.;
    for (const auto &pt : pts)
      best = std::max(best, pt.lambda);
    return best;
  };

  SecondEigenResult res;
  double            prev   = max_energy();
  int               steady = 0;
  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations)
    {
      parallel_for(half, [&](int k) { descent_step(pts[k], ctx, false); });

      // chain points[0..half-1] followed by -points[0]
      std::vector<Vector> chain(half + 1);
      for (int k = 0; k < half; ++k)
        chain[k] = pts[k].u;
      chain[half] = -pts[0].u;

      std::vector<double> arc(half + 1, 0.);
      for (int k = 1; k <= half; ++k)
        arc[k] = arc[k - 1] + weighted_l2(chain[k], chain[k - 1], w);
      const double total = arc[half];

      // redistribute by arclength; coincident neighbours are merged implicitly
      std::vector<Vector> moved(half);
      moved[0] = chain[0];
      int seg  = 0;
      for (int k = 1; k < half; ++k)
        {
          const double target = total * k / half;
          while (seg < half - 1 && arc[seg + 1] < target)
            ++seg;
          const double len = arc[seg + 1] - arc[seg];
          const double t   = len > 1e-8 ? (target - arc[seg]) / len : 0.;
          moved[k] = project_to_constraint((1. - t) * chain[seg] + t * chain[seg + 1], ctx);
        }
      for (int k = 1; k < half; ++k)
        {
          pts[k].u      = std::move(moved[k]);
          pts[k].lambda = energy(pts[k].u, ctx.kernel);
        }

      const double now = max_energy();
      if (std::abs(now - prev) <= opts.tol * now)
        ++steady;
      else
        steady = 0;
      prev = now;
      if (steady >= 20)
        {
          res.converged = true;
          break;
        }
    }

  res.path.points.resize(m);
  for (int k = 0; k < half; ++k)
    {
      res.path.points[k]        = pts[k].u;
      res.path.points[k + half] = -pts[k].u;
    }
  res.lambda2 = -1.;
  for (int k = 0; k < half; ++k)
    if (pts[k].lambda > res.lambda2)
      {
        res.lambda2 = pts[k].lambda;
        res.argmax  = k;
      }
  res.maximizer = pts[res.argmax].u;
  return res;
}

std::vector<OracleMode> oracle_spectrum_p2(const OperatorContext &ctx)
{
  if (ctx.p() != 2.)
    throw ValidationError("dense oracle spectrum requires p = 2");
  const double w = ctx.domain().cell_weight();
  const Matrix M = (w * ctx.weight).asDiagonal();

  // M v = mu G v with G positive definite; lambda = 1/mu for mu > 0
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(M, ctx.kernel.gram());
  if (es.info() != Eigen::Success)
    throw Error("dense oracle: eigendecomposition failed");

  std::vector<OracleMode> modes;
  for (int k = 0; k < es.eigenvalues().size(); ++k)
    {
      const double mu = es.eigenvalues()[k];
      if (!(mu > 0.))
        continue;
      // eigenvectors come G-normalized: v^T G v = 1, so v^T M v = mu
      Vector   v = es.eigenvectors().col(k) / std::sqrt(mu);
      Eigen::Index imax;
      v.cwiseAbs().maxCoeff(&imax);
      if (v[imax] < 0.)
        v = -v;
      modes.push_back({1. / mu, std::move(v)});
    }
  std::sort(modes.begin(), modes.end(), [](const auto &a, const auto &b) { return a.lambda < b.lambda; });
  return modes;
}

} // namespace fpl
