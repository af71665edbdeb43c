#include "fplap/nonlinear.hpp"

#include "fplap/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace fpl {

namespace {

double odd_power(double t, double q)
{
  if (t == 0.)
    return 0.;
  return std::copysign(std::pow(std::abs(t), q - 1.), t);
}

/// d/dt of |t|^{q-2} t (odd) or |t|^{q-1} (even), regularized at 0 for q < 2.
double power_slope(double t, double q, bool odd, double reg)
{
  if (q == 1.)
    return 0.;
  const double mag = q >= 2. ? std::pow(std::abs(t), q - 2.) : std::pow(t * t + reg * reg, 0.5 * (q - 2.));
  const double d   = (q - 1.) * mag;
  return odd ? d : (t < 0. ? -d : d);
}

void check_length(const Vector &u, int n, const char *what)
{
  if (u.size() != n)
    throw ValidationError(std::string(what) + ": grid function does not match the grid");
}

/// Dual norm proxy sqrt(R^T G^{-1} R) of a Euclidean residual R = h F.
double gram_merit(const Vector &R, const KernelMatrix &kernel)
{
  return std::sqrt(std::max(0., R.dot(kernel.solve_gram(R))));
}

/// Damped Newton on R(u) = 0 with merit sqrt(R^T G^{-1} R); the Newton
/// direction is a descent direction for the merit. Returns the final merit.
double damped_newton(const std::function<Vector(const Vector &)> &R,
                     const std::function<Matrix(const Vector &)> &J,
                     const KernelMatrix                          &kernel,
                     Vector                                      &u,
                     double                                       tol,
                     int                                          max_iter)
{
  Vector r     = R(u);
  double merit = gram_merit(r, kernel);
  for (int it = 0; it < max_iter && merit > tol; ++it)
    {
      Eigen::PartialPivLU<Matrix> lu(J(u));
      Vector                      d = -lu.solve(r);
      if (!d.allFinite())
        break;
      double tau      = 1.;
      bool   accepted = false;
      for (int halving = 0; halving < 40; ++halving)
        {
          const Vector trial = u + tau * d;
          const Vector rt    = R(trial);
          const double mt    = gram_merit(rt, kernel);
          if (std::isfinite(mt) && mt < (1. - 1e-4 * tau) * merit)
            {
              u        = trial;
              r        = rt;
              merit    = mt;
              accepted = true;
              break;
            }
          tau *= 0.5;
        }
      if (!accepted)
        break;
    }
  return merit;
}

/// Generalized eigenvectors of M v = mu G v with M = diag(w h); columns sorted
/// by decreasing mu (increasing lambda = 1/mu), G-orthonormal.
struct GramModes
{
  Vector mu;
  Matrix V;
};

GramModes gram_modes(const KernelMatrix &kernel, const Vector &h)
{
  const Matrix M = (kernel.domain().cell_weight() * h).asDiagonal();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(M, kernel.gram());
  if (es.info() != Eigen::Success)
    throw Error("generalized eigendecomposition failed");
  const int n = kernel.size();
  GramModes out;
  out.mu.resize(n);
  out.V.resize(n, n);
  for (int k = 0; k < n; ++k)
    {
      out.mu[k]    = es.eigenvalues()[n - 1 - k];
      out.V.col(k) = es.eigenvectors().col(n - 1 - k);
    }
  return out;
}

std::vector<double> log_grid(double lo, double hi, int count)
{
  std::vector<double> t(count);
  const double        a = std::log(lo), b = std::log(hi);
  for (int k = 0; k < count; ++k)
    t[k] = std::exp(a + (b - a) * k / (count - 1));
  return t;
}

constexpr double scan_low  = 1e-8;
constexpr double scan_high = 1e2;
constexpr int    scan_count = 241;

} // namespace

// ---------------------------------------------------------------------------
// DiscreteRhs

DiscreteRhs::DiscreteRhs(const RhsSpec &spec, const Domain1D &domain, double p)
  : size_(domain.size())
  , p_(p)
{
  for (const RhsTerm &t : spec.terms)
    {
      if (!(t.q >= 1.))
        throw ValidationError("rhs term: q must be at least 1");
      terms_.push_back({t.coef, evaluate_weight(t.weight, domain), t.q, t.odd});
    }
  coupling_h_ = Vector::Zero(size_);
  if (spec.coupling)
    {
      lambda_     = spec.coupling->lambda;
      coupling_h_ = evaluate_weight(spec.coupling->weight, domain);
    }
  forcing_ = Vector::Zero(size_);
  if (spec.forcing)
    {
      check_length(*spec.forcing, size_, "rhs forcing");
      forcing_ = *spec.forcing;
    }
}

DiscreteRhs DiscreteRhs::terms_only() const
{
  DiscreteRhs out = *this;
  out.lambda_     = 0.;
  out.coupling_h_.setZero();
  out.forcing_.setZero();
  return out;
}

DiscreteRhs DiscreteRhs::with_lambda(double lambda) const
{
  DiscreteRhs out = *this;
  out.lambda_     = lambda;
  return out;
}

double DiscreteRhs::value(int i, double t) const
{
  double v = 0.;
  for (const Term &term : terms_)
    {
      const double g = term.odd ? odd_power(t, term.q) : std::pow(std::abs(t), term.q - 1.);
      v += term.coef * term.h[i] * g;
    }
  if (lambda_ != 0.)
    v += lambda_ * coupling_h_[i] * phi(t, p_);
  return v;
}

double DiscreteRhs::derivative(int i, double t, double reg) const
{
  double v = 0.;
  for (const Term &term : terms_)
    v += term.coef * term.h[i] * power_slope(t, term.q, term.odd, reg);
  if (lambda_ != 0.)
    v += lambda_ * coupling_h_[i] * power_slope(t, p_, true, reg);
  return v;
}

double DiscreteRhs::primitive(int i, double t) const
{
  double v = 0.;
  const double a = std::abs(t);
  for (const Term &term : terms_)
    {
      const double g = std::pow(a, term.q) / term.q;
      v += term.coef * term.h[i] * (term.odd || t >= 0. ? g : -g);
    }
  if (lambda_ != 0.)
    v += lambda_ * coupling_h_[i] * std::pow(a, p_) / p_;
  return v;
}

Vector DiscreteRhs::evaluate(const Vector &u) const
{
  check_length(u, size_, "rhs");
  Vector out(size_);
  for (int i = 0; i < size_; ++i)
    out[i] = value(i, u[i]) + forcing_[i];
  return out;
}

double DiscreteRhs::integrated_primitive(const Vector &u, const Domain1D &domain) const
{
  check_length(u, size_, "rhs");
  double s = 0.;
  for (int i = 0; i < size_; ++i)
    s += primitive(i, u[i]) + forcing_[i] * u[i];
  return domain.cell_weight() * s;
}

ResidualResult residual(const Vector &u, const DiscreteRhs &rhs, const KernelMatrix &kernel)
{
  check_length(u, kernel.size(), "residual");
  ResidualResult out;
  out.F    = apply_A(u, kernel) - rhs.evaluate(u);
  out.norm = dual_norm(out.F, kernel).value;
  return out;
}

// ---------------------------------------------------------------------------
// Fredholm problem

double shifted_condition(double lambda, const OperatorContext &ctx)
{
  if (ctx.p() != 2.)
    throw ValidationError("shifted condition number requires p = 2");
  const Matrix M = (ctx.domain().cell_weight() * ctx.weight).asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(ctx.kernel.gram() - lambda * M, Eigen::EigenvaluesOnly);
  const Vector ev = es.eigenvalues().cwiseAbs();
  const double lo = ev.minCoeff();
  return lo == 0. ? std::numeric_limits<double>::infinity() : ev.maxCoeff() / lo;
}

double fredholm_energy(const Vector &u, double lambda, const Vector &f, const OperatorContext &ctx)
{
  const double p = ctx.p();
  return energy(u, ctx.kernel) / p - lambda / p * weighted_power(u, ctx) - pairing(f, u, ctx.domain());
}

Vector fredholm_linear_oracle(double lambda, const Vector &f, const OperatorContext &ctx)
{
  if (ctx.p() != 2.)
    throw ValidationError("linear Fredholm oracle requires p = 2");
  check_length(f, ctx.kernel.size(), "Fredholm oracle");
  // spectral expansion in the G-orthonormal generalized eigenbasis:
  // (G - lambda M) v_k = (1 - lambda mu_k) G v_k
  const GramModes modes = gram_modes(ctx.kernel, ctx.weight);
  const Vector    b     = ctx.domain().cell_weight() * f;
  Vector          u     = Vector::Zero(f.size());
  for (int k = 0; k < modes.mu.size(); ++k)
    {
      const double den = 1. - lambda * modes.mu[k];
      u += (modes.V.col(k).dot(b) / den) * modes.V.col(k);
    }
  return u;
}

namespace {

/// Preconditioned conjugate gradients on (G - lambda M) u = b, i.e. the
/// minimization of the strictly convex quadratic when lambda < lambda_1.
Vector pcg_minimize(double lambda, const Vector &b, const OperatorContext &ctx, int max_iter)
{
  const Vector Mdiag = ctx.domain().cell_weight() * ctx.weight;
  auto         op    = [&](const Vector &x) { return Vector(ctx.kernel.gram() * x - lambda * Mdiag.cwiseProduct(x)); };
  Vector       u     = Vector::Zero(b.size());
  Vector       r     = b;
  Vector       z     = ctx.kernel.solve_gram(r);
  Vector       d     = z;
  double       rz    = r.dot(z);
  const double r0    = std::sqrt(rz);
  for (int it = 0; it < max_iter && std::sqrt(std::max(rz, 0.)) > 1e-15 * r0; ++it)
    {
      const Vector Ad    = op(d);
      const double alpha = rz / d.dot(Ad);
      u += alpha * d;
      r -= alpha * Ad;
      z                 = ctx.kernel.solve_gram(r);
      const double rz_n = r.dot(z);
      d                 = z + (rz_n / rz) * d;
      rz                = rz_n;
    }
  return u;
}

/// Gram-preconditioned gradient descent with Armijo backtracking on the
/// Fredholm functional (coercive for lambda < lambda_1).
Vector descend_fredholm(double lambda, const Vector &f, const OperatorContext &ctx, Vector u, int max_iter)
{
  const double w   = ctx.domain().cell_weight();
  double       val = fredholm_energy(u, lambda, f, ctx);
  double       tau = 1.;
  for (int it = 0; it < max_iter; ++it)
    {
      const Vector g  = w * (apply_A(u, ctx.kernel) - lambda * apply_H(u, ctx) - f);
      const Vector d  = ctx.kernel.solve_gram(g);
      const double gd = g.dot(d);
      if (!(gd > 0.))
        break;
      bool accepted = false;
      for (int halving = 0; halving < 50; ++halving)
        {
          const Vector trial = u - tau * d;
          const double tv    = fredholm_energy(trial, lambda, f, ctx);
          if (tv <= val - 1e-4 * tau * gd)
            {
              u        = trial;
              val      = tv;
              tau      = std::min(2. * tau, 1.);
              accepted = true;
              break;
            }
          tau *= 0.5;
        }
      if (!accepted)
        break;
    }
  return u;
}

} // namespace

Solution solve_fredholm(double lambda, const Vector &f, const OperatorContext &ctx, const FredholmOptions &opts)
{
  check_length(f, ctx.kernel.size(), "Fredholm");
  if (!(lambda > 0.))
    throw ValidationError("Fredholm: lambda must be positive");

  const double p  = ctx.p();
  const double w  = ctx.domain().cell_weight();
  const double l1 = opts.lambda1 ? *opts.lambda1 : solve_first(ctx, opts.solver).lambda;
  double       l2 = 0.;
  if (opts.lambda2)
    l2 = *opts.lambda2;
  else if (p == 2.)
    l2 = oracle_spectrum_p2(ctx).at(1).lambda;
  else
    {
      const EigenPair e1 = solve_first(ctx, opts.solver);
      l2                 = solve_second(ctx, initial_path(ctx, e1.u), opts.solver).lambda2;
    }

  if (std::abs(lambda - l1) <= opts.resonance_guard * l1)
    {
      const double cond = p == 2. ? shifted_condition(lambda, ctx) : std::numeric_limits<double>::quiet_NaN();
      std::ostringstream msg;
      msg << "near-resonance: |lambda - lambda_1| <= " << opts.resonance_guard << " lambda_1 (lambda = " << lambda
          << ", lambda_1 = " << l1 << ")";
      throw ResonanceError(msg.str(), cond);
    }
  if (!(lambda < l2))
    throw ValidationError("Fredholm: lambda must lie below lambda_2");

  auto finish = [&](Vector u) {
    Solution s;
    s.u        = std::move(u);
    s.residual = dual_norm(apply_A(s.u, ctx.kernel) - lambda * apply_H(s.u, ctx) - f, ctx.kernel).value;
    s.energy   = fredholm_energy(s.u, lambda, f, ctx);
    return s;
  };

  if (p == 2.)
    {
      const double cond = shifted_condition(lambda, ctx);
      if (!(cond <= opts.condition_limit))
        {
          std::ostringstream msg;
          msg << "near-resonance: condition number " << cond << " exceeds " << opts.condition_limit;
          throw ResonanceError(msg.str(), cond);
        }
      const Matrix Mdiag = (w * ctx.weight).asDiagonal();
      const Vector b     = w * f;
      const Vector lin   = Eigen::LDLT<Matrix>(ctx.kernel.gram() - lambda * Mdiag).solve(b);
      if (lambda > l1)
        return finish(lin);
      const Vector mn = pcg_minimize(lambda, b, ctx, 10 * ctx.kernel.size());
      const double scale = std::max(lin.norm(), std::numeric_limits<double>::min());
      if ((mn - lin).norm() > 1e-8 * scale)
        throw ConvergenceError("Fredholm: minimizer and linear solve disagree");
      return finish(mn);
    }

  auto R = [&](const Vector &u) { return Vector(w * (apply_A(u, ctx.kernel) - lambda * apply_H(u, ctx) - f)); };
  auto J = [&](const Vector &u) {
    Matrix jac = jacobian_A(u, ctx.kernel);
    for (int i = 0; i < u.size(); ++i)
      jac(i, i) -= w * lambda * ctx.weight[i] * power_slope(u[i], p, true, 1e-12);
    return jac;
  };

  const Vector riesz = ctx.kernel.solve_gram(w * f);
  std::mt19937_64 rng(opts.solver.seed);
  std::normal_distribution<> N01;
  for (int start = 0; start < opts.starts; ++start)
    {
      Vector u0 = riesz;
      if (start > 0)
        {
          Vector noise(u0.size());
          for (int i = 0; i < noise.size(); ++i)
            noise[i] = N01(rng);
          noise = ctx.kernel.solve_gram(w * noise);
          const double sc = std::max(riesz.cwiseAbs().maxCoeff(), 1e-3);
          u0 += sc * noise / noise.cwiseAbs().maxCoeff();
        }
      if (lambda < l1)
        u0 = descend_fredholm(lambda, f, ctx, u0, 2000);
      damped_newton(R, J, ctx.kernel, u0, 0.1 * opts.solver.tol, 200);
      if (!u0.allFinite())
        continue;
      Solution s = finish(u0);
      if (s.residual < opts.solver.tol)
        return s;
    }
  throw ConvergenceError("Fredholm: not found (every start failed; existence holds, the solver fell short)");
}

// ---------------------------------------------------------------------------
// Truncation

double eta(double t, double t2)
{
  const double a = std::abs(t);
  if (a <= t2)
    return 1.;
  if (a >= 2. * t2)
    return 0.;
  const double x = (a - t2) / t2;
  return 1. - x * x * x * (10. + x * (-15. + 6. * x));
}

double eta_prime(double t, double t2)
{
  const double a = std::abs(t);
  if (a <= t2 || a >= 2. * t2)
    return 0.;
  const double x = (a - t2) / t2;
  const double d = -30. * x * x * (1. - x) * (1. - x) / t2;
  return t < 0. ? -d : d;
}

double eta_second(double t, double t2)
{
  const double a = std::abs(t);
  if (a <= t2 || a >= 2. * t2)
    return 0.;
  const double x = (a - t2) / t2;
  return -60. * x * (1. - x) * (1. - 2. * x) / (t2 * t2);
}

double eta_prime_sup(double t2)
{
  return 15. / (8. * t2);
}

const char *to_string(Hypothesis h)
{
  static const char *names[] = {"F1", "F2", "F3", "F4", "F5", "F6"};
  return names[static_cast<int>(h)];
}

namespace {

/// p F - f t over all nodes for t and -t; returns the minimum.
double min_f4_gap(const DiscreteRhs &rhs, double t)
{
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < rhs.size(); ++i)
    for (double s : {t, -t})
      m = std::min(m, rhs.p() * rhs.primitive(i, s) - rhs.value(i, s) * s);
  return m;
}

/// Largest sampled t0 such that pF - ft > 0 at every sample in (0, t0).
double f4_threshold(const DiscreteRhs &rhs)
{
  const auto ts   = log_grid(scan_low, scan_high, scan_count);
  double     last = 0.;
  for (double t : ts)
    {
      if (!(min_f4_gap(rhs, t) > 0.))
        return last;
      last = t;
    }
  return std::numeric_limits<double>::infinity();
}

bool small_t_property(const DiscreteRhs &rhs, double t)
{
  for (int i = 0; i < rhs.size(); ++i)
    {
      const double F = rhs.primitive(i, t);
      if (!(F >= std::pow(t, rhs.p())))
        return false;
      if (rhs.primitive(i, -t) != F || rhs.value(i, -t) != -rhs.value(i, t))
        return false;
    }
  return true;
}

} // namespace

HypothesisReport check_hypotheses(const RhsSpec &rhs, Hypothesis which, const SpaceParams &params, const Domain1D &domain)
{
  validate(params);
  HypothesisReport rep;
  rep.which           = which;
  const double    p   = params.p;
  const double    ps  = critical_exponent(params);
  const DiscreteRhs d(rhs, domain, p);
  auto            fail = [&](const std::string &msg) { rep.violations.push_back(msg); };

  // exponents present near t = 0, together with the coupling term at q = p
  struct Exp
  {
    double q;
    double coef;
    const Vector *h;
    bool odd;
    const WeightSpec *weight;
    bool coupling;
  };
  std::vector<Exp> exps;
  for (std::size_t k = 0; k < rhs.terms.size(); ++k)
    exps.push_back({rhs.terms[k].q, rhs.terms[k].coef, &d.terms()[k].h, rhs.terms[k].odd, &rhs.terms[k].weight, false});
  if (rhs.coupling && rhs.coupling->lambda != 0.)
    exps.push_back({p, rhs.coupling->lambda, &d.coupling_weight(), true, &rhs.coupling->weight, true});

  const auto ts = log_grid(scan_low, 1., 81);
  auto ratio_at = [&](double t) {
    double lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d.size(); ++i)
      lo = std::min(lo, d.value(i, t) / phi(t, p));
    return lo;
  };

  switch (which)
    {
      case Hypothesis::F1:
        for (const Exp &e : exps)
          {
            std::ostringstream where;
            where << "term q=" << e.q << ": ";
            if (!(e.q >= 1. && e.q < ps))
              fail(where.str() + "q must lie in [1, p_s*)");
            else if (!check_tildeWq(*e.weight, {params.N, p, params.s, e.q}).member)
              fail(where.str() + "weight not in the class tilde W_q");
          }
        break;
      case Hypothesis::F2:
        {
          int sublinear = 0;
          // the lambda h phi_p part is the eigenvalue term, not part of f
          for (const Exp &e : exps)
            {
              if (e.coupling)
                continue;
              std::ostringstream where;
              where << "term q=" << e.q << ": ";
              if (e.q > p)
                {
                  if (!(e.q < ps))
                    fail(where.str() + "q must lie in (p, p_s*)");
                  else if (!check_Wq(*e.weight, {params.N, p, params.s, e.q}).member)
                    fail(where.str() + "weight not in the class W_q");
                }
              else if (e.q < p)
                {
                  ++sublinear;
                  if (!check_Wq(*e.weight, {params.N, p, params.s, e.q}).member)
                    fail(where.str() + "weight h_0 not in the class W_q0");
                  // some sigma in [0, p-1] with h_0 rho^{sigma s} in L^tau
                  const double beta  = singularity_exponent(*e.weight);
                  bool         found = false;
                  for (int k = 0; k <= 400 && !found; ++k)
                    {
                      const double sigma   = (p - 1.) * k / 400.;
                      const double inv_tau = 1. - sigma / p - (p - sigma) / ps;
                      if (!(inv_tau > 0.) || !(inv_tau < 1.))
                        continue;
                      const double tau = 1. / inv_tau;
                      found            = tau < ps && tau * std::max(0., beta - sigma * params.s) < 1.;
                    }
                  if (!found)
                    fail(where.str() + "no sigma in [0, p-1] with h_0 rho^{sigma s} in L^tau");
                }
              else
                fail(where.str() + "exponent q = p is not admissible");
            }
          if (sublinear > 1)
            fail("at most one sublinear term q_0 < p is admissible");
          break;
        }
      case Hypothesis::F3:
        for (const Exp &e : exps)
          if (!e.coupling && !(e.q > p))
            {
              std::ostringstream msg;
              msg << "term q=" << e.q << " does not vanish faster than |t|^{p-1}";
              fail(msg.str());
            }
        rep.ratio_small = ratio_at(ts.front());
        rep.ratio_large = ratio_at(ts.back());
        break;
      case Hypothesis::F4:
        rep.threshold = f4_threshold(d);
        if (!(rep.threshold > 0.))
          fail("pF - ft > 0 fails arbitrarily close to t = 0 on the sampling grid");
        break;
      case Hypothesis::F5:
        {
          double qmin = std::numeric_limits<double>::infinity();
          for (const Exp &e : exps)
            if (e.coef != 0. && e.h->cwiseAbs().maxCoeff() > 0.)
              qmin = std::min(qmin, e.q);
          if (!(qmin < p))
            fail("no term with q < p: f / phi_p stays bounded near t = 0");
          else
            {
              Vector lead = Vector::Zero(d.size());
              for (const Exp &e : exps)
                if (e.q == qmin)
                  {
                    if (!e.odd)
                      fail("leading term is not odd; the limit differs for t < 0");
                    lead += e.coef * *e.h;
                  }
              if (!(lead.minCoeff() > 0.))
                fail("leading coefficient must be positive at every node");
            }
          rep.ratio_small = ratio_at(ts.front());
          rep.ratio_large = ratio_at(ts.back());
          if (rep.violations.empty() && !(rep.ratio_small > rep.ratio_large))
            fail("sampled ratio f / phi_p does not grow as t decreases");
          break;
        }
      case Hypothesis::F6:
        for (const Exp &e : exps)
          if (!e.odd)
            {
              std::ostringstream msg;
              msg << "term q=" << e.q << " is even in t";
              fail(msg.str());
            }
        if (rhs.forcing && rhs.forcing->cwiseAbs().maxCoeff() > 0.)
          fail("nonzero forcing breaks oddness");
        break;
    }
  rep.verdict = rep.violations.empty() ? Verdict::yes : Verdict::no;
  return rep;
}

TruncationSpec default_truncation(const RhsSpec &rhs, const KernelMatrix &kernel)
{
  const DiscreteRhs d(rhs, kernel.domain(), kernel.p());
  TruncationSpec    spec;
  spec.t0 = std::min(f4_threshold(d), scan_high);
  if (!(spec.t0 > 0.))
    throw ValidationError("truncation: pF - ft > 0 fails near t = 0");

  // scan upward, then bisect the first failure
  const auto ts   = log_grid(scan_low, spec.t0, scan_count);
  double     good = 0.;
  double     bad  = spec.t0;
  for (double t : ts)
    {
      if (!small_t_property(d, t))
        {
          bad = t;
          break;
        }
      good = t;
    }
  if (good == 0.)
    throw ValidationError("truncation: F(x,t) >= |t|^p or oddness fails near t = 0");
  for (int k = 0; k < 80 && bad - good > 1e-15 * bad; ++k)
    {
      const double mid = 0.5 * (good + bad);
      (small_t_property(d, mid) ? good : bad) = mid;
    }
  spec.t1 = std::min(good, 0.999 * spec.t0);
  spec.t2 = spec.t1 / 4.;

  const OperatorContext unit(kernel, Vector::Ones(kernel.size()));
  const double          lambda1 = kernel.p() == 2. ? oracle_spectrum_p2(unit).front().lambda : solve_first(unit).lambda;
  spec.gamma                    = 0.5 * std::min(1., lambda1 / kernel.p());
  return spec;
}

TruncatedRhs::TruncatedRhs(DiscreteRhs base, TruncationSpec spec)
  : base_(std::move(base))
  , spec_(spec)
{}

double TruncatedRhs::value(int i, double t) const
{
  const double p  = base_.p();
  const double t2 = spec_.t2;
  const double e  = eta(t, t2);
  const double ep = eta_prime(t, t2);
  return ep * base_.primitive(i, t) + e * base_.value(i, t) - spec_.gamma * ep * std::pow(std::abs(t), p) +
         (1. - e) * p * spec_.gamma * phi(t, p);
}

double TruncatedRhs::derivative(int i, double t, double reg) const
{
  const double p   = base_.p();
  const double t2  = spec_.t2;
  const double g   = spec_.gamma;
  const double e   = eta(t, t2);
  const double ep  = eta_prime(t, t2);
  const double epp = eta_second(t, t2);
  double       d   = e * base_.derivative(i, t, reg) + (1. - e) * g * p * power_slope(t, p, true, reg);
  if (ep != 0. || epp != 0.)
    d += epp * base_.primitive(i, t) + 2. * ep * base_.value(i, t) - g * epp * std::pow(std::abs(t), p) -
         2. * g * p * ep * phi(t, p);
  return d;
}

double TruncatedRhs::primitive(int i, double t) const
{
  const double e = eta(t, spec_.t2);
  return e * base_.primitive(i, t) + (1. - e) * spec_.gamma * std::pow(std::abs(t), base_.p());
}

double TruncatedRhs::growth_constant() const
{
  double qmin = std::numeric_limits<double>::infinity();
  for (const auto &term : base_.terms())
    qmin = std::min(qmin, term.q);
  if (base_.lambda() != 0.)
    qmin = std::min(qmin, base_.p());
  const double es = eta_prime_sup(spec_.t2);
  const double t2 = spec_.t2;
  const double g  = spec_.gamma;
  return 2. * t2 * es / qmin + 1. + 2. * t2 * g * es + base_.p() * g;
}

double TruncatedRhs::growth_bound(int i, double t) const
{
  const double a = std::abs(t);
  double       s = std::pow(a, base_.p() - 1.);
  for (const auto &term : base_.terms())
    s += std::abs(term.coef * term.h[i]) * std::pow(a, term.q - 1.);
  if (base_.lambda() != 0.)
    s += std::abs(base_.lambda() * base_.coupling_weight()[i]) * std::pow(a, base_.p() - 1.);
  return growth_constant() * s;
}

Vector TruncatedRhs::evaluate(const Vector &u) const
{
  check_length(u, size(), "truncated rhs");
  Vector out(size());
  for (int i = 0; i < size(); ++i)
    out[i] = value(i, u[i]);
  return out;
}

Vector TruncatedRhs::evaluate_derivative(const Vector &u, double reg) const
{
  check_length(u, size(), "truncated rhs");
  Vector out(size());
  for (int i = 0; i < size(); ++i)
    out[i] = derivative(i, u[i], reg);
  return out;
}

double TruncatedRhs::integrated_primitive(const Vector &u, const Domain1D &domain) const
{
  check_length(u, size(), "truncated rhs");
  double s = 0.;
  for (int i = 0; i < size(); ++i)
    s += primitive(i, u[i]);
  return domain.cell_weight() * s;
}

TruncatedRhs build_truncation(const RhsSpec &rhs, const TruncationSpec &spec, const KernelMatrix &kernel)
{
  std::vector<std::string> problems;
  if (!(spec.t2 > 0. && spec.t2 < spec.t1 / 2. && spec.t1 < spec.t0))
    problems.push_back("ordering 0 < t2 < t1/2 < t1 < t0 violated");

  const OperatorContext unit(kernel, Vector::Ones(kernel.size()));
  const double lambda1 = kernel.p() == 2. ? oracle_spectrum_p2(unit).front().lambda : solve_first(unit).lambda;
  // C_imb^p = 1 / lambda_1(h = 1)
  const double gamma_max = std::min(1., lambda1 / kernel.p());
  if (!(spec.gamma > 0. && spec.gamma < gamma_max))
    {
      std::ostringstream msg;
      msg << "gamma must lie in (0, min{1, 1/(p C_imb^p)}) = (0, " << gamma_max << ")";
      problems.push_back(msg.str());
    }
  if (rhs.forcing && rhs.forcing->cwiseAbs().maxCoeff() > 0.)
    problems.push_back("forcing is not odd in t");

  DiscreteRhs base(rhs, kernel.domain(), kernel.p());
  if (problems.empty())
    {
      const auto ts = log_grid(scan_low, spec.t1, scan_count);
      for (double t : ts)
        if (t < spec.t1 && !small_t_property(base, t))
          {
            std::ostringstream msg;
            msg << "F(x,t) >= |t|^p with f odd fails at |t| = " << t << " < t1";
            problems.push_back(msg.str());
            break;
          }
      for (double t : log_grid(scan_low, spec.t0, scan_count))
        if (t < spec.t0 && !(min_f4_gap(base, t) > 0.))
          {
            std::ostringstream msg;
            msg << "pF - ft > 0 fails at |t| = " << t << " < t0";
            problems.push_back(msg.str());
            break;
          }
    }
  if (!problems.empty())
    {
      std::string all = "truncation preconditions violated:";
      for (const auto &s : problems)
        all += "\n  - " + s;
      throw ValidationError(all);
    }
  return TruncatedRhs(std::move(base), spec);
}

double modified_energy(const Vector &u, const TruncatedRhs &rhs, const KernelMatrix &kernel)
{
  return energy(u, kernel) / kernel.p() - rhs.integrated_primitive(u, kernel.domain());
}

ResidualResult modified_residual(const Vector &u, const TruncatedRhs &rhs, const KernelMatrix &kernel)
{
  ResidualResult out;
  out.F    = apply_A(u, kernel) - rhs.evaluate(u);
  out.norm = dual_norm(out.F, kernel).value;
  return out;
}

// ---------------------------------------------------------------------------
// Small solutions

namespace {

/// Sign convention for a +-pair: the first entry above 1e-3 max|u| is positive.
Vector canonical_sign(Vector u)
{
  const double m = u.cwiseAbs().maxCoeff();
  for (int i = 0; i < u.size(); ++i)
    if (std::abs(u[i]) > 1e-3 * m)
      {
        if (u[i] < 0.)
          u = -u;
        break;
      }
  return u;
}

struct Candidate
{
  SmallSolution sol;
  int           start = 0;
};

} // namespace

SmallSolutionSearch find_small_solutions(const TruncatedRhs &rhs, const KernelMatrix &kernel, int n_levels, const SmallSolutionOptions &opts)
{
  if (n_levels < 1)
    throw ValidationError("small solutions: n_levels must be at least 1");
  const int n = kernel.size();
  if (n_levels > n)
    throw ValidationError("small solutions: more levels than grid nodes");
  if (rhs.size() != n)
    throw ValidationError("small solutions: rhs does not match the grid");

  const double    w     = kernel.domain().cell_weight();
  const double    p     = kernel.p();
  const GramModes modes = gram_modes(kernel, Vector::Ones(n));

  // amplitude at which the leading sublinear term balances the level's
  // quadratic stiffness
  double qmin = std::numeric_limits<double>::infinity(), cmean = 1.;
  for (const auto &term : rhs.base().terms())
    if (term.q < qmin)
      {
        qmin  = term.q;
        cmean = std::abs(term.coef) * term.h.cwiseAbs().mean();
      }
  if (!(qmin < p))
    throw ValidationError("small solutions: a sublinear term q < p is required");

  auto R = [&](const Vector &u) { return Vector(w * (apply_A(u, kernel) - rhs.evaluate(u))); };
  auto J = [&](const Vector &u) {
    Matrix jac = jacobian_A(u, kernel);
    jac.diagonal() -= w * rhs.evaluate_derivative(u);
    return jac;
  };

  std::vector<Candidate> found;
  std::vector<int>       per_level(n_levels + 1, 0);
  for (int level = 1; level <= n_levels; ++level)
    {
      const Matrix V   = modes.V.leftCols(level);
      const Vector phi = modes.V.col(level - 1) / std::sqrt(w * modes.V.col(level - 1).squaredNorm());
      const double lam = 1. / modes.mu[level - 1];
      const double amp = std::pow(cmean / lam, 1. / (p - qmin)) / std::max(phi.cwiseAbs().maxCoeff(), 1e-300);

      std::vector<std::optional<Candidate>> slots(opts.starts);
      parallel_for(opts.starts, [&](int k) {
        std::mt19937_64                  rng(opts.solver.seed + 104729ULL * level + 15485863ULL * k);
        std::uniform_real_distribution<> U(-1., 1.);
        std::uniform_real_distribution<> A(std::log(0.5), std::log(2.));

        // coefficients in X_n: dominant last mode plus seeded mixing
        Vector c(level);
        // int v_j^2 = mu_j for G-orthonormal columns; mix at 30% relative L^2 size
        for (int j = 0; j < level; ++j)
          c[j] = 0.3 * U(rng) * std::sqrt(modes.mu[level - 1] / modes.mu[j]);
        c[level - 1] = 1.;
        Vector u = V * c;
        u *= std::exp(A(rng)) * amp * phi.cwiseAbs().maxCoeff() / u.cwiseAbs().maxCoeff();

        // critical point of the modified energy restricted to X_n
        Vector coef = V.transpose() * kernel.gram() * u;  // G-orthonormal basis
        for (int it = 0; it < 100; ++it)
          {
            const Vector uu = V * coef;
            const Vector r  = V.transpose() * R(uu);
            if (r.norm() <= 1e-14 * std::max(1., (V.transpose() * kernel.gram() * uu).norm()))
              break;
            const Matrix jr = V.transpose() * J(uu) * V;
            Vector       d  = -Eigen::PartialPivLU<Matrix>(jr).solve(r);
            if (!d.allFinite())
              break;
            double tau = 1.;
            bool   ok  = false;
            for (int h = 0; h < 40; ++h)
              {
                const Vector trial = coef + tau * d;
                if ((V.transpose() * R(V * trial)).norm() < (1. - 1e-4 * tau) * r.norm())
                  {
                    coef = trial;
                    ok   = true;
                    break;
                  }
                tau *= 0.5;
              }
            if (!ok)
              break;
          }
        u = V * coef;

        // polish on the full grid
        damped_newton(R, J, kernel, u, 0.1 * opts.solver.tol, 100);
        if (!u.allFinite())
          return;

        Candidate cand;
        cand.start               = k;
        cand.sol.level           = level;
        cand.sol.solution.energy = modified_energy(u, rhs, kernel);
        if (!(cand.sol.solution.energy < 0.))
          return;
        cand.sol.solution.residual = modified_residual(u, rhs, kernel).norm;
        cand.sol.sup_norm          = u.cwiseAbs().maxCoeff();
        cand.sol.below_t1          = cand.sol.sup_norm < rhs.spec().t1;
        cand.sol.below_t2          = cand.sol.sup_norm <= rhs.spec().t2;
        if (!(cand.sol.solution.residual < opts.solver.tol) || !cand.sol.below_t1)
          return;
        cand.sol.plain_residual =
          dual_norm(Vector(apply_A(u, kernel) - rhs.base().evaluate(u)), kernel).value;
        cand.sol.solution.u = canonical_sign(u);
        slots[k]            = std::move(cand);
      });
      for (auto &s : slots)
        if (s)
          {
            ++per_level[level];
            found.push_back(std::move(*s));
          }
    }

  // deterministic order before deduplication
  std::sort(found.begin(), found.end(), [](const Candidate &a, const Candidate &b) {
    if (a.sol.solution.energy != b.sol.solution.energy)
      return a.sol.solution.energy < b.sol.solution.energy;
    if (a.sol.level != b.sol.level)
      return a.sol.level < b.sol.level;
    return a.start < b.start;
  });

  SmallSolutionSearch out;
  for (const Candidate &c : found)
    {
      bool dup = false;
      for (const SmallSolution &kept : out.solutions)
        {
          const double dm = std::sqrt(w * (c.sol.solution.u - kept.solution.u).squaredNorm());
          const double dp = std::sqrt(w * (c.sol.solution.u + kept.solution.u).squaredNorm());
          if (std::min(dm, dp) < opts.dedup_tol)
            {
              dup = true;
              break;
            }
        }
      if (!dup)
        out.solutions.push_back(c.sol);
    }
  for (int level = 1; level <= n_levels; ++level)
    if (per_level[level] == 0)
      out.gaps.push_back(level);
  return out;
}

} // namespace fpl
