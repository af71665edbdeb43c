#include "fplap/gagliardo.hpp"

#include "fplap/errors.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace fpl {

namespace {

void assemble_pairs(const Domain1D &domain, double exponent, Matrix &K, Vector &tail)
{
  const int    n = domain.size();
  const double h = domain.cell_weight();
  K.setZero(n, n);
  tail.resize(n);
  for (int i = 0; i < n; ++i)
    {
      for (int j = i + 1; j < n; ++j)
        {
          const double d = std::abs(domain.node(i) - domain.node(j));
          K(i, j) = K(j, i) = h * h / std::pow(d, 1. + exponent);
        }
      const double dl = domain.node(i) - domain.left();
      const double dr = domain.right() - domain.node(i);
      tail[i] = 2. * h * (std::pow(dl, -exponent) + std::pow(dr, -exponent)) / exponent;
    }
}

Matrix quadratic_form(const Matrix &K, const Vector &tail)
{
  Matrix G = -2. * K;
  G.diagonal() = 2. * K.rowwise().sum() + tail;
  return G;
}

double pow_abs(double t, double p)
{
  return p == 2. ? t * t : std::pow(std::abs(t), p);
}

void check_size(const Vector &u, const KernelMatrix &kernel, const char *who)
{
  if (u.size() != kernel.size())
    {
      std::ostringstream msg;
      msg << who << ": vector length " << u.size() << " does not match grid size "
          << kernel.size();
      throw ValidationError(msg.str());
    }
}

} // namespace

KernelMatrix KernelMatrix::assemble(const Domain1D &domain, double s, double p)
{
  if (!(s > 0. && s < 1.))
    throw ValidationError("kernel: s in (0,1) required");
  if (!(p > 1.))
    throw ValidationError("kernel: p > 1 required");
  if (!(s * p < 1.))
    {
      std::ostringstream msg;
      msg << "kernel: sp < N = 1 required (s=" << s << ", p=" << p
          << ", sp=" << s * p << ")";
      throw ValidationError(msg.str());
    }

  auto d = std::make_shared<Data>(Data{domain, s, p, {}, {}, {}, {}});
  assemble_pairs(domain, s * p, d->K, d->tail);
  if (p == 2.)
    d->gram = quadratic_form(d->K, d->tail);
  else
    {
      Matrix K2;
      Vector tail2;
      assemble_pairs(domain, 2. * s, K2, tail2);
      d->gram = quadratic_form(K2, tail2);
    }
  d->gram_llt.compute(d->gram);
  if (d->gram_llt.info() != Eigen::Success)
    throw Error("kernel: energy matrix is not positive definite");
  return KernelMatrix(std::move(d));
}

OperatorContext::OperatorContext(KernelMatrix k, Vector h, double q_exponent)
  : kernel(std::move(k))
  , weight(std::move(h))
  , q(q_exponent)
{
  if (weight.size() != kernel.size())
    throw ValidationError("operator context: weight length does not match grid");
}

double energy(const Vector &u, const KernelMatrix &kernel)
{
  check_size(u, kernel, "energy");
  const Matrix &K = kernel.K();
  const double  p = kernel.p();
  const int     n = kernel.size();
  double        e = 0.;
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i)
      e += K(i, j) * pow_abs(u[i] - u[j], p);
  e *= 2.;
  for (int i = 0; i < n; ++i)
    e += kernel.tail()[i] * pow_abs(u[i], p);
  return e;
}

double norm(const Vector &u, const KernelMatrix &kernel)
{
  return std::pow(energy(u, kernel), 1. / kernel.p());
}

double pairing(const Vector &F, const Vector &v, const Domain1D &domain)
{
  return domain.cell_weight() * F.dot(v);
}

Vector apply_A(const Vector &u, const KernelMatrix &kernel)
{
  check_size(u, kernel, "apply_A");
  const Matrix &K = kernel.K();
  const double  p = kernel.p();
  const int     n = kernel.size();
  Vector        a = Vector::Zero(n);
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i)
      {
        const double t = 2. * K(i, j) * phi(u[i] - u[j], p);
        a[i] += t;
        a[j] -= t;
      }
  for (int i = 0; i < n; ++i)
    a[i] += kernel.tail()[i] * phi(u[i], p);
  return a / kernel.domain().cell_weight();
}

Matrix jacobian_A(const Vector &u, const KernelMatrix &kernel, double reg)
{
  check_size(u, kernel, "jacobian_A");
  const double p = kernel.p();
  if (p == 2.)
    return kernel.gram();

  auto slope = [&](double t) {
    if (p >= 2.)
      return (p - 1.) * std::pow(std::abs(t), p - 2.);
    return (p - 1.) * std::pow(t * t + reg * reg, 0.5 * (p - 2.));
  };
  const Matrix &K = kernel.K();
  const int     n = kernel.size();
  Matrix        J = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i)
      {
        const double c = 2. * K(i, j) * slope(u[i] - u[j]);
        J(i, j) -= c;
        J(j, i) -= c;
        J(i, i) += c;
        J(j, j) += c;
      }
  for (int i = 0; i < n; ++i)
    J(i, i) += kernel.tail()[i] * slope(u[i]);
  return J;
}

Vector apply_H(const Vector &u, const OperatorContext &ctx)
{
  check_size(u, ctx.kernel, "apply_H");
  Vector out(u.size());
  for (int i = 0; i < u.size(); ++i)
    out[i] = ctx.weight[i] * phi(u[i], ctx.p());
  return out;
}

double lq_norm(const Vector &u, const Domain1D &domain, double q)
{
  double sum = 0.;
  for (int i = 0; i < u.size(); ++i)
    sum += std::pow(std::abs(u[i]), q);
  return std::pow(domain.cell_weight() * sum, 1. / q);
}

double seminorm_qh(const Vector &u, const OperatorContext &ctx)
{
  check_size(u, ctx.kernel, "seminorm_qh");
  double sum = 0.;
  for (int i = 0; i < u.size(); ++i)
    sum += std::abs(ctx.weight[i]) * std::pow(std::abs(u[i]), ctx.q);
  return std::pow(ctx.domain().cell_weight() * sum, 1. / ctx.q);
}

double hardy_ratio(const Vector &u, const KernelMatrix &kernel)
{
  check_size(u, kernel, "hardy_ratio");
  if (u.cwiseAbs().maxCoeff() == 0.)
    throw ValidationError("hardy_ratio: u must be nonzero");
  const Vector rho = distance_to_boundary(kernel.domain());
  const double sp  = kernel.s() * kernel.p();
  double       num = 0.;
  for (int i = 0; i < u.size(); ++i)
    num += std::pow(std::abs(u[i]), kernel.p()) * std::pow(rho[i], -sp);
  return kernel.domain().cell_weight() * num / energy(u, kernel);
}

double dual_norm_gram(const Vector &F, const KernelMatrix &kernel)
{
  if (kernel.p() != 2.)
    throw ValidationError("dual_norm_gram: p = 2 required");
  check_size(F, kernel, "dual_norm");
  const Vector b = kernel.domain().cell_weight() * F;
  return std::sqrt(std::max(0., b.dot(kernel.solve_gram(b))));
}

DualNormResult dual_norm(const Vector &F, const KernelMatrix &kernel, const DualNormOptions &opts)
{
  if (kernel.p() == 2.)
    return {dual_norm_gram(F, kernel), true, 0};
  return dual_norm_ascent(F, kernel, opts);
}

DualNormResult dual_norm_ascent(const Vector &F, const KernelMatrix &kernel, const DualNormOptions &opts)
{
  check_size(F, kernel, "dual_norm");
  const Domain1D &dom = kernel.domain();
  const double    w   = dom.cell_weight();
  DualNormResult  res;
  if (F.cwiseAbs().maxCoeff() == 0.)
    {
      res.converged = true;
      return res;
    }

  auto normalize = [&](Vector v) { return Vector(v / norm(v, kernel)); };
  auto ratio     = [&](const Vector &v) { return pairing(F, v, dom) / norm(v, kernel); };

  // Start from the Riesz representer of the quadratic form, nudged by a
  // seeded perturbation so that degenerate starts are avoided.
  Vector start = kernel.solve_gram(w * F);
  {
    std::mt19937_64                  rng(opts.seed);
    std::uniform_real_distribution<> U(-1., 1.);
    const double                     scale = 1e-6 * start.cwiseAbs().maxCoeff();
    for (int i = 0; i < start.size(); ++i)
      start[i] += scale * U(rng);
  }
  Vector v    = normalize(start);
  double best = ratio(v);
  double tau  = 1.;

  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations)
    {
      // Euclidean gradient of the ratio at ||v|| = 1 is w (F - <F,v> A(v)).
      const Vector g  = w * (F - pairing(F, v, dom) * apply_A(v, kernel));
      Vector       d  = kernel.solve_gram(g);
      const double dn = std::sqrt(d.dot(kernel.gram() * d));
      const double vn = std::sqrt(v.dot(kernel.gram() * v));
      if (dn <= 1e-300)
        {
          res.converged = true;
          break;
        }
      d *= vn / dn;

      bool accepted = false;
      for (int halving = 0; halving < 60; ++halving)
        {
          const Vector trial = normalize(v + tau * d);
          const double val   = ratio(trial);
          if (val > best)
            {
              const double gain = (val - best) / best;
              v                 = trial;
              best              = val;
              accepted          = true;
              tau               = std::min(2. * tau, 1.);
              if (gain < opts.tol)
                res.converged = true;
              break;
            }
          tau *= 0.5;
        }
      if (!accepted)
        {
          // no ascent along the preconditioned gradient at any step size
          res.converged = true;
          break;
        }
      if (res.converged)
        break;
    }
  res.value = best;
  return res;
}

AscentResult maximize_quotient(const KernelMatrix &kernel,
                               const Vector       &g,
                               double              q,
                               const AscentOptions &opts)
{
  check_size(g, kernel, "maximize_quotient");
  const Domain1D &dom = kernel.domain();
  const double    w   = dom.cell_weight();
  const int       n   = kernel.size();

  auto num = [&](const Vector &u) {
    double s = 0.;
    for (int i = 0; i < n; ++i)
      s += g[i] * std::pow(std::abs(u[i]), q);
    return w * s;
  };
  auto value = [&](const Vector &u) {
    return std::pow(num(u), 1. / q) / norm(u, kernel);
  };
  auto normalize = [&](Vector u) { return Vector(u / norm(u, kernel)); };

  // positive start: G is an M-matrix, so G^{-1} maps positive data to
  // positive vectors
  Vector seed_rhs(n);
  {
    std::mt19937_64                  rng(opts.seed);
    std::uniform_real_distribution<> U(0.5, 1.5);
    for (int i = 0; i < n; ++i)
      seed_rhs[i] = U(rng);
  }
  Vector       u    = normalize(kernel.solve_gram(w * seed_rhs));
  double       best = value(u);
  double       tau  = 1.;
  AscentResult res;

  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations)
    {
      const double N = num(u);
      const double E = energy(u, kernel);
      Vector       grad(n);
      const Vector a = apply_A(u, kernel);
      for (int i = 0; i < n; ++i)
        grad[i] = w * (g[i] * phi(u[i], q) / N - a[i] / E);
      Vector       d  = kernel.solve_gram(grad);
      const double dn = std::sqrt(d.dot(kernel.gram() * d));
      const double un = std::sqrt(u.dot(kernel.gram() * u));
      if (dn <= 1e-300)
        {
          res.converged = true;
          break;
        }
      d *= un / dn;

      bool accepted = false;
      for (int halving = 0; halving < 60; ++halving)
        {
          // |u| never lowers the quotient
          const Vector trial = normalize((u + tau * d).cwiseAbs());
          const double val   = value(trial);
          if (val > best)
            {
              const double gain = (val - best) / best;
              u                 = trial;
              best              = val;
              accepted          = true;
              tau               = std::min(2. * tau, 1.);
              if (gain < opts.tol)
                res.converged = true;
              break;
            }
          tau *= 0.5;
        }
      if (!accepted || res.converged)
        {
          res.converged = true;
          break;
        }
    }
  res.value  = best;
  res.argmax = u;
  return res;
}

AscentResult embedding_constant(double q, const KernelMatrix &kernel, const AscentOptions &opts)
{
  if (!(q >= 1.))
    throw ValidationError("embedding_constant: q >= 1 required");
  const double pstar = 1. * kernel.p() / (1. - kernel.s() * kernel.p());
  if (!(q < pstar))
    throw ValidationError("embedding_constant: q < p_s^* required");
  return maximize_quotient(kernel, Vector::Ones(kernel.size()), q, opts);
}

AscentResult hardy_supremum(const KernelMatrix &kernel, const AscentOptions &opts)
{
  const Vector rho = distance_to_boundary(kernel.domain());
  const double sp  = kernel.s() * kernel.p();
  Vector       g(rho.size());
  for (int i = 0; i < rho.size(); ++i)
    g[i] = std::pow(rho[i], -sp);
  AscentResult r = maximize_quotient(kernel, g, kernel.p(), opts);
  r.value        = std::pow(r.value, kernel.p());
  return r;
}

} // namespace fpl
