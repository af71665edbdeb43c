#pragma once

#include "fplap/grid.hpp"

#include <Eigen/Cholesky>

#include <cstdint>
#include <memory>

namespace fpl {

/// phi_p(t) = |t|^{p-2} t
inline double phi(double t, double p)
{
  if (p == 2.)
    return t;
  return t == 0. ? 0. : std::copysign(std::pow(std::abs(t), p - 1.), t);
}

/// Collocation discretization of the Gagliardo energy on a 1-D grid.
///
///   K_ij    = h^2 / |x_i - x_j|^{1+sp}        (i != j),  K_ii = 0
///   tail_i  = 2h [(x_i-left)^{-sp} + (right-x_i)^{-sp}] / (sp)
///
/// The tail is the exact exterior integral of the kernel, counting both
/// ordered pairs (x in Omega, y outside) and (y outside, x in Omega).
/// Copies share the assembled data.
class KernelMatrix
{
public:
  static KernelMatrix assemble(const Domain1D &domain, double s, double p);

  const Domain1D &domain() const { return data_->domain; }
  double s() const { return data_->s; }
  double p() const { return data_->p; }
  int size() const { return data_->domain.size(); }
  const Matrix &K() const { return data_->K; }
  const Vector &tail() const { return data_->tail; }

  /// Symmetric positive definite matrix G of the quadratic energy with
  /// exponent 2 and the same s: u^T G u = sum K2_ij (u_i-u_j)^2 + tail2 |u|^2.
  /// For p = 2 it is the energy matrix itself; otherwise it serves as the
  /// Sobolev preconditioner of all gradient iterations.
  const Matrix &gram() const { return data_->gram; }
  const Eigen::LLT<Matrix> &gram_factor() const { return data_->gram_llt; }

  /// G^{-1} b
  Vector solve_gram(const Vector &b) const { return data_->gram_llt.solve(b); }

private:
  struct Data
  {
    Domain1D           domain;
    double             s;
    double             p;
    Matrix             K;
    Vector             tail;
    Matrix             gram;
    Eigen::LLT<Matrix> gram_llt;
  };
  explicit KernelMatrix(std::shared_ptr<const Data> d)
    : data_(std::move(d))
  {}
  std::shared_ptr<const Data> data_;
};

/// Kernel plus the weight h of the eigenvalue problem and a growth exponent.
struct OperatorContext
{
  OperatorContext(KernelMatrix k, Vector h, double q_exponent);
  OperatorContext(const KernelMatrix &k, Vector h)
    : OperatorContext(k, std::move(h), k.p())
  {}

  KernelMatrix kernel;
  Vector       weight;
  double       q;

  const Domain1D &domain() const { return kernel.domain(); }
  double p() const { return kernel.p(); }
};

/// ||u||^p = sum_{i!=j} K_ij |u_i-u_j|^p + sum_i tail_i |u_i|^p
double energy(const Vector &u, const KernelMatrix &kernel);

/// ||u|| = energy^{1/p}
double norm(const Vector &u, const KernelMatrix &kernel);

/// Dual vectors F act on v via <F, v> = sum_i h F_i v_i.
double pairing(const Vector &F, const Vector &v, const Domain1D &domain);

/// Dual vector of the derivative of (1/p) energy: <A(u), v> is the directional
/// derivative of (1/p)||.||^p at u along v.
Vector apply_A(const Vector &u, const KernelMatrix &kernel);

/// Jacobian of u -> h*A(u) (the Euclidean gradient of (1/p)||u||^p).
/// For p < 2 the factor |t|^{p-2} is regularized as (t^2+reg^2)^{(p-2)/2}.
Matrix jacobian_A(const Vector &u, const KernelMatrix &kernel, double reg = 1e-12);

/// H(u)_i = h_i phi_p(u_i)
Vector apply_H(const Vector &u, const OperatorContext &ctx);

/// |u|_{q,h} = (int |h| |u|^q)^{1/q} with q = ctx.q
double seminorm_qh(const Vector &u, const OperatorContext &ctx);

/// L^q norm by quadrature.
double lq_norm(const Vector &u, const Domain1D &domain, double q);

/// [int |u|^p / rho^{sp}] / ||u||^p
double hardy_ratio(const Vector &u, const KernelMatrix &kernel);

struct DualNormOptions
{
  int           max_iter = 500;
  double        tol      = 1e-14;
  std::uint64_t seed     = 7;
};

struct DualNormResult
{
  double value      = 0.;
  bool   converged  = false;
  int    iterations = 0;
};

/// sup_{v != 0} <F, v> / ||v||. Exact Gram solve for p = 2, normalized
/// gradient ascent otherwise.
DualNormResult dual_norm(const Vector &F, const KernelMatrix &kernel, const DualNormOptions &opts = {});

/// Gradient-ascent route, available for every p (used to cross-check the Gram
/// solve at p = 2).
DualNormResult dual_norm_ascent(const Vector &F, const KernelMatrix &kernel, const DualNormOptions &opts = {});

/// Gram route, p = 2 only.
double dual_norm_gram(const Vector &F, const KernelMatrix &kernel);

struct AscentOptions
{
  int           max_iter = 5000;
  double        tol      = 1e-13;
  std::uint64_t seed     = 11;
};

struct AscentResult
{
  double value      = 0.;
  Vector argmax;
  bool   converged  = false;
  int    iterations = 0;
};

/// sup_u (int g |u|^q)^{1/q} / ||u|| for g >= 0 by preconditioned projected
/// ascent from a seeded positive start.
AscentResult maximize_quotient(const KernelMatrix &kernel,
                               const Vector       &g,
                               double              q,
                               const AscentOptions &opts = {});

/// Empirical sup of |u|_q / ||u||.
AscentResult embedding_constant(double q, const KernelMatrix &kernel, const AscentOptions &opts = {});

/// Empirical sup of the Hardy ratio.
AscentResult hardy_supremum(const KernelMatrix &kernel, const AscentOptions &opts = {});

} // namespace fpl
