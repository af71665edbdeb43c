#pragma once

#include "fplap/eigenproblem.hpp"
#include "fplap/weights.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fpl {

/// coef * h(x) * |t|^{q-2} t when odd, coef * h(x) * |t|^{q-1} otherwise.
struct RhsTerm
{
  double     coef = 1.;
  WeightSpec weight;
  double     q   = 2.;
  bool       odd = true;
};

/// Adds lambda * h(x) * phi_p(t).
struct LambdaCoupling
{
  double     lambda = 0.;
  WeightSpec weight;
};

struct RhsSpec
{
  std::vector<RhsTerm>          terms;
  std::optional<LambdaCoupling> coupling;
  std::optional<Vector>         forcing;  ///< dual vector, acts by <f, v> = sum h f_i v_i
};

/// Right-hand side sampled on a grid: f(x_i, t) for every node.
class DiscreteRhs
{
public:
  struct Term
  {
    double coef;
    Vector h;
    double q;
    bool   odd;
  };

  DiscreteRhs(const RhsSpec &spec, const Domain1D &domain, double p);

  int size() const { return size_; }
  double p() const { return p_; }
  const std::vector<Term> &terms() const { return terms_; }
  double lambda() const { return lambda_; }
  const Vector &coupling_weight() const { return coupling_h_; }
  const Vector &forcing() const { return forcing_; }

  /// Drops the lambda coupling and the forcing (the part F_lambda of the
  /// bifurcation problem, or the pure nonlinearity).
  DiscreteRhs terms_only() const;
  DiscreteRhs with_lambda(double lambda) const;

  /// t -> f(x_i, t) without forcing, its derivative and primitive F(x_i, t).
  double value(int i, double t) const;
  double derivative(int i, double t, double reg = 1e-12) const;
  double primitive(int i, double t) const;

  /// f(x, u) plus forcing, as a dual vector.
  Vector evaluate(const Vector &u) const;
  /// int F(x, u) + <forcing, u>
  double integrated_primitive(const Vector &u, const Domain1D &domain) const;

private:
  DiscreteRhs() = default;
  int               size_ = 0;
  double            p_    = 2.;
  std::vector<Term> terms_;
  double            lambda_ = 0.;
  Vector            coupling_h_;
  Vector            forcing_;
};

struct ResidualResult
{
  Vector F;      ///< A(u) - f(x,u) - forcing
  double norm = 0.;
};

ResidualResult residual(const Vector &u, const DiscreteRhs &rhs, const KernelMatrix &kernel);

struct Solution
{
  Vector u;
  double residual = 0.;
  double energy   = 0.;
};

/// Raised when lambda lies inside the guard band around lambda_1 or the
/// shifted operator is numerically singular.
class ResonanceError : public ValidationError
{
public:
  ResonanceError(const std::string &what, double condition)
    : ValidationError(what)
    , condition_(condition)
  {}
  double condition() const { return condition_; }

private:
  double condition_;
};

struct FredholmOptions
{
  SolverOptions         solver;
  double                resonance_guard = 1e-3;  ///< relative to lambda_1
  double                condition_limit = 1e10;
  int                   starts          = 8;
  std::optional<double> lambda1;  ///< computed when absent
  std::optional<double> lambda2;
};

/// Condition number of G - lambda diag(h w) (p = 2).
double shifted_condition(double lambda, const OperatorContext &ctx);

/// (1/p)||u||^p - (lambda/p) int h|u|^p - <f, u>
double fredholm_energy(const Vector &u, double lambda, const Vector &f, const OperatorContext &ctx);

/// Solves A(u) - lambda h phi_p(u) = f for lambda in (0, lambda_2) away from
/// lambda_1. Throws ResonanceError inside the guard band or when the shifted
/// system is singular, ConvergenceError when every start fails.
Solution solve_fredholm(double lambda, const Vector &f, const OperatorContext &ctx, const FredholmOptions &opts = {});

/// Dense linear solve of (G - lambda diag(h w)) u = w f (p = 2 only).
Vector fredholm_linear_oracle(double lambda, const Vector &f, const OperatorContext &ctx);

/// Even C^1 (indeed C^2) cutoff: 1 on [-t2, t2], 0 outside [-2t2, 2t2],
/// quintic smoothstep in between.
double eta(double t, double t2);
double eta_prime(double t, double t2);
double eta_second(double t, double t2);
/// sup |eta'| = 15 / (8 t2)
double eta_prime_sup(double t2);

struct TruncationSpec
{
  double t0    = 0.;
  double t1    = 0.;
  double t2    = 0.;
  double gamma = 0.;
};

enum class Hypothesis
{
  F1,
  F2,
  F3,
  F4,
  F5,
  F6
};

const char *to_string(Hypothesis h);

struct HypothesisReport
{
  Hypothesis               which   = Hypothesis::F1;
  Verdict                  verdict = Verdict::inconclusive;
  std::vector<std::string> violations;
  /// F4: largest sampled t0 with pF - ft > 0 on (0, t0); F5: smallest and
  /// largest sampled ratio f / phi_p
  double threshold = 0.;
  double ratio_small = 0.;
  double ratio_large = 0.;
};

/// Symbolic exponent checks for power terms plus sampling on a log-spaced
/// t-grid over every node.
HypothesisReport check_hypotheses(const RhsSpec     &rhs,
                                  Hypothesis         which,
                                  const SpaceParams &params,
                                  const Domain1D    &domain);

/// t0 from (F4), t1 = sup{t < t0 : F(x,s) >= |s|^p, f odd for |s| < t},
/// t2 = t1/4, gamma = min(1, 1/(p C^p))/2 with C^p = 1/lambda_1(h = 1).
TruncationSpec default_truncation(const RhsSpec &rhs, const KernelMatrix &kernel);

class TruncatedRhs
{
public:
  TruncatedRhs(DiscreteRhs base, TruncationSpec spec);

  const DiscreteRhs &base() const { return base_; }
  const TruncationSpec &spec() const { return spec_; }
  int size() const { return base_.size(); }

  double value(int i, double t) const;
  double derivative(int i, double t, double reg = 1e-12) const;
  double primitive(int i, double t) const;

  /// 2 t2 |eta'| / min q + 1 + 2 t2 gamma |eta'| + p gamma
  double growth_constant() const;
  /// C_1 [sum |coef h_i| |t|^{q_i-1} + |t|^{p-1}]
  double growth_bound(int i, double t) const;

  Vector evaluate(const Vector &u) const;
  /// Euclidean Jacobian of u -> h * f~(x, u): diagonal
  Vector evaluate_derivative(const Vector &u, double reg = 1e-12) const;
  double integrated_primitive(const Vector &u, const Domain1D &domain) const;

private:
  DiscreteRhs    base_;
  TruncationSpec spec_;
};

/// Checks the preconditions (oddness and F >= |t|^p below t1, pF - ft > 0
/// below t0, ordering of t0, t1, t2, gamma range) and returns the truncated
/// nonlinearity. Throws ValidationError listing every violated condition.
TruncatedRhs build_truncation(const RhsSpec &rhs, const TruncationSpec &spec, const KernelMatrix &kernel);

/// (1/p)||u||^p - int F~(x, u)
double modified_energy(const Vector &u, const TruncatedRhs &rhs, const KernelMatrix &kernel);

/// A(u) - f~(x, u)
ResidualResult modified_residual(const Vector &u, const TruncatedRhs &rhs, const KernelMatrix &kernel);

struct SmallSolution
{
  Solution solution;
  int      level           = 0;
  double   sup_norm        = 0.;
  double   plain_residual  = 0.;  ///< residual of the untruncated problem
  bool     below_t1        = false;
  bool     below_t2        = false;  ///< f~ = f along u
};

struct SmallSolutionOptions
{
  SolverOptions solver;
  int           starts      = 16;
  double        dedup_tol   = 1e-4;
};

struct SmallSolutionSearch
{
  std::vector<SmallSolution> solutions;  ///< sorted by energy, one per +-pair
  std::vector<int>           gaps;       ///< levels without a new negative-energy critical point
};

/// For n = 1..n_levels searches critical points of the modified energy in the
/// span X_n of the first n Gram eigenvectors, polishes them on the full grid
/// and keeps those with negative energy, residual below tol and |u| < t1.
SmallSolutionSearch find_small_solutions(const TruncatedRhs         &rhs,
                                         const KernelMatrix         &kernel,
                                         int                         n_levels,
                                         const SmallSolutionOptions &opts = {});

} // namespace fpl
