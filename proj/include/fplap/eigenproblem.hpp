#pragma once

#include "fplap/errors.hpp"
#include "fplap/gagliardo.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace fpl {

struct SolverOptions
{
  double        tol      = 1e-10;
  int           max_iter = 20000;
  double        step0    = 1.;
  std::uint64_t seed     = 1;
};

/// (lambda, u) with int h|u|^p = 1.
struct EigenPair
{
  double lambda        = 0.;
  Vector u;
  double residual      = 0.;
  double normalization = 0.;
  int    iterations    = 0;
};

/// int h |u|^p
double weighted_power(const Vector &u, const OperatorContext &ctx);

/// u / (int h|u|^p)^{1/p}. Throws ValidationError when int h|u|^p <= 0.
Vector project_to_constraint(const Vector &u, const OperatorContext &ctx);

/// Dual norm of A(u) - lambda h phi_p(u).
double eigen_residual(double lambda, const Vector &u, const OperatorContext &ctx);
double eigen_residual(const EigenPair &pair, const OperatorContext &ctx);

/// First eigenpair by preconditioned projected descent on the Rayleigh
/// quotient ||u||^p / int h|u|^p. Requires h_i > 0 at some node.
EigenPair solve_first(const OperatorContext &ctx, const SolverOptions &opts = {});

struct SimplicityReport
{
  Verdict verdict       = Verdict::inconclusive;
  double  min_alignment = 0.;
  int     trials        = 0;
};

/// Runs solve_first from `trials` seeded starts and compares the minimizers.
SimplicityReport check_simplicity(const OperatorContext &ctx,
                                  int                    trials,
                                  const SolverOptions   &opts = {});

/// Closed loop on the constraint set with points[k + m/2] = -points[k].
struct OddPath
{
  std::vector<Vector> points;

  int size() const { return static_cast<int>(points.size()); }
};

/// Great circle through e1 and an h-orthogonalized odd direction, projected
/// onto the constraint set.
OddPath initial_path(const OperatorContext &ctx, const Vector &e1, int m = 32);

/// Doubles the resolution: inserts projected midpoints between neighbours.
OddPath refine_path(const OddPath &path, const OperatorContext &ctx);

/// Checks oddness and normalization of every point.
bool is_admissible(const OddPath &path, const OperatorContext &ctx, double tol = 1e-9);

struct SecondEigenResult
{
  /// max_k ||points[k]||^p over the relaxed path; an upper bound for lambda_2
  double  lambda2 = 0.;
  OddPath path;
  int     argmax     = 0;
  Vector  maximizer;
  int     iterations = 0;
  bool    converged  = false;
};

/// Relaxes an odd path on the constraint set to lower its maximal energy:
/// every point takes a descent step, then the half-loop from points[0] to
/// -points[0] is redistributed by arclength and mirrored.
SecondEigenResult solve_second(const OperatorContext &ctx,
                               const OddPath         &path,
                               const SolverOptions   &opts = {});

struct OracleMode
{
  double lambda = 0.;
  Vector u;
};

/// Dense generalized symmetric eigendecomposition for p = 2:
/// G u = lambda diag(h w) u, positive eigenvalues ascending, int h u^2 = 1.
std::vector<OracleMode> oracle_spectrum_p2(const OperatorContext &ctx);

} // namespace fpl
