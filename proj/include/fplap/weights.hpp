#pragma once

#include "fplap/errors.hpp"
#include "fplap/grid.hpp"

#include <limits>
#include <optional>
#include <string>
#include <variant>

namespace fpl {

/// Ambient dimension N, integrability p, smoothness s and growth exponent q.
struct SpaceParams
{
  int    N = 1;
  double p = 2.;
  double s = 0.5;
  double q = 2.;
};

/// p_s^* = Np/(N-sp) when sp < N, +infinity otherwise.
double critical_exponent(int N, double p, double s);
inline double critical_exponent(const SpaceParams &params)
{
  return critical_exponent(params.N, params.p, params.s);
}

/// Throws ValidationError naming the violated constraint.
void validate(const SpaceParams &params);

/// Radial power weight (1-|x|)^{-beta} on the unit ball. On a 1-D solver
/// domain it is evaluated as rho(x)^{-beta}. Nodes with x > negate_above get
/// the opposite sign.
struct PowerWeight
{
  double                beta = 0.;
  std::optional<double> negate_above;
};

struct TabulatedWeight
{
  Domain1D domain;
  Vector   values;
};

class WeightSpec
{
public:
  static WeightSpec power(double beta, std::optional<double> negate_above = {});
  static WeightSpec tabulated(const Domain1D &domain, Vector values);
  static WeightSpec constant_one() { return power(0.); }

  bool is_power() const { return std::holds_alternative<PowerWeight>(data_); }
  const PowerWeight &as_power() const { return std::get<PowerWeight>(data_); }
  const TabulatedWeight &as_tabulated() const
  {
    return std::get<TabulatedWeight>(data_);
  }

private:
  explicit WeightSpec(std::variant<PowerWeight, TabulatedWeight> d)
    : data_(std::move(d))
  {}
  std::variant<PowerWeight, TabulatedWeight> data_;
};

/// Nodal values of the weight on a solver grid.
Vector evaluate_weight(const WeightSpec &weight, const Domain1D &domain);

/// Exponent of the boundary singularity: beta for power weights, a
/// least-squares fit of log|h| against -log(rho) over the boundary layer for
/// tabulated ones (clamped at 0).
double singularity_exponent(const WeightSpec &weight);

enum class WeightClass
{
  Aq,
  Wq,
  tildeWq
};

const char *to_string(WeightClass c);

struct Witness
{
  double a = 0.;
  double r = 0.;
};

struct ClassReport
{
  std::string            class_name;
  bool                   member = false;
  std::optional<Witness> witness;
  /// Smallest slack among the defining inequalities at the witness.
  double margin = 0.;
  bool   in_Aq      = false;
  bool   in_Wq      = false;
  bool   in_tildeWq = false;
  /// sup{r : h in L^r}; +inf for bounded weights. The supremum is excluded.
  double lr_sup = std::numeric_limits<double>::infinity();
};

ClassReport check_Aq(const WeightSpec &weight, const SpaceParams &params);
ClassReport check_Wq(const WeightSpec &weight, const SpaceParams &params);
ClassReport check_tildeWq(const WeightSpec &weight, const SpaceParams &params);
ClassReport check_class(WeightClass c,
                        const WeightSpec &weight,
                        const SpaceParams &params);

/// Slack of the weakest defining inequality for a given (a, r), in floating
/// point. Positive means the witness is valid.
double witness_margin(WeightClass        c,
                      const WeightSpec  &weight,
                      const SpaceParams &params,
                      const Witness     &witness);

/// Same inequalities evaluated in exact rational arithmetic on the binary
/// values of all inputs. Only the sign is reported.
bool witness_holds_exactly(WeightClass        c,
                           const WeightSpec  &weight,
                           const SpaceParams &params,
                           const Witness     &witness);

/// h in L^r(Omega) for a power-type singularity: r * beta < 1.
bool in_Lr(const WeightSpec &weight, double r);

/// Volume of the unit ball in R^N.
double unit_ball_volume(int N);

/// alpha_h(level) = |{x : |h(x)| > level}|. Power weights live on the unit
/// ball of R^N; tabulated weights use cell counting on their grid.
double distribution_function(const WeightSpec &weight, int N, double level);

/// h^*(t) = inf{level > 0 : alpha_h(level) <= t}.
double decreasing_rearrangement(const WeightSpec &weight, int N, double t);

struct LorentzParams
{
  double p0 = 1.5;
  double q0 = 2.;
};

struct LorentzVerdict
{
  Verdict     verdict = Verdict::inconclusive;
  /// Tail exponent (1/p0 - beta) q0 of the quasinorm integrand (analytic), or
  /// ratio of consecutive window increments (numeric).
  double      indicator = 0.;
  double      value     = 0.;
  std::string diagnostic;
};

struct LorentzNumericOptions
{
  /// One refinement shrinks the lower integration limit by this factor.
  double window_ratio = 1e-8;
  /// Increment ratio above this means divergence, below 1/divergence_factor
  /// convergence; anything in between is inconclusive.
  double divergence_factor = 1.25;
};

LorentzVerdict lorentz_membership_analytic(const WeightSpec    &weight,
                                           int                  N,
                                           const LorentzParams &lorentz);

LorentzVerdict lorentz_membership_numeric(const WeightSpec            &weight,
                                          int                          N,
                                          const LorentzParams         &lorentz,
                                          const LorentzNumericOptions &opts = {});

} // namespace fpl
