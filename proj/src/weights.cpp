#include "fplap/weights.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace fpl {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Uniform scan of the a-interval, per the feasibility contract.
constexpr int    a_scan_points = 1000;
constexpr double min_relative_slack = 1e-9;

struct Feasible
{
  bool   ok     = false;
  double a      = 0.;
  double inv_r  = 0.;
  double margin = -inf;
};

double class_upper(WeightClass c, const SpaceParams &P, double a)
{
  const double pstar = critical_exponent(P);
  const double tail  = [&] {
    if (std::isinf(pstar))
      return 0.;
    switch (c)
      {
        case WeightClass::Aq:
          return P.q / pstar;
        case WeightClass::Wq:
          return (P.q - a) / pstar;
        default:
          return (std::max(P.p, P.q) - a) / pstar;
      }
  }();
  return 1. - (c == WeightClass::Aq ? 0. : a / P.p) - tail;
}

// For fixed a, 1/r must lie in (max(0, beta - s a), min(1, class_upper)).
Feasible best_witness(WeightClass c, double beta, const SpaceParams &P)
{
  std::vector<double> as;
  switch (c)
    {
      case WeightClass::Aq:
        as.push_back(0.);
        break;
      case WeightClass::Wq:
        for (int k = 0; k < a_scan_points; ++k)
          as.push_back(P.q * k / a_scan_points); // [0, q)
        break;
      case WeightClass::tildeWq:
        for (int k = 0; k < a_scan_points; ++k)
          as.push_back(static_cast<double>(k) / (a_scan_points - 1)); // [0, 1]
        break;
    }

  Feasible best;
  for (double a : as)
    {
      const double lo  = std::max(0., beta - P.s * a);
      const double hi  = std::min(1., class_upper(c, P, a));
      const double gap = hi - lo;
      if (gap / 2 > best.margin)
        {
          best.margin = gap / 2;
          best.a      = a;
          best.inv_r  = 0.5 * (lo + hi);
        }
    }
  best.ok = best.margin > min_relative_slack;
  return best;
}

double lr_sup_of(double beta)
{
  return beta > 0. ? 1. / beta : inf;
}

ClassReport make_report(WeightClass c, const WeightSpec &weight, const SpaceParams &P)
{
  validate(P);
  const double beta = singularity_exponent(weight);

  ClassReport report;
  report.class_name = to_string(c);
  report.lr_sup     = lr_sup_of(beta);

  const Feasible aq = best_witness(WeightClass::Aq, beta, P);
  const Feasible wq = best_witness(WeightClass::Wq, beta, P);
  const Feasible tw = best_witness(WeightClass::tildeWq, beta, P);
  report.in_Aq      = aq.ok;
  report.in_tildeWq = tw.ok;
  // a = 0 embeds A_q into W_q; for q >= p the tildeW_q inequality is the W_q one
  // with a restricted to [0,1]
  const bool tilde_implies = tw.ok && P.q >= P.p;
  report.in_Wq             = wq.ok || aq.ok || tilde_implies;

  const Feasible &mine = c == WeightClass::Aq ? aq : c == WeightClass::Wq ? wq : tw;
  report.member        = mine.ok;
  report.margin        = mine.margin;
  if (mine.ok)
    {
      report.witness = Witness{mine.a, 1. / mine.inv_r};
      // report the margin of the witness actually returned (r is rounded)
      report.margin = witness_margin(c, weight, P, *report.witness);
    }
  if (c == WeightClass::Wq && !mine.ok && (aq.ok || tilde_implies))
    {
      const Feasible &via = aq.ok ? aq : tw;
      report.member       = true;
      report.witness      = Witness{via.a, 1. / via.inv_r};
      report.margin       = witness_margin(c, weight, P, *report.witness);
    }
  return report;
}

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<double> &x, std::vector<double> &w)
{
  x.assign(n, 0.);
  w.assign(n, 0.);
  for (int i = 0; i < (n + 1) / 2; ++i)
    {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.;
      for (int it = 0; it < 100; ++it)
        {
          double p0 = 1., p1 = z;
          for (int k = 2; k <= n; ++k)
            {
              const double pk = ((2. * k - 1.) * z * p1 - (k - 1.) * p0) / k;
              p0 = p1;
              p1 = pk;
            }
          dp              = n * (z * p1 - p0) / (z * z - 1.);
          const double dz = p1 / dp;
          z -= dz;
          if (std::abs(dz) < 1e-16)
            break;
        }
      x[i]         = -z;
      x[n - 1 - i] = z;
      w[i] = w[n - 1 - i] = 2. / ((1. - z * z) * dp * dp);
    }
}

// alpha_h for the power weight written in terms of log(level), so that very
// large levels do not overflow.
double power_distribution_log(double beta, int N, double log_level)
{
  const double vol = unit_ball_volume(N);
  if (log_level <= 0.)
    return vol;
  // |h| > level  <=>  1-|x| < level^{-1/beta}
  const double x = std::exp(-log_level / beta);
  if (x >= 1.)
    return vol;
  // vol * (1 - (1-x)^N), accurate for tiny x
  return -vol * std::expm1(N * std::log1p(-x));
}

// h^*(t) from the distribution function by bisection in log(level).
double rearrangement_by_inversion(double beta, int N, double t)
{
  const double vol = unit_ball_volume(N);
  if (t >= vol)
    return 0.;
  if (beta == 0.)
    return 1.;
  double lo = 0., hi = 1.;
  while (power_distribution_log(beta, N, hi) > t)
    hi *= 2.;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it)
    {
      const double mid = 0.5 * (lo + hi);
      if (power_distribution_log(beta, N, mid) > t)
        lo = mid;
      else
        hi = mid;
    }
  return std::exp(hi);
}

} // namespace

double critical_exponent(int N, double p, double s)
{
  if (s * p < N)
    return N * p / (N - s * p);
  return inf;
}

void validate(const SpaceParams &P)
{
  std::ostringstream msg;
  if (P.N < 1)
    msg << "N >= 1 required (N=" << P.N << ")";
  else if (!(P.p > 1.))
    msg << "p > 1 required (p=" << P.p << ")";
  else if (!(P.s > 0. && P.s <= 1.))
    msg << "s in (0,1] required (s=" << P.s << ")";
  else if (!(P.q >= 1.))
    msg << "q >= 1 required (q=" << P.q << ")";
  else if (!(P.q < critical_exponent(P)))
    msg << "q < p_s^* = Np/(N-sp) required (q=" << P.q
        << ", p_s^*=" << critical_exponent(P) << ")";
  if (!msg.str().empty())
    throw ValidationError(msg.str());
}

WeightSpec WeightSpec::power(double beta, std::optional<double> negate_above)
{
  if (!(beta >= 0.))
    throw ValidationError("power weight: beta >= 0 required");
  return WeightSpec(PowerWeight{beta, negate_above});
}

WeightSpec WeightSpec::tabulated(const Domain1D &domain, Vector values)
{
  if (values.size() != domain.size())
    throw ValidationError("tabulated weight: value count does not match grid");
  if (!values.allFinite())
    throw ValidationError("tabulated weight: values must be finite");
  return WeightSpec(TabulatedWeight{domain, std::move(values)});
}

Vector evaluate_weight(const WeightSpec &weight, const Domain1D &domain)
{
  if (!weight.is_power())
    {
      const auto &tab = weight.as_tabulated();
      if (!(tab.domain == domain))
        throw ValidationError("tabulated weight was sampled on a different grid");
      return tab.values;
    }
  const auto  &pw  = weight.as_power();
  const Vector rho = distance_to_boundary(domain);
  Vector       h(domain.size());
  for (int i = 0; i < domain.size(); ++i)
    {
      h[i] = pw.beta == 0. ? 1. : std::pow(rho[i], -pw.beta);
      if (pw.negate_above && domain.node(i) > *pw.negate_above)
        h[i] = -h[i];
    }
  return h;
}

double singularity_exponent(const WeightSpec &weight)
{
  if (weight.is_power())
    return weight.as_power().beta;

  const auto  &tab = weight.as_tabulated();
  const Vector rho = distance_to_boundary(tab.domain);
  const int    n   = tab.domain.size();
  const int    per_side = std::max(2, n / 8);

  double sx = 0., sy = 0., sxx = 0., sxy = 0.;
  int    m  = 0;
  for (int i = 0; i < n; ++i)
    {
      if (i >= per_side && i < n - per_side)
        continue;
      if (tab.values[i] == 0.)
        continue;
      const double x = -std::log(rho[i]);
      const double y = std::log(std::abs(tab.values[i]));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++m;
    }
  if (m < 2)
    return 0.;
  const double denom = m * sxx - sx * sx;
  if (denom <= 0.)
    return 0.;
  return std::max(0., (m * sxy - sx * sy) / denom);
}

const char *to_string(WeightClass c)
{
  switch (c)
    {
      case WeightClass::Aq:
        return "Aq";
      case WeightClass::Wq:
        return "Wq";
      default:
        return "tildeWq";
    }
}

ClassReport check_Aq(const WeightSpec &weight, const SpaceParams &params)
{
  return make_report(WeightClass::Aq, weight, params);
}

ClassReport check_Wq(const WeightSpec &weight, const SpaceParams &params)
{
  return make_report(WeightClass::Wq, weight, params);
}

ClassReport check_tildeWq(const WeightSpec &weight, const SpaceParams &params)
{
  return make_report(WeightClass::tildeWq, weight, params);
}

ClassReport check_class(WeightClass c, const WeightSpec &weight, const SpaceParams &params)
{
  return make_report(c, weight, params);
}

double witness_margin(WeightClass        c,
                      const WeightSpec  &weight,
                      const SpaceParams &P,
                      const Witness     &wit)
{
  const double beta   = singularity_exponent(weight);
  const double inv_r  = 1. / wit.r;
  double       a_ok   = 0.;
  switch (c)
    {
      case WeightClass::Aq:
        a_ok = wit.a == 0. ? inf : -1.;
        break;
      case WeightClass::Wq:
        a_ok = wit.a >= 0. ? P.q - wit.a : -1.;
        break;
      case WeightClass::tildeWq:
        a_ok = wit.a >= 0. && wit.a <= 1. ? inf : -1.;
        break;
    }
  const double class_slack = class_upper(c, P, wit.a) - inv_r;
  const double lr_slack    = inv_r - (beta - P.s * (c == WeightClass::Aq ? 0. : wit.a));
  const double r_slack     = std::min(inv_r, 1. - inv_r);
  return std::min({a_ok, class_slack, lr_slack, r_slack});
}

bool witness_holds_exactly(WeightClass        c,
                           const WeightSpec  &weight,
                           const SpaceParams &P,
                           const Witness     &wit)
{
  using Q = boost::multiprecision::cpp_rational;
  const Q beta(singularity_exponent(weight));
  const Q a(wit.a), r(wit.r), p(P.p), q(P.q), s(P.s), N(P.N);

  if (!(r > 1))
    return false;
  switch (c)
    {
      case WeightClass::Aq:
        if (a != 0)
          return false;
        break;
      case WeightClass::Wq:
        if (a < 0 || a >= q)
          return false;
        break;
      case WeightClass::tildeWq:
        if (a < 0 || a > 1)
          return false;
        break;
    }

  const Q inv_r = Q(1) / r;
  Q       lhs   = inv_r;
  if (c != WeightClass::Aq)
    lhs += a / p;
  if (s * p < N)
    {
      const Q pstar = N * p / (N - s * p);
      const Q top   = c == WeightClass::Aq ? q
                      : c == WeightClass::Wq ? q - a
                                             : (p > q ? p : q) - a;
      lhs += top / pstar;
    }
  if (!(lhs < 1))
    return false;
  // h rho^{sa} in L^r  <=>  r (beta - s a) < 1
  const Q sa = c == WeightClass::Aq ? Q(0) : s * a;
  return r * (beta - sa) < 1;
}

bool in_Lr(const WeightSpec &weight, double r)
{
  return r * singularity_exponent(weight) < 1.;
}

double unit_ball_volume(int N)
{
  // V_N = 2 pi / N * V_{N-2}
  double v = N % 2 == 0 ? 1. : 2.;
  for (int k = N % 2 == 0 ? 2 : 3; k <= N; k += 2)
    v *= 2. * std::numbers::pi / k;
  return v;
}

double distribution_function(const WeightSpec &weight, int N, double level)
{
  if (!weight.is_power())
    {
      const auto &tab = weight.as_tabulated();
      const auto  cnt = (tab.values.array().abs() > level).count();
      return tab.domain.cell_weight() * static_cast<double>(cnt);
    }
  const double beta = weight.as_power().beta;
  const double vol  = unit_ball_volume(N);
  if (beta == 0.)
    return level < 1. ? vol : 0.;
  if (level <= 1.)
    return vol;
  return power_distribution_log(beta, N, std::log(level));
}

double decreasing_rearrangement(const WeightSpec &weight, int N, double t)
{
  if (!(t > 0.))
    throw ValidationError("decreasing_rearrangement: t > 0 required");
  if (!weight.is_power())
    {
      const auto &tab = weight.as_tabulated();
      std::vector<double> v(tab.values.size());
      for (int i = 0; i < tab.values.size(); ++i)
        v[i] = std::abs(tab.values[i]);
      std::sort(v.begin(), v.end(), std::greater<>());
      const auto k = static_cast<std::size_t>(std::floor(t / tab.domain.cell_weight()));
      return k < v.size() ? v[k] : 0.;
    }
  const double beta = weight.as_power().beta;
  const double vol  = unit_ball_volume(N);
  if (t >= vol)
    return 0.;
  if (beta == 0.)
    return 1.;
  // 1 - (1 - t/|B|)^{1/N}
  const double x = -std::expm1(std::log1p(-t / vol) / N);
  return std::pow(x, -beta);
}

LorentzVerdict lorentz_membership_analytic(const WeightSpec    &weight,
                                           int                  N,
                                           const LorentzParams &L)
{
  if (!weight.is_power())
    throw ValidationError("analytic Lorentz test needs a power weight");
  if (!(L.p0 > 1. && L.q0 > 1.))
    throw ValidationError("Lorentz parameters require p0 > 1 and q0 > 1");
  (void)N;
  // h^*(t) ~ t^{-beta} as t -> 0+, so the integrand behaves like
  // t^{(1/p0 - beta) q0 - 1}.
  LorentzVerdict out;
  out.indicator = (1. / L.p0 - weight.as_power().beta) * L.q0;
  out.verdict   = out.indicator > 0. ? Verdict::yes : Verdict::no;
  out.diagnostic = "tail exponent (1/p0 - beta) q0 = " + std::to_string(out.indicator);
  return out;
}

LorentzVerdict lorentz_membership_numeric(const WeightSpec            &weight,
                                          int                          N,
                                          const LorentzParams         &L,
                                          const LorentzNumericOptions &opts)
{
  if (!(L.p0 > 1. && L.q0 > 1.))
    throw ValidationError("Lorentz parameters require p0 > 1 and q0 > 1");

  LorentzVerdict out;
  if (!weight.is_power())
    {
      // Step rearrangement of finitely many bounded values: the integral is a
      // finite sum of exact cell integrals.
      const auto &tab = weight.as_tabulated();
      const double w  = tab.domain.cell_weight();
      std::vector<double> v(tab.values.size());
      for (int i = 0; i < tab.values.size(); ++i)
        v[i] = std::abs(tab.values[i]);
      std::sort(v.begin(), v.end(), std::greater<>());
      const double e = L.q0 / L.p0;
      double       I = 0.;
      for (std::size_t k = 0; k < v.size(); ++k)
        I += std::pow(v[k], L.q0) *
             (std::pow((k + 1) * w, e) - std::pow(k * w, e)) / e;
      out.verdict    = Verdict::yes;
      out.value      = I;
      out.diagnostic = "finite step rearrangement";
      return out;
    }

  const double beta = weight.as_power().beta;
  const double vol  = unit_ball_volume(N);
  std::vector<double> gx, gw;
  gauss_legendre(16, gx, gw);

  // integral over log t in [log lo, log hi] of [t^{1/p0} h^*(t)]^{q0}
  auto window = [&](double log_lo, double log_hi) {
    const int    panels = 4 * static_cast<int>(std::ceil((log_hi - log_lo) / std::log(10.)));
    const double dy     = (log_hi - log_lo) / panels;
    double       sum    = 0.;
    for (int k = 0; k < panels; ++k)
      for (std::size_t j = 0; j < gx.size(); ++j)
        {
          const double y  = log_lo + dy * (k + 0.5 * (gx[j] + 1.));
          const double t  = std::exp(y);
          const double hs = rearrangement_by_inversion(beta, N, t);
          sum += 0.5 * dy * gw[j] *
                 std::exp(L.q0 * (y / L.p0 + std::log(hs)));
        }
    return sum;
  };

  const double log_top = std::log(vol);
  const double log_e0  = std::log(vol * 1e-3);
  const double step    = -std::log(opts.window_ratio);
  const double head    = window(log_e0, log_top);
  const double d1      = window(log_e0 - step, log_e0);
  const double d2      = window(log_e0 - 2 * step, log_e0 - step);
  const double d3      = window(log_e0 - 3 * step, log_e0 - 2 * step);
  const double r1      = d2 / d1;
  const double r2      = d3 / d2;

  out.value     = head + d1 + d2 + d3;
  out.indicator = r2;
  std::ostringstream diag;
  diag << "window increment ratios " << r1 << ", " << r2;
  const double f = opts.divergence_factor;
  if (r1 > f && r2 > f)
    out.verdict = Verdict::no;
  else if (r1 < 1. / f && r2 < 1. / f)
    out.verdict = Verdict::yes;
  else
    {
      out.verdict = Verdict::inconclusive;
      diag << " (near threshold)";
    }
  out.diagnostic = diag.str();
  return out;
}

} // namespace fpl
