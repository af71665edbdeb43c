#include "cli.hpp"

#include "fplap/apriori.hpp"
#include "fplap/bifurcation.hpp"
#include "fplap/io.hpp"
#include "fplap/parallel.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fpl::cli {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string &msg)
{
  throw ValidationError("config: " + msg);
}

double get_number(const json &j, const char *key, double fallback)
{
  if (!j.contains(key))
    return fallback;
  if (!j.at(key).is_number())
    invalid(std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

int get_int(const json &j, const char *key, int fallback)
{
  if (!j.contains(key))
    return fallback;
  if (!j.at(key).is_number_integer())
    invalid(std::string("'") + key + "' must be an integer");
  return j.at(key).get<int>();
}

json object_or_empty(const json &j, const char *key)
{
  if (!j.contains(key))
    return json::object();
  if (!j.at(key).is_object())
    invalid(std::string("'") + key + "' must be an object");
  return j.at(key);
}

json resolve_weight(const json &w, int n, const char *where)
{
  json out;
  const std::string type = w.value("type", std::string("power"));
  if (type == "power")
    {
      out["type"] = "power";
      out["beta"] = get_number(w, "beta", 0.);
      if (!(out["beta"].get<double>() >= 0.))
        invalid(std::string(where) + ": beta >= 0 required");
      if (w.contains("negate_above"))
        out["negate_above"] = get_number(w, "negate_above", 0.);
    }
  else if (type == "tabulated")
    {
      if (!w.contains("values") || !w.at("values").is_array())
        invalid(std::string(where) + ": tabulated weight needs a 'values' array");
      if (static_cast<int>(w.at("values").size()) != n)
        invalid(std::string(where) + ": tabulated weight must have n = " + std::to_string(n) + " values");
      for (const auto &v : w.at("values"))
        if (!v.is_number())
          invalid(std::string(where) + ": tabulated values must be numbers");
      out["type"]   = "tabulated";
      out["values"] = w.at("values");
    }
  else
    invalid(std::string(where) + ": unknown weight type '" + type + "'");
  return out;
}

std::filesystem::path output_dir(const std::string &flag)
{
  std::filesystem::path dir = ".";
  if (!flag.empty())
    dir = flag;
  else if (const char *env = std::getenv("FPLAP_OUTPUT_DIR"); env && *env)
    dir = env;
  std::filesystem::create_directories(dir);
  return dir;
}

void write_json(const std::filesystem::path &file, const json &j)
{
  std::ofstream out(file, std::ios::binary);
  if (!out)
    throw Error("cannot open " + file.string() + " for writing");
  out << j.dump(2) << '\n';
}

} // namespace

json ExperimentConfig::resolved() const
{
  json j;
  j["domain"]   = {{"left", domain.left}, {"right", domain.right}, {"n", domain.n}};
  j["operator"] = {{"p", op.p}, {"s", op.s}};
  j["weight"]   = weight;
  j["rhs"]      = rhs;
  j["solver"]   = {{"tol", solver.tol}, {"max_iter", solver.max_iter}, {"seed", solver.seed}};
  j["eigen"]    = eigen;
  j["bounds"]   = bounds;
  j["solve"]    = solve;
  j["bifurcate"] = bifurcate;
  return j;
}

std::string ExperimentConfig::hash() const
{
  return hash_hex(fnv1a64(resolved().dump()));
}

ExperimentConfig parse_config(const json &j)
{
  if (!j.is_object())
    invalid("top level must be an object");
  ExperimentConfig cfg;

  const json dom     = object_or_empty(j, "domain");
  cfg.domain.left    = get_number(dom, "left", -1.);
  cfg.domain.right   = get_number(dom, "right", 1.);
  cfg.domain.n       = get_int(dom, "n", 64);
  if (!(cfg.domain.left < cfg.domain.right))
    invalid("domain: left < right required");
  if (cfg.domain.n < 2)
    invalid("domain: n >= 2 required");

  const json op = object_or_empty(j, "operator");
  cfg.op.p      = get_number(op, "p", 2.);
  cfg.op.s      = get_number(op, "s", 0.4);
  if (!(cfg.op.p > 1.))
    invalid("operator: p > 1 required");
  if (!(cfg.op.s > 0. && cfg.op.s < 1.))
    invalid("operator: 0 < s < 1 required");
  if (!(cfg.op.s * cfg.op.p < 1.))
    invalid("operator: sp < N = 1 required (sp = " + std::to_string(cfg.op.s * cfg.op.p) + ")");
  const double ps = critical_exponent(1, cfg.op.p, cfg.op.s);

  cfg.weight = resolve_weight(object_or_empty(j, "weight"), cfg.domain.n, "weight");

  const json rhs = object_or_empty(j, "rhs");
  cfg.rhs        = json::object();
  json terms     = json::array();
  if (rhs.contains("terms"))
    {
      if (!rhs.at("terms").is_array())
        invalid("rhs: 'terms' must be an array");
      for (const auto &t : rhs.at("terms"))
        {
          json r;
          r["coef"] = get_number(t, "coef", 1.);
          r["q"]    = get_number(t, "q", 2.);
          r["odd"]  = t.value("odd", true);
          const double q = r["q"].get<double>();
          if (!(q >= 1.) || !(q < ps))
            invalid("rhs term: 1 <= q < p_s* = " + std::to_string(ps) + " required (q = " + std::to_string(q) + ")");
          r["weight"] = resolve_weight(object_or_empty(t, "weight"), cfg.domain.n, "rhs term weight");
          terms.push_back(r);
        }
    }
  cfg.rhs["terms"] = terms;
  if (rhs.contains("lambda"))
    {
      const json lam = rhs.at("lambda");
      cfg.rhs["lambda"] = {{"value", get_number(lam, "value", 0.)},
                           {"weight", resolve_weight(object_or_empty(lam, "weight"), cfg.domain.n, "rhs lambda weight")}};
    }
  if (rhs.contains("forcing"))
    {
      const json &f = rhs.at("forcing");
      if (f.is_string())
        {
          const std::string kind = f.get<std::string>();
          if (kind != "ones" && kind != "e1")
            invalid("rhs: forcing must be an array, \"ones\" or \"e1\"");
        }
      else if (!f.is_array() || static_cast<int>(f.size()) != cfg.domain.n)
        invalid("rhs: forcing array must have n = " + std::to_string(cfg.domain.n) + " values");
      cfg.rhs["forcing"] = f;
    }

  const json sol        = object_or_empty(j, "solver");
  cfg.solver.tol        = get_number(sol, "tol", 1e-10);
  cfg.solver.max_iter   = get_int(sol, "max_iter", 20000);
  const int seed        = get_int(sol, "seed", 1);
  if (!(cfg.solver.tol > 0.))
    invalid("solver: tol > 0 required");
  if (cfg.solver.max_iter < 1)
    invalid("solver: max_iter >= 1 required");
  if (seed < 0)
    invalid("solver: seed >= 0 required");
  cfg.solver.seed = static_cast<std::uint64_t>(seed);

  const json eig   = object_or_empty(j, "eigen");
  cfg.eigen        = {{"path_points", get_int(eig, "path_points", 32)},
                      {"simplicity_trials", get_int(eig, "simplicity_trials", 10)}};
  const int m      = cfg.eigen["path_points"].get<int>();
  if (m < 4 || m % 2 != 0)
    invalid("eigen: path_points must be even and >= 4");
  if (cfg.eigen["simplicity_trials"].get<int>() < 2)
    invalid("eigen: simplicity_trials >= 2 required");

  const json bnd = object_or_empty(j, "bounds");
  cfg.bounds     = {{"n_max", get_int(bnd, "n_max", default_n_max)}};
  if (cfg.bounds["n_max"].get<int>() < 1)
    invalid("bounds: n_max >= 1 required");
  if (bnd.contains("q_tilde"))
    {
      cfg.bounds["q_tilde"] = get_number(bnd, "q_tilde", 0.);
      if (!(cfg.bounds["q_tilde"].get<double>() >= 1.))
        invalid("bounds: q_tilde >= 1 required");
    }
  else if (bnd.contains("growth"))
    {
      GrowthSpec g;
      for (const auto &t : bnd.at("growth"))
        g.terms.push_back({get_number(t, "q", 2.), get_number(t, "r", 2.), get_number(t, "a", 0.)});
      cfg.bounds["q_tilde"] = compute_qtilde(g, {1, cfg.op.p, cfg.op.s, cfg.op.p});
      cfg.bounds["growth"]  = bnd.at("growth");
    }
  else
    cfg.bounds["q_tilde"] = cfg.op.p;

  const json sv = object_or_empty(j, "solve");
  cfg.solve     = {{"mode", sv.value("mode", std::string("fredholm"))}};
  const std::string mode = cfg.solve["mode"];
  if (mode == "fredholm")
    {
      if (sv.contains("lambda"))
        cfg.solve["lambda"] = get_number(sv, "lambda", 0.);
      else
        cfg.solve["lambda_factor"] = get_number(sv, "lambda_factor", 0.5);
      cfg.solve["resonance_guard"] = get_number(sv, "resonance_guard", 1e-3);
      cfg.solve["starts"]          = get_int(sv, "starts", 8);
    }
  else if (mode == "small")
    {
      cfg.solve["levels"]    = get_int(sv, "levels", 6);
      cfg.solve["starts"]    = get_int(sv, "starts", 16);
      cfg.solve["dedup_tol"] = get_number(sv, "dedup_tol", 1e-4);
      if (cfg.solve["levels"].get<int>() < 1 || cfg.solve["levels"].get<int>() > cfg.domain.n)
        invalid("solve: 1 <= levels <= n required");
      if (sv.contains("truncation"))
        cfg.solve["truncation"] = sv.at("truncation");
    }
  else
    invalid("solve: mode must be \"fredholm\" or \"small\"");

  const json bf  = object_or_empty(j, "bifurcate");
  cfg.bifurcate  = {{"steps", get_int(bf, "steps", 300)},
                    {"step", get_number(bf, "step", 0.01)},
                    {"epsilon", get_number(bf, "epsilon", 0.01)},
                    {"min_step", get_number(bf, "min_step", 1e-6)}};
  if (!(cfg.bifurcate["step"].get<double>() > 0.))
    invalid("bifurcate: step > 0 required");
  if (cfg.bifurcate["epsilon"].get<double>() == 0.)
    invalid("bifurcate: epsilon != 0 required");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path &file)
{
  std::ifstream in(file);
  if (!in)
    throw ValidationError("cannot open config " + file.string());
  json j;
  try
    {
      in >> j;
    }
  catch (const json::exception &e)
    {
      throw ValidationError("config " + file.string() + ": " + e.what());
    }
  return parse_config(j);
}

Domain1D make_domain(const ExperimentConfig &cfg)
{
  return Domain1D(cfg.domain.left, cfg.domain.right, cfg.domain.n);
}

WeightSpec make_weight(const json &j, const Domain1D &domain)
{
  if (j.at("type") == "power")
    {
      std::optional<double> neg;
      if (j.contains("negate_above"))
        neg = j.at("negate_above").get<double>();
      return WeightSpec::power(j.at("beta").get<double>(), neg);
    }
  const auto values = j.at("values").get<std::vector<double>>();
  return WeightSpec::tabulated(domain, Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

RhsSpec make_rhs(const ExperimentConfig &cfg, const Domain1D &domain, const KernelMatrix &kernel)
{
  RhsSpec spec;
  for (const auto &t : cfg.rhs.at("terms"))
    spec.terms.push_back({t.at("coef").get<double>(), make_weight(t.at("weight"), domain), t.at("q").get<double>(),
                          t.at("odd").get<bool>()});
  if (cfg.rhs.contains("lambda"))
    spec.coupling = LambdaCoupling{cfg.rhs["lambda"]["value"].get<double>(), make_weight(cfg.rhs["lambda"]["weight"], domain)};
  if (cfg.rhs.contains("forcing"))
    {
      const json &f = cfg.rhs.at("forcing");
      if (f.is_array())
        {
          const auto v = f.get<std::vector<double>>();
          spec.forcing = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
      else if (f == "ones")
        spec.forcing = Vector::Ones(domain.size());
      else
        {
          const OperatorContext ctx(kernel, evaluate_weight(make_weight(cfg.weight, domain), domain));
          spec.forcing = solve_first(ctx, cfg.solver).u;
        }
    }
  return spec;
}

namespace {

struct Globals
{
  std::string output_dir;
  int         threads = 0;
};

CsvTable grid_table(const std::string &hash, const Domain1D &domain, const std::vector<std::pair<std::string, Vector>> &cols)
{
  CsvTable t;
  t.config_hash = hash;
  t.header.push_back("x");
  for (const auto &c : cols)
    t.header.push_back(c.first);
  for (int i = 0; i < domain.size(); ++i)
    {
      std::vector<double> row{domain.node(i)};
      for (const auto &c : cols)
        row.push_back(c.second[i]);
      t.rows.push_back(std::move(row));
    }
  return t;
}

int emit(std::ostream &out, const std::filesystem::path &file, json summary, const std::string &hash, int code)
{
  summary["config_hash"] = hash;
  write_json(file, summary);
  out << summary.dump(2) << '\n';
  return code;
}

struct WeightFlags
{
  double      beta = 0.;
  int         N    = 3;
  double      p    = 2.;
  double      s    = 1.;
  double      q    = 2.;
  std::string cls;
  double      q0     = 2.;
  double      p0     = 1.5;
  double      r      = 2.;
  std::string method = "analytic";
};

int cmd_check_weight(const WeightFlags &f, const Globals &g, std::ostream &out)
{
  const SpaceParams params{f.N, f.p, f.s, f.q};
  validate(params);
  const WeightSpec w = WeightSpec::power(f.beta);

  json flags = {{"beta", f.beta}, {"N", f.N}, {"p", f.p}, {"s", f.s}, {"q", f.q}, {"class", f.cls}};
  json j;
  int  code = exit_ok;
  if (f.cls == "lorentz")
    {
      if (!(f.p0 > 1.) || !(f.q0 >= 1.))
        throw ValidationError("lorentz: p0 > 1 and q0 >= 1 required");
      flags["p0"]     = f.p0;
      flags["q0"]     = f.q0;
      flags["method"] = f.method;
      const LorentzParams lp{f.p0, f.q0};
      const LorentzVerdict v =
        f.method == "numeric" ? lorentz_membership_numeric(w, f.N, lp) : lorentz_membership_analytic(w, f.N, lp);
      j = {{"class", "lorentz"},
           {"member", v.verdict == Verdict::yes},
           {"verdict", to_string(v.verdict)},
           {"indicator", v.indicator},
           {"value", v.value},
           {"diagnostic", v.diagnostic}};
      if (v.verdict == Verdict::inconclusive)
        code = exit_inconclusive;
    }
  else if (f.cls == "Lr")
    {
      if (!(f.r > 1.))
        throw ValidationError("Lr: r > 1 required");
      flags["r"] = f.r;
      j          = {{"class", "Lr"}, {"member", in_Lr(w, f.r)}, {"r", f.r}};
    }
  else
    {
      WeightClass c = WeightClass::Aq;
      if (f.cls == "Wq")
        c = WeightClass::Wq;
      else if (f.cls == "tildeWq")
        c = WeightClass::tildeWq;
      const ClassReport rep = check_class(c, w, params);
      j                     = {{"class", rep.class_name}, {"member", rep.member}, {"margin", rep.margin}};
      if (rep.witness)
        {
          j["witness_a"] = rep.witness->a;
          j["witness_r"] = rep.witness->r;
        }
      else
        {
          j["witness_a"] = nullptr;
          j["witness_r"] = nullptr;
        }
    }
  const std::string hash = hash_hex(fnv1a64(flags.dump()));
  return emit(out, output_dir(g.output_dir) / "check_weight.json", j, hash, code);
}

int cmd_eigen(const std::string &config, bool oracle, const Globals &g, std::ostream &out)
{
  const ExperimentConfig cfg = load_config(config);
  if (oracle && cfg.op.p != 2.)
    throw ValidationError("--oracle is unsupported for p != 2: the dense oracle exists only for p = 2");
  const auto         dir    = output_dir(g.output_dir);
  const std::string  hash   = cfg.hash();
  const Domain1D     domain = make_domain(cfg);
  const KernelMatrix kernel = KernelMatrix::assemble(domain, cfg.op.s, cfg.op.p);
  const OperatorContext ctx(kernel, evaluate_weight(make_weight(cfg.weight, domain), domain));

  const EigenPair         e1   = solve_first(ctx, cfg.solver);
  const SecondEigenResult sec  = solve_second(ctx, initial_path(ctx, e1.u, cfg.eigen["path_points"]), cfg.solver);
  const double            res2 = eigen_residual(sec.lambda2, sec.maximizer, ctx);
  const SimplicityReport  simp = check_simplicity(ctx, cfg.eigen["simplicity_trials"], cfg.solver);

  json j = {{"lambda1", e1.lambda},
            {"lambda2", sec.lambda2},
            {"residual1", e1.residual},
            {"residual2", res2},
            {"lambda2_converged", sec.converged},
            {"e1_min", e1.u.minCoeff()},
            {"simplicity", to_string(simp.verdict)},
            {"min_alignment", simp.min_alignment},
            {"maximizer_min", sec.maximizer.minCoeff()},
            {"maximizer_max", sec.maximizer.maxCoeff()}};
  write_csv(dir / "eigenfunctions.csv", grid_table(hash, domain, {{"e1", e1.u}, {"u2", sec.maximizer}}));
  if (oracle)
    {
      const auto modes = oracle_spectrum_p2(ctx);
      CsvTable   t;
      t.config_hash = hash;
      t.header      = {"k", "lambda"};
      for (std::size_t k = 0; k < modes.size(); ++k)
        t.rows.push_back({static_cast<double>(k + 1), modes[k].lambda});
      write_csv(dir / "oracle_spectrum.csv", t);
      j["oracle_lambda1"] = modes.at(0).lambda;
      j["oracle_lambda2"] = modes.at(1).lambda;
    }
  return emit(out, dir / "eigen.json", j, hash, exit_ok);
}

int cmd_bounds(const std::string &config, const std::string &solution, const Globals &g, std::ostream &out)
{
  const ExperimentConfig cfg    = load_config(config);
  const Domain1D         domain = make_domain(cfg);
  const Vector           u      = read_grid_function(solution, domain);
  const auto             dir    = output_dir(g.output_dir);
  const std::string      hash   = cfg.hash();
  const double           qt     = cfg.bounds["q_tilde"];
  const int              n_max  = cfg.bounds["n_max"];

  const double k_star = find_kstar(u, domain, qt, n_max);
  // trace on the sign carrying the maximum modulus
  const Vector        v     = u.maxCoeff() >= -u.minCoeff() ? u : Vector(-u);
  const DeGiorgiTrace trace = degiorgi_trace(v, domain, k_star, qt, n_max);
  const ChainReport   chain = check_chain(v, domain, trace);

  CsvTable t;
  t.config_hash = hash;
  t.header      = {"n", "k_n", "Z_n"};
  for (std::size_t n = 0; n < trace.levels.size(); ++n)
    t.rows.push_back({static_cast<double>(n), trace.levels[n], trace.masses[n]});
  write_csv(dir / "degiorgi_trace.csv", t);

  const double max_abs = u.cwiseAbs().maxCoeff();
  json         j       = {{"k_star", k_star},
                          {"bound", 2. * k_star},
                          {"max_abs", max_abs},
                          {"q_tilde", qt},
                          {"converged", trace.converged},
                          {"certified", max_abs <= 2. * k_star},
                          {"chain_ok", chain.ok()}};
  return emit(out, dir / "bounds.json", j, hash, trace.converged ? exit_ok : exit_convergence);
}

json solution_json(const Solution &s)
{
  return {{"energy", s.energy}, {"residual", s.residual}, {"sup_norm", s.u.cwiseAbs().maxCoeff()}};
}

int cmd_solve(const std::string &config, const Globals &g, std::ostream &out)
{
  const ExperimentConfig cfg    = load_config(config);
  const auto             dir    = output_dir(g.output_dir);
  const std::string      hash   = cfg.hash();
  const Domain1D         domain = make_domain(cfg);
  const KernelMatrix     kernel = KernelMatrix::assemble(domain, cfg.op.s, cfg.op.p);
  const RhsSpec          rhs    = make_rhs(cfg, domain, kernel);

  if (cfg.solve["mode"] == "fredholm")
    {
      const OperatorContext ctx(kernel, evaluate_weight(make_weight(cfg.weight, domain), domain));
      FredholmOptions       fo;
      fo.solver          = cfg.solver;
      fo.resonance_guard = cfg.solve["resonance_guard"];
      fo.starts          = cfg.solve["starts"];
      const double l1    = solve_first(ctx, cfg.solver).lambda;
      fo.lambda1         = l1;
      const double lambda =
        cfg.solve.contains("lambda") ? cfg.solve["lambda"].get<double>() : cfg.solve["lambda_factor"].get<double>() * l1;
      const Vector   f = rhs.forcing ? *rhs.forcing : Vector::Zero(domain.size());
      const Solution s = solve_fredholm(lambda, f, ctx, fo);
      write_csv(dir / "solution.csv", grid_table(hash, domain, {{"u", s.u}}));
      json j      = solution_json(s);
      j["lambda"] = lambda;
      j["lambda1"] = l1;
      return emit(out, dir / "solution.json", j, hash, exit_ok);
    }

  const SpaceParams params{1, cfg.op.p, cfg.op.s, cfg.op.p};
  json              hyp = json::object();
  std::string       failed;
  for (Hypothesis h : {Hypothesis::F1, Hypothesis::F4, Hypothesis::F5, Hypothesis::F6})
    {
      const HypothesisReport r = check_hypotheses(rhs, h, params, domain);
      hyp[to_string(h)]        = {{"verdict", to_string(r.verdict)}, {"violations", r.violations}};
      for (const auto &v : r.violations)
        failed += std::string("\n  - ") + to_string(h) + ": " + v;
    }
  if (!failed.empty())
    throw ValidationError("small solutions: hypotheses violated:" + failed);

  TruncationSpec ts = default_truncation(rhs, kernel);
  if (cfg.solve.contains("truncation"))
    {
      const json &tr = cfg.solve["truncation"];
      ts.t0          = get_number(tr, "t0", ts.t0);
      ts.t1          = get_number(tr, "t1", ts.t1);
      ts.t2          = get_number(tr, "t2", ts.t1 / 4.);
      ts.gamma       = get_number(tr, "gamma", ts.gamma);
    }
  const TruncatedRhs   trunc = build_truncation(rhs, ts, kernel);
  SmallSolutionOptions so;
  so.solver                       = cfg.solver;
  so.starts                       = cfg.solve["starts"];
  so.dedup_tol                    = cfg.solve["dedup_tol"];
  const SmallSolutionSearch found = find_small_solutions(trunc, kernel, cfg.solve["levels"], so);

  std::vector<std::pair<std::string, Vector>> cols;
  json                                        list = json::array();
  for (std::size_t k = 0; k < found.solutions.size(); ++k)
    {
      const SmallSolution &s = found.solutions[k];
      cols.emplace_back("u" + std::to_string(k + 1), s.solution.u);
      json e              = solution_json(s.solution);
      e["level"]          = s.level;
      e["plain_residual"] = s.plain_residual;
      e["below_t1"]       = s.below_t1;
      e["below_t2"]       = s.below_t2;
      list.push_back(e);
    }
  write_csv(dir / "small_solutions.csv", grid_table(hash, domain, cols));
  json j = {{"solutions", list},
            {"gaps", found.gaps},
            {"hypotheses", hyp},
            {"truncation", {{"t0", ts.t0}, {"t1", ts.t1}, {"t2", ts.t2}, {"gamma", ts.gamma}, {"C1", trunc.growth_constant()}}}};
  return emit(out, dir / "small_solutions.json", j, hash, found.solutions.empty() ? exit_convergence : exit_ok);
}

int cmd_bifurcate(const std::string &config, const Globals &g, std::ostream &out)
{
  const ExperimentConfig cfg    = load_config(config);
  const auto             dir    = output_dir(g.output_dir);
  const std::string      hash   = cfg.hash();
  const Domain1D         domain = make_domain(cfg);
  const KernelMatrix     kernel = KernelMatrix::assemble(domain, cfg.op.s, cfg.op.p);
  RhsSpec                rhs    = make_rhs(cfg, domain, kernel);
  if (!rhs.coupling)
    rhs.coupling = LambdaCoupling{0., make_weight(cfg.weight, domain)};
  if (rhs.forcing)
    throw ValidationError("bifurcate: forcing is not allowed (the trivial branch must be u = 0)");
  const DiscreteRhs     drhs(rhs, domain, cfg.op.p);
  const OperatorContext ctx(kernel, drhs.coupling_weight());

  ContinuationOptions co;
  co.step     = cfg.bifurcate["step"];
  co.epsilon  = cfg.bifurcate["epsilon"];
  co.min_step = cfg.bifurcate["min_step"];
  co.tol      = cfg.solver.tol;

  const EigenPair   e1     = solve_first(ctx, cfg.solver);
  const BranchPoint start  = branch_start(drhs, e1, kernel, co);
  const Branch      branch = continue_branch(drhs, start, cfg.bifurcate["steps"], kernel, co);
  const auto        rep    = detect_bifurcation(branch, e1.lambda);

  CsvTable t;
  t.config_hash = hash;
  t.header      = {"lambda", "norm", "sup_norm", "residual"};
  for (const auto &pt : branch.points)
    t.rows.push_back({pt.lambda, pt.norm, pt.u.cwiseAbs().maxCoeff(), pt.residual});
  write_csv(dir / "branch.csv", t);

  json j = {{"lambda1", e1.lambda},
            {"lambda0", rep.lambda0},
            {"deviation", rep.deviation},
            {"verdict", to_string(rep.verdict)},
            {"points", branch.points.size()},
            {"small_norm_points", rep.points_used},
            {"status", to_string(branch.status)}};
  return emit(out, dir / "bifurcation.json", j, hash, rep.verdict == Verdict::inconclusive ? exit_inconclusive : exit_ok);
}

} // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
  CLI::App app{"Fractional p-Laplacian experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "worker cap (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);
  app.add_option("--output-dir", g.output_dir, "output directory (default: $FPLAP_OUTPUT_DIR or .)");

  WeightFlags wf;
  auto       *cw = app.add_subcommand("check-weight", "classify a power weight (1-|x|)^{-beta}");
  cw->add_option("--beta", wf.beta, "singularity exponent")->required();
  cw->add_option("--N", wf.N, "dimension")->check(CLI::PositiveNumber);
  cw->add_option("--p", wf.p, "integrability exponent");
  cw->add_option("--s", wf.s, "smoothness");
  cw->add_option("--q", wf.q, "growth exponent");
  cw->add_option("--class", wf.cls, "Aq | Wq | tildeWq | lorentz | Lr")
    ->required()
    ->check(CLI::IsMember({"Aq", "Wq", "tildeWq", "lorentz", "Lr"}));
  cw->add_option("--q0", wf.q0, "Lorentz second index");
  cw->add_option("--p0", wf.p0, "Lorentz first index");
  cw->add_option("--r", wf.r, "Lebesgue exponent for --class Lr");
  cw->add_option("--method", wf.method, "analytic | numeric (lorentz only)")->check(CLI::IsMember({"analytic", "numeric"}));

  std::string config, solution;
  bool        oracle = false;
  auto       *ce     = app.add_subcommand("eigen", "first and second eigenpairs");
  ce->add_option("--config", config, "JSON configuration")->required();
  ce->add_flag("--oracle", oracle, "also write the dense spectrum (p = 2 only)");
  auto *cb = app.add_subcommand("bounds", "De Giorgi certification of a grid function");
  cb->add_option("--config", config, "JSON configuration")->required();
  cb->add_option("--solution", solution, "CSV with columns x,u")->required();
  auto *cs = app.add_subcommand("solve", "Fredholm or small-solution problem");
  cs->add_option("--config", config, "JSON configuration")->required();
  auto *cf = app.add_subcommand("bifurcate", "continuation from the first eigenvalue");
  cf->add_option("--config", config, "JSON configuration")->required();

  try
    {
      app.parse(argc, argv);
    }
  catch (const CLI::CallForHelp &)
    {
      out << app.help();
      return exit_ok;
    }
  catch (const CLI::ParseError &e)
    {
      err << "error: " << e.what() << "\n\n" << app.help();
      return exit_validation;
    }

  try
    {
      set_max_threads(g.threads);
      if (*cw)
        return cmd_check_weight(wf, g, out);
      if (*ce)
        return cmd_eigen(config, oracle, g, out);
      if (*cb)
        return cmd_bounds(config, solution, g, out);
      if (*cs)
        return cmd_solve(config, g, out);
      return cmd_bifurcate(config, g, out);
    }
  catch (const ValidationError &e)
    {
      err << "validation error: " << e.what() << '\n';
      return exit_validation;
    }
  catch (const ConvergenceError &e)
    {
      err << "not converged: " << e.what() << '\n';
      return exit_convergence;
    }
  catch (const InconclusiveError &e)
    {
      err << "inconclusive: " << e.what() << '\n';
      return exit_inconclusive;
    }
  catch (const std::exception &e)
    {
      err << "error: " << e.what() << '\n';
      return 1;
    }
}

} // namespace fpl::cli
