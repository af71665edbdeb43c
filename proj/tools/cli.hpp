#pragma once

#include "fplap/nonlinear.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace fpl::cli {

enum ExitCode : int
{
  exit_ok            = 0,
  exit_validation    = 2,
  exit_convergence   = 3,
  exit_inconclusive  = 4,
};

struct DomainBlock
{
  double left  = -1.;
  double right = 1.;
  int    n     = 64;
};

struct OperatorBlock
{
  double p = 2.;
  double s = 0.4;
};

/// Fully resolved experiment configuration; every default is filled in.
struct ExperimentConfig
{
  DomainBlock    domain;
  OperatorBlock  op;
  nlohmann::json weight;  ///< {"type": "power", "beta": b} or {"type": "tabulated", "values": [...]}
  nlohmann::json rhs;     ///< {"terms": [...], "lambda": {...}, "forcing": [...] | "ones" | "e1"}
  SolverOptions  solver;
  nlohmann::json eigen;
  nlohmann::json bounds;
  nlohmann::json solve;
  nlohmann::json bifurcate;

  /// Canonical JSON of the resolved configuration.
  nlohmann::json resolved() const;
  std::string    hash() const;
};

/// Parses and validates a configuration; throws ValidationError naming the
/// violated constraint.
ExperimentConfig parse_config(const nlohmann::json &j);
ExperimentConfig load_config(const std::filesystem::path &file);

Domain1D   make_domain(const ExperimentConfig &cfg);
WeightSpec make_weight(const nlohmann::json &j, const Domain1D &domain);
RhsSpec    make_rhs(const ExperimentConfig &cfg, const Domain1D &domain, const KernelMatrix &kernel);

/// Entry point of the command-line tool. Output files go to --output-dir,
/// else $FPLAP_OUTPUT_DIR, else the working directory.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace fpl::cli
