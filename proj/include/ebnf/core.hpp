#ifndef EBNF_CORE_HPP
#define EBNF_CORE_HPP

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "ebnf/common.hpp"

namespace ebnf {

// One unit's summary statistics: observed mean x, sample variance s2 with
// k degrees of freedom (k s2 / sigma^2 ~ chi^2_k).  k is kept real so the
// conditional-density path can treat it as a continuous covariate.
struct Observation {
  std::string id;
  double x = 0.0;
  double s2 = 0.0;
  double k = 0.0;
};

struct Dataset {
  std::vector<Observation> observations;
  bool homogeneous_k = true;

  std::size_t size() const { return observations.size(); }
};

struct EngineConfig {
  double rho = 1e-3;            // tempering floor for density / denominator
  double fd_step_cap = 1e-3;    // finite-difference step cap, e = min(cap, s2/2)
  int grid_size_S = 100;        // knots of the discretized posterior
  double grid_halfwidth_cw = 5.0;
  std::vector<double> mgf_points = {-0.3, -0.2, -0.1, 0.1, 0.2, 0.3};
  double newton_tol = 1e-7;
  int newton_max_iter = 200;
  double maxent_slack = 0.0;    // optional ridge on the multipliers: relative
                                // slack allowed on each MGF constraint
  double bisect_tol = 1e-4;
  double interval_guard = 0.6;  // credible intervals are widened to contain
                                // x +- guard * t-interval half-width; 0 disables
  double alpha = 0.05;          // interval / FDR level
  double delta = 1.0;           // half-width of the interval null [-delta, delta]
  std::uint64_t seed = 1;

  void validate() const;
};

// Parses a flat "key = value" config file; '#' starts a comment.  Unknown
// keys are rejected.  mgf_points is a comma-separated list.
EngineConfig parse_config_file(const std::string& path);
EngineConfig parse_config_text(const std::string& text);
void apply_config_override(EngineConfig& cfg, const std::string& key, const std::string& value);

using RawRow = std::tuple<std::string, double, double, double>;  // id, x, s2, k

Dataset validate_dataset(const std::vector<RawRow>& raw);

// Rejects observations unusable by the shrinkage formula (denominator
// carries a factor k-2).
void require_k_above_two(const Dataset& data);

// Dataset CSV: header "id,x,s2,k", RFC-4180 quoting.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const Dataset& data, const std::string& path);

// Minimal RFC-4180 reader/writer shared by the CSV surfaces.
std::vector<std::vector<std::string>> read_csv(const std::string& path);
std::string csv_escape(const std::string& field);

}  // namespace ebnf

#endif  // EBNF_CORE_HPP
