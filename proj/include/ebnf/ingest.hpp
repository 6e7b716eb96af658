#ifndef EBNF_INGEST_HPP
#define EBNF_INGEST_HPP

#include <string>
#include <utility>
#include <vector>

#include "ebnf/core.hpp"

namespace ebnf {

struct CountRecord {
  std::string unit_id;
  long long successes = 0;  // H_ij
  long long trials = 0;     // AB_ij
};

struct ReplicateRecord {
  std::string unit_id;
  double value = 0.0;
  double weight = 1.0;
};

// Arcsine-square-root variance-stabilizing transform for a binomial count:
// value = arcsin sqrt((H + 0.25)/(AB + 0.5)), weight = 4 AB.
std::pair<double, double> arcsine_transform(const CountRecord& rec);

// Weighted mean / weighted variance / degrees of freedom for one unit:
//   xbar = sum(w v)/sum(w)
//   s2   = sum(w (v - xbar)^2) / ((n-1) sum(w))
//   k    = n - 1
// Requires n >= 2 and non-degenerate replicates (s2 > 0).
Observation aggregate_unit(const std::string& unit_id,
                           const std::vector<ReplicateRecord>& recs);

struct IngestReport {
  Dataset dataset;
  std::vector<std::string> dropped_units;  // fewer than 2 records
  std::vector<std::string> degenerate_units;  // zero variance
};

// Full count pipeline: transform, group by unit (first-appearance order),
// aggregate.  min_k > 0 additionally drops units with k <= min_k.
IngestReport ingest_counts(const std::vector<CountRecord>& rows, double min_k = 0.0);
IngestReport ingest_replicates(const std::vector<ReplicateRecord>& rows, double min_k = 0.0);

// Keeps the first floor(n_i/2) records of each unit, in file order.
std::vector<CountRecord> training_split(const std::vector<CountRecord>& rows);

// CSV with header "unit_id,successes,trials" or "unit_id,value,weight".
IngestReport ingest_csv(const std::string& path, double min_k = 0.0);

}  // namespace ebnf

#endif  // EBNF_INGEST_HPP
