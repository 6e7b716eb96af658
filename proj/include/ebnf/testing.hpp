#ifndef EBNF_TESTING_HPP
#define EBNF_TESTING_HPP

#include <set>
#include <string>
#include <vector>

#include "ebnf/core.hpp"
#include "ebnf/posterior.hpp"

namespace ebnf {

// Student-t CDF with (real) k degrees of freedom, via the regularized
// incomplete beta function.
double t_cdf(double t, double k);
double t_quantile(double p, double k);

// Posterior probability of the interval null [-delta, delta]:
//   PN = F_theta(delta) - F_theta(-delta), clamped to [0,1].
double posterior_null_prob(PosteriorCdf& pc, double delta);

// Step-up rule on posterior null probabilities: sort ascending, reject the
// largest prefix whose running mean stays <= alpha.
std::set<std::size_t> fdr_reject(const std::vector<double>& pns, double alpha);

// Two-sided p-value for H0: |theta| <= delta from the raw statistics:
//   p = 2 (1 - F_{t_k}((|x| - delta)/s)), clamped to [0,1].
double ttest_pvalue(const Observation& obs, double delta);

// Benjamini-Hochberg step-up on p-values.
std::set<std::size_t> bh_reject(const std::vector<double>& pvalues, double alpha);

struct TestResult {
  std::string id;
  double pn = 1.0;
  double p_value = 1.0;
  bool rejected_nf = false;
  bool rejected_bh = false;
};

void write_testing_csv(const std::vector<TestResult>& results, const std::string& path);

}  // namespace ebnf

#endif  // EBNF_TESTING_HPP
