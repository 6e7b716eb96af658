#ifndef EBNF_SIMULATE_HPP
#define EBNF_SIMULATE_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "ebnf/core.hpp"

namespace ebnf {

// All simulation randomness flows through this wrapper around std::mt19937_64
// with hand-rolled samplers, so draws are identical for any thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform01();                      // [0, 1)
  double uniform(double a, double b);
  double normal(double mean, double sd);   // Box-Muller
  double gamma(double shape, double rate); // Marsaglia-Tsang
  double chisq(double df);                 // gamma(df/2, rate 1/2)

 private:
  std::mt19937_64 gen_;
};

std::uint64_t splitmix64(std::uint64_t x);

enum class Scenario { S1, S2, S3 };

Scenario parse_scenario(const std::string& name);
std::string scenario_name(Scenario s);

struct ScenarioSpec {
  Scenario scenario = Scenario::S1;
  double eta = 0.0;
  int n = 500;
  int k = 10;
  std::uint64_t seed = 1;
};

struct TruthedSample {
  Dataset dataset;
  std::vector<double> theta;
  std::vector<double> sigma2;
};

TruthedSample draw_scenario(const ScenarioSpec& spec);

struct MetricsReport {
  double weighted_loss = 0.0;
  double cp = 0.0;
  double al = 0.0;
  double fdr = 0.0;
  double tpr = 0.0;
  double f1 = 0.0;
  int reps = 0;
};

struct StudyResult {
  MetricsReport ml;
  MetricsReport nf;
};

struct TestingStudyResult {
  MetricsReport nf;
  MetricsReport ttest;
  MetricsReport bh;
};

// Weighted-loss comparison of the raw ML estimator (theta_hat = x) against
// the tempered empirical Bayes estimator, averaged over reps.
StudyResult run_estimation_study(const ScenarioSpec& spec, int reps, const EngineConfig& cfg,
                                 int threads = 1);

// Coverage probability / average length of the ML t-interval and the
// NF quantile interval at level 1 - alpha.
StudyResult run_interval_study(const ScenarioSpec& spec, int reps, double alpha,
                               const EngineConfig& cfg, int threads = 1);

// FDR / TPR / F1 for the posterior-null step-up rule (NF), the same step-up
// on t-test p-values, and Benjamini-Hochberg.  Truth: |theta| > delta.
TestingStudyResult run_testing_study(const ScenarioSpec& spec, int reps, double alpha,
                                     double delta, const EngineConfig& cfg, int threads = 1);

}  // namespace ebnf

#endif  // EBNF_SIMULATE_HPP
