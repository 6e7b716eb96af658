#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <thread>

#include "ebnf/core.hpp"
#include "ebnf/density.hpp"
#include "ebnf/ingest.hpp"
#include "ebnf/mgf.hpp"
#include "ebnf/posterior.hpp"
#include "ebnf/shrinkage.hpp"
#include "ebnf/simulate.hpp"
#include "ebnf/testing.hpp"

namespace py = pybind11;
using namespace ebnf;

namespace {

Dataset make_dataset(const std::vector<std::string>& ids, const std::vector<double>& x,
                     const std::vector<double>& s2, const std::vector<double>& k) {
  if (ids.size() != x.size() || x.size() != s2.size() || s2.size() != k.size())
    throw ValidationError("ids, x, s2, k must have equal length", errc::validation);
  std::vector<RawRow> raw;
  raw.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) raw.emplace_back(ids[i], x[i], s2[i], k[i]);
  return validate_dataset(raw);
}

DensityFn density_for(const DensityModel& model, const Observation& obs) {
  return [&model, k = obs.k](double x, double s2) { return model.eval_f(x, s2, k); };
}

std::vector<std::tuple<std::string, double, double>> intervals(const DensityModel& model,
                                                               const Dataset& data, double alpha,
                                                               const EngineConfig& cfg,
                                                               int threads) {
  require_k_above_two(data);
  std::vector<std::tuple<std::string, double, double>> out(data.size());
  auto work = [&](std::size_t i) {
    const Observation& obs = data.observations[i];
    MgfEvaluator ev(obs, density_for(model, obs), cfg.rho);
    PosteriorCdf pc(&ev, &cfg);
    auto [lo, hi] = pc.quantile_interval(alpha);
    out[i] = {obs.id, lo, hi};
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < data.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < data.size(); i += threads) work(i);
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

std::vector<TestResult> run_tests(const DensityModel& model, const Dataset& data, double alpha,
                                  double delta, const EngineConfig& cfg, int threads) {
  std::size_t n = data.size();
  std::vector<TestResult> results(n);
  auto work = [&](std::size_t i) {
    const Observation& obs = data.observations[i];
    MgfEvaluator ev(obs, density_for(model, obs), cfg.rho);
    PosteriorCdf pc(&ev, &cfg);
    results[i].id = obs.id;
    results[i].pn = posterior_null_prob(pc, delta);
    results[i].p_value = ttest_pvalue(obs, delta);
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += threads) work(i);
      });
    for (auto& th : pool) th.join();
  }
  std::vector<double> pns(n), pvals(n);
  for (std::size_t i = 0; i < n; ++i) {
    pns[i] = results[i].pn;
    pvals[i] = results[i].p_value;
  }
  auto nf = fdr_reject(pns, alpha);
  auto bh = bh_reject(pvals, alpha);
  for (std::size_t i = 0; i < n; ++i) {
    results[i].rejected_nf = nf.count(i) > 0;
    results[i].rejected_bh = bh.count(i) > 0;
  }
  return results;
}

}  // namespace

PYBIND11_MODULE(ebnf, m) {
  m.doc() = "Nonparametric empirical Bayes inference for heteroscedastic normal means";

  py::register_exception<ValidationError>(m, "EbnfValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "EbnfNumericalError", PyExc_ArithmeticError);

  py::class_<Observation>(m, "Observation")
      .def_readonly("id", &Observation::id)
      .def_readonly("x", &Observation::x)
      .def_readonly("s2", &Observation::s2)
      .def_readonly("k", &Observation::k);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("observations", &Dataset::observations)
      .def_readonly("homogeneous_k", &Dataset::homogeneous_k)
      .def("__len__", [](const Dataset& d) { return d.size(); });

  py::class_<EngineConfig>(m, "EngineConfig")
      .def(py::init<>())
      .def_readwrite("rho", &EngineConfig::rho)
      .def_readwrite("grid_size_S", &EngineConfig::grid_size_S)
      .def_readwrite("grid_halfwidth_cw", &EngineConfig::grid_halfwidth_cw)
      .def_readwrite("mgf_points", &EngineConfig::mgf_points)
      .def_readwrite("alpha", &EngineConfig::alpha)
      .def_readwrite("delta", &EngineConfig::delta)
      .def_readwrite("seed", &EngineConfig::seed)
      .def("validate", &EngineConfig::validate);

  py::class_<DensityModel>(m, "DensityModel")
      .def_static("fit", [](const Dataset& d) { return DensityModel::fit(d); })
      .def("eval_f", &DensityModel::eval_f)
      .def("save", &DensityModel::save)
      .def_static("load", &DensityModel::load)
      .def_readonly("conditional", &DensityModel::conditional);

  py::class_<ShrinkageResult>(m, "ShrinkageResult")
      .def_readonly("id", &ShrinkageResult::id)
      .def_readonly("theta_hat", &ShrinkageResult::theta_hat)
      .def_readonly("raw_x", &ShrinkageResult::raw_x)
      .def_readonly("floored", &ShrinkageResult::floored);

  py::class_<TestResult>(m, "TestResult")
      .def_readonly("id", &TestResult::id)
      .def_readonly("pn", &TestResult::pn)
      .def_readonly("p_value", &TestResult::p_value)
      .def_readonly("rejected_nf", &TestResult::rejected_nf)
      .def_readonly("rejected_bh", &TestResult::rejected_bh);

  m.def("make_dataset", &make_dataset, py::arg("ids"), py::arg("x"), py::arg("s2"), py::arg("k"));
  m.def("read_dataset_csv", &read_dataset_csv);
  m.def("write_dataset_csv", &write_dataset_csv);

  m.def(
      "estimate",
      [](const DensityModel& model, const Dataset& data, const EngineConfig& cfg, int threads) {
        return ebt_estimate_all(model, data, cfg, threads);
      },
      py::arg("model"), py::arg("data"), py::arg("config") = EngineConfig{},
      py::arg("threads") = 1);

  m.def("interval", &intervals, py::arg("model"), py::arg("data"), py::arg("alpha") = 0.05,
        py::arg("config") = EngineConfig{}, py::arg("threads") = 1);

  m.def("test", &run_tests, py::arg("model"), py::arg("data"), py::arg("alpha") = 0.05,
        py::arg("delta") = 1.0, py::arg("config") = EngineConfig{}, py::arg("threads") = 1);

  m.def("t_cdf", &t_cdf);
  m.def("t_quantile", &t_quantile);
  m.def("ttest_pvalue", &ttest_pvalue);
  m.def("fdr_reject", &fdr_reject);
  m.def("bh_reject", &bh_reject);

  m.def(
      "draw_scenario",
      [](const std::string& scenario, double eta, int n, int k, std::uint64_t seed) {
        ScenarioSpec spec{parse_scenario(scenario), eta, n, k, seed};
        TruthedSample s = draw_scenario(spec);
        return py::make_tuple(s.dataset, s.theta, s.sigma2);
      },
      py::arg("scenario"), py::arg("eta"), py::arg("n"), py::arg("k"), py::arg("seed"));

  m.def(
      "run_estimation_study",
      [](const std::string& scenario, double eta, int n, int k, std::uint64_t seed, int reps,
         const EngineConfig& cfg, int threads) {
        ScenarioSpec spec{parse_scenario(scenario), eta, n, k, seed};
        StudyResult r = run_estimation_study(spec, reps, cfg, threads);
        return py::make_tuple(r.ml.weighted_loss, r.nf.weighted_loss);
      },
      py::arg("scenario"), py::arg("eta"), py::arg("n"), py::arg("k"), py::arg("seed"),
      py::arg("reps"), py::arg("config") = EngineConfig{}, py::arg("threads") = 1);
}
