#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "metarisk/bounds.hpp"
#include "metarisk/config_io.hpp"
#include "metarisk/error.hpp"
#include "metarisk/meta_model.hpp"
#include "metarisk/oracles.hpp"
#include "metarisk/risk.hpp"
#include "metarisk/run.hpp"
#include "metarisk/spectra.hpp"
#include "metarisk/version.hpp"

namespace py = pybind11;
using namespace metarisk;
using nlohmann::json;

namespace {

std::vector<double> values_of(const Spectrum& s) { return {s.values().begin(), s.values().end()}; }
std::vector<double> values_of(const TaskSpectrum& s) { return {s.values().begin(), s.values().end()}; }

ProblemConfig config_from(const std::string& block, std::uint64_t seed) {
  return resolve_config(json::parse(block), seed).config;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MAML / averaged-SGD excess-risk lab for mixed linear regression";
  m.attr("__version__") = std::string(kVersion);

  static py::exception<Error> base(m, "Error");
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<ParameterDomainError> domain_error(m, "ParameterDomainError", base.ptr());
  static py::exception<PreconditionError> precondition_error(m, "PreconditionError", base.ptr());
  static py::exception<DimensionMismatchError> dim_error(m, "DimensionMismatchError", base.ptr());
  static py::exception<DivergenceError> divergence_error(m, "DivergenceError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const ParameterDomainError& e) {
      py::set_error(domain_error, e.what());
    } catch (const PreconditionError& e) {
      py::set_error(precondition_error, e.what());
    } catch (const DimensionMismatchError& e) {
      py::set_error(dim_error, e.what());
    } catch (const DivergenceError& e) {
      py::set_error(divergence_error, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def("log_decay_spectrum", [](std::size_t d, double p) { return values_of(log_decay_spectrum(d, p)); },
        py::arg("d"), py::arg("p"));
  m.def("poly_spectrum", [](std::size_t d, double q) { return values_of(poly_spectrum(d, q)); },
        py::arg("d"), py::arg("q"));
  m.def("exp_spectrum", [](std::size_t d) { return values_of(exp_spectrum(d)); }, py::arg("d"));
  m.def("two_block_spectrum", [](std::size_t d, std::size_t s) { return values_of(two_block_spectrum(d, s)); },
        py::arg("d"), py::arg("s"));
  m.def("log_growth_task_spectrum",
        [](std::size_t d, double r, double scale) { return values_of(log_growth_task_spectrum(d, r, scale)); },
        py::arg("d"), py::arg("r"), py::arg("scale") = 1.0);

  m.def("meta_covariance",
        [](std::vector<double> lambda, std::size_t n, double beta) {
          const auto h = meta_covariance(Spectrum::from_values(std::move(lambda)), n, beta);
          return std::vector<double>(h.mu().begin(), h.mu().end());
        },
        py::arg("spectrum"), py::arg("n"), py::arg("beta"),
        "Eigenvalues of H_{n,beta} for Gaussian data with the given covariance spectrum.");

  m.def("c_rate",
        [](std::vector<double> lambda, double beta) {
          return c_rate(Spectrum::from_values(std::move(lambda)), beta, RateParams{});
        },
        py::arg("spectrum"), py::arg("beta"));

  m.def("bayes_error",
        [](std::vector<double> task, std::vector<double> lambda, std::size_t mm, double beta_te, double sigma) {
          return bayes_error(TaskSpectrum::from_values(std::move(task)), Spectrum::from_values(std::move(lambda)),
                             mm, beta_te, sigma);
        },
        py::arg("task_spectrum"), py::arg("spectrum"), py::arg("m"), py::arg("beta_te"),
        py::arg("noise_sigma"));

  m.def("_resolve_config",
        [](const std::string& block, std::uint64_t seed) {
          const auto r = resolve_config(json::parse(block), seed);
          json out = config_to_json(r.config);
          out["derived"] = derived_quantities(r.config);
          return out.dump();
        },
        py::arg("block"), py::arg("seed") = 0);

  m.def("_evaluate_bounds",
        [](const std::string& block, std::uint64_t seed, bool appendix) {
          BoundOptions o;
          if (appendix) o.cross_term = CrossTermForm::appendix;
          const auto c = config_from(block, seed);
          const BoundBreakdown b = c.T > 10 ? evaluate_bounds(c, o) : upper_bound(c, o);
          return json(b).dump();
        },
        py::arg("block"), py::arg("seed") = 0, py::arg("appendix") = false);

  m.def("_run_oracles",
        [](const std::string& block, std::uint64_t seed, std::size_t mc_reps, std::size_t pairs,
           std::size_t tasks, unsigned jobs) {
          OracleSuiteOptions o;
          o.meta_covariance_reps = mc_reps;
          o.gradient_pairs = pairs;
          o.test_tasks = tasks;
          o.seed = seed;
          o.jobs = jobs;
          json out = json::array();
          py::gil_scoped_release release;
          for (const auto& r : run_oracle_suite(config_from(block, seed), o))
            out.push_back({{"name", r.name}, {"passed", r.passed}, {"observed", r.observed},
                           {"tolerance", r.tolerance}, {"detail", r.detail}});
          return out.dump();
        },
        py::arg("block"), py::arg("seed"), py::arg("mc_reps"), py::arg("pairs"), py::arg("tasks"),
        py::arg("jobs"));

  m.def("_run_plan",
        [](const std::string& plan_text, const std::string& out_dir, unsigned jobs,
           const std::string& base_dir) {
          const auto plan = parse_plan(plan_text, base_dir);
          ExperimentContext ctx;
          ctx.jobs = jobs;
          py::gil_scoped_release release;
          return run_plan(plan, out_dir, ctx).manifest.dump();
        },
        py::arg("plan"), py::arg("out_dir"), py::arg("jobs") = 1, py::arg("base_dir") = "");

  m.def("_load_plan",
        [](const std::string& path, const std::vector<std::string>& overrides) {
          return plan_to_json(load_plan(path, overrides)).dump();
        },
        py::arg("path"), py::arg("overrides") = std::vector<std::string>{});
}
