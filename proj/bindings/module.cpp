#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "ltvrec/io.hpp"
#include "ltvrec/pipeline.hpp"
#include "ltvrec/rng.hpp"
#include "ltvrec/simulator.hpp"
#include "ltvrec/stats.hpp"

namespace py = pybind11;

namespace {

py::dict simulate_latent(const std::string& out_path, int users, std::uint64_t seed) {
  const ltvrec::SelfPreservationWorld scenario =
      ltvrec::make_self_preservation_world(seed);
  const ltvrec::GeneratedLog log =
      ltvrec::generate_log(scenario.world, scenario.behavior, users, seed);
  ltvrec::save_dataset(log.dataset, out_path);
  const ltvrec::SidecarTruth truth =
      ltvrec::sidecar_truth(scenario.world, scenario.behavior);
  py::dict d;
  d["n_users"] = log.dataset.n_users();
  d["n_events"] = log.dataset.n_samples;
  d["gamma"] = truth.gamma;
  d["mean_episode_length"] = truth.mean_episode_length;
  d["j_behavior"] = truth.j_behavior;
  d["j_myopic_greedy"] = truth.j_myopic_greedy;
  d["j_ltv_greedy"] = truth.j_ltv_greedy;
  d["first_poison_item"] = scenario.first_poison_item;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "offline lifetime-value policy pipeline for recommender logs";

  py::register_exception<ltvrec::DataError>(m, "DataError");
  py::register_exception<ltvrec::NumericError>(m, "NumericError");

  py::class_<ltvrec::RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("input", &ltvrec::RunConfig::input)
      .def_readwrite("workdir", &ltvrec::RunConfig::workdir)
      .def_readwrite("delimiter", &ltvrec::RunConfig::delimiter)
      .def_readwrite("columns", &ltvrec::RunConfig::columns)
      .def_readwrite("min_interactions", &ltvrec::RunConfig::min_interactions)
      .def_readwrite("require_positive", &ltvrec::RunConfig::require_positive)
      .def_readwrite("reward_scale", &ltvrec::RunConfig::reward_scale)
      .def_readwrite("method", &ltvrec::RunConfig::method)
      .def_readwrite("k", &ltvrec::RunConfig::k)
      .def_readwrite("lambda_", &ltvrec::RunConfig::lambda)
      .def_readwrite("folds", &ltvrec::RunConfig::folds)
      .def_readwrite("gamma", &ltvrec::RunConfig::gamma)
      .def_readwrite("epsilon", &ltvrec::RunConfig::epsilon)
      .def_readwrite("alpha", &ltvrec::RunConfig::alpha)
      .def_readwrite("target_kl", &ltvrec::RunConfig::target_kl)
      .def_readwrite("beta", &ltvrec::RunConfig::beta)
      .def_readwrite("rho_clip", &ltvrec::RunConfig::rho_clip)
      .def_readwrite("resamples", &ltvrec::RunConfig::resamples)
      .def_readwrite("states_per_trajectory", &ltvrec::RunConfig::states_per_trajectory)
      .def_readwrite("seed", &ltvrec::RunConfig::seed);

  m.def("load_config",
        [](const std::string& path) { return ltvrec::load_config(path); },
        py::arg("path"));
  m.def("set_config_key", &ltvrec::set_config_key, py::arg("config"), py::arg("key"),
        py::arg("value"));

  py::class_<ltvrec::WilcoxonResult>(m, "WilcoxonResult")
      .def_readonly("w_plus", &ltvrec::WilcoxonResult::w_plus)
      .def_readonly("n", &ltvrec::WilcoxonResult::n)
      .def_readonly("p", &ltvrec::WilcoxonResult::p)
      .def_readonly("exact", &ltvrec::WilcoxonResult::exact);

  py::class_<ltvrec::PairedComparison>(m, "PairedComparison")
      .def_readonly("values_a", &ltvrec::PairedComparison::values_a)
      .def_readonly("values_b", &ltvrec::PairedComparison::values_b)
      .def_readonly("test", &ltvrec::PairedComparison::test);

  py::class_<ltvrec::Pipeline>(m, "Pipeline")
      .def(py::init<ltvrec::RunConfig>(), py::arg("config"))
      .def("run_ingest", &ltvrec::Pipeline::run_ingest)
      .def("run_factorize", &ltvrec::Pipeline::run_factorize)
      .def("run_states", &ltvrec::Pipeline::run_states)
      .def("run_behavior", &ltvrec::Pipeline::run_behavior)
      .def("run_evaluate", &ltvrec::Pipeline::run_evaluate)
      .def("run_improve", &ltvrec::Pipeline::run_improve)
      .def("run_offpolicy", &ltvrec::Pipeline::run_offpolicy)
      .def("run_stats", &ltvrec::Pipeline::run_stats)
      .def("run_report", &ltvrec::Pipeline::run_report)
      .def("run_all", &ltvrec::Pipeline::run_all)
      .def("run_hash", &ltvrec::Pipeline::run_hash)
      .def("evaluate_mc", &ltvrec::Pipeline::evaluate_mc)
      .def("compare", &ltvrec::Pipeline::compare, py::arg("baseline"),
           py::arg("contender"), py::arg("resamples"), py::arg("seed"));

  m.def("wilcoxon_test",
        [](const std::vector<double>& diffs) { return ltvrec::wilcoxon_test(diffs); },
        py::arg("differences"));
  m.def("wilcoxon_one_sided",
        [](const std::vector<double>& diffs) {
          return ltvrec::wilcoxon_one_sided(diffs);
        },
        py::arg("differences"));
  m.def("derive_seed",
        [](std::uint64_t master, const std::string& label) {
          return ltvrec::derive_seed(master, label);
        },
        py::arg("master"), py::arg("label"));
  m.def("simulate_latent", &simulate_latent, py::arg("out_path"), py::arg("users"),
        py::arg("seed"));
}
