// Python bindings for the core operations: model construction, risk and
// Hessian probes, masked accelerated training, and pruning.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ticketlab/experiments.hpp"
#include "ticketlab/io.hpp"
#include "ticketlab/risk.hpp"
#include "ticketlab/version.hpp"

namespace py = pybind11;
namespace tl = ticketlab;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Masked one-hidden-layer ReLU learning and pruning";
  m.attr("__version__") = tl::kVersion;

  py::class_<tl::MaskMatrix>(m, "MaskMatrix")
      .def(py::init<Eigen::ArrayXXd>(), py::arg("entries"))
      .def_static("full", &tl::MaskMatrix::full, py::arg("d"), py::arg("K"))
      .def_property_readonly("d", &tl::MaskMatrix::d)
      .def_property_readonly("K", &tl::MaskMatrix::K)
      .def_property_readonly("entries", &tl::MaskMatrix::entries)
      .def_property_readonly("r_min", &tl::MaskMatrix::r_min)
      .def_property_readonly("r_max", &tl::MaskMatrix::r_max)
      .def_property_readonly("r_ave", &tl::MaskMatrix::r_ave)
      .def("support", &tl::MaskMatrix::support, py::arg("j"))
      .def("columns_overlap", &tl::MaskMatrix::columns_overlap, py::arg("j"), py::arg("k"))
      .def("__eq__", &tl::MaskMatrix::operator==);

  py::class_<tl::WeightMatrix>(m, "WeightMatrix")
      .def(py::init<Eigen::MatrixXd, tl::MaskMatrix>(), py::arg("values"), py::arg("mask"))
      .def_static("projected", &tl::WeightMatrix::projected, py::arg("values"), py::arg("mask"))
      .def_property_readonly("values", &tl::WeightMatrix::values)
      .def_property_readonly("mask", &tl::WeightMatrix::mask);

  py::class_<tl::OracleNetwork>(m, "OracleNetwork")
      .def(py::init<tl::WeightMatrix, double>(), py::arg("weights"), py::arg("noise_sigma"))
      .def_readonly("weights", &tl::OracleNetwork::weights)
      .def_readwrite("noise_sigma", &tl::OracleNetwork::noise_sigma)
      .def_property_readonly("mask", &tl::OracleNetwork::mask);

  py::class_<tl::SampleSet>(m, "SampleSet")
      .def(py::init<Eigen::MatrixXd, Eigen::VectorXd>(), py::arg("inputs"), py::arg("labels"))
      .def_readonly("inputs", &tl::SampleSet::inputs)
      .def_readonly("labels", &tl::SampleSet::labels)
      .def_property_readonly("size", &tl::SampleSet::size);

  py::enum_<tl::OverlapMode>(m, "OverlapMode")
      .value("ALMOST_OVERLAPPED", tl::OverlapMode::kAlmostOverlapped)
      .value("DISJOINT", tl::OverlapMode::kDisjoint)
      .value("RANDOM", tl::OverlapMode::kRandom);

  m.def("generate_oracle", &tl::generate_oracle, py::arg("d"), py::arg("K"),
        py::arg("sparsities"), py::arg("mode"), py::arg("seed"), py::arg("weight_scale") = 0.5);
  m.def("sample_dataset", &tl::sample_dataset, py::arg("oracle"), py::arg("N"), py::arg("seed"));
  m.def("forward_batch", &tl::forward_batch, py::arg("weights"), py::arg("inputs"));
  m.def("r_tilde", &tl::r_tilde, py::arg("mask"));
  m.def("mask_accuracy", &tl::mask_accuracy, py::arg("learner_mask"), py::arg("oracle_mask"),
        py::arg("maximize_over_permutations") = false);
  m.def("pruning_ratio", &tl::pruning_ratio, py::arg("mask"));
  m.def("noise_level", &tl::noise_level, py::arg("oracle"), py::arg("reference_samples"));

  py::class_<tl::AlignmentResult>(m, "AlignmentResult")
      .def_readonly("permutation", &tl::AlignmentResult::permutation)
      .def_readonly("relative_error", &tl::AlignmentResult::relative_error);
  m.def("align_permutation", &tl::align_permutation, py::arg("W"), py::arg("W_star"));

  m.def("empirical_risk", &tl::empirical_risk, py::arg("W"), py::arg("data"));
  m.def("masked_gradient", &tl::masked_gradient, py::arg("W"), py::arg("data"));
  m.def("hessian", &tl::hessian, py::arg("W"), py::arg("data"), py::arg("densify_cap") = 5000);

  py::class_<tl::HessianProbe>(m, "HessianProbe")
      .def_readonly("lambda_min", &tl::HessianProbe::lambda_min)
      .def_readonly("lambda_max", &tl::HessianProbe::lambda_max)
      .def_readonly("n_params", &tl::HessianProbe::n_params)
      .def_readonly("location_error", &tl::HessianProbe::location_error);
  m.def("hessian_probe", &tl::hessian_probe, py::arg("W"), py::arg("data"), py::arg("W_star"),
        py::arg("densify_cap") = 5000);
  m.def("extreme_eigenvalues_matfree", &tl::extreme_eigenvalues_matfree, py::arg("W"),
        py::arg("data"), py::arg("rel_tol") = 1e-8, py::arg("max_iters_per_param") = 10);

  py::enum_<tl::PartitionMode>(m, "PartitionMode")
      .value("REUSE_FULL", tl::PartitionMode::kReuseFull)
      .value("FRESH_SUBSETS", tl::PartitionMode::kFreshSubsets);
  py::enum_<tl::StopReason>(m, "StopReason")
      .value("CONVERGED", tl::StopReason::kConverged)
      .value("ITERATION_CAP", tl::StopReason::kIterationCap)
      .value("DIVERGED", tl::StopReason::kDiverged);

  py::class_<tl::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("eta", &tl::TrainConfig::eta)
      .def_readwrite("beta", &tl::TrainConfig::beta)
      .def_readwrite("max_iters", &tl::TrainConfig::max_iters)
      .def_readwrite("rel_change_tol", &tl::TrainConfig::rel_change_tol)
      .def_readwrite("partition_mode", &tl::TrainConfig::partition_mode)
      .def_readwrite("subset_count", &tl::TrainConfig::subset_count)
      .def_readwrite("seed", &tl::TrainConfig::seed)
      .def("validate", &tl::TrainConfig::validate);

  py::class_<tl::TraceRecord>(m, "TraceRecord")
      .def_readonly("iter", &tl::TraceRecord::iter)
      .def_readonly("rel_error", &tl::TraceRecord::rel_error)
      .def_readonly("risk", &tl::TraceRecord::risk)
      .def_readonly("rel_change", &tl::TraceRecord::rel_change);

  py::class_<tl::TrainTrace>(m, "TrainTrace")
      .def_readonly("records", &tl::TrainTrace::records)
      .def_readonly("final_weights", &tl::TrainTrace::final_weights)
      .def_readonly("reason", &tl::TrainTrace::reason)
      .def_readonly("iterations", &tl::TrainTrace::iterations)
      .def("final_rel_error", &tl::TrainTrace::final_rel_error);

  m.def("random_ball_init", &tl::random_ball_init, py::arg("oracle"), py::arg("lambda_"),
        py::arg("learner_mask"), py::arg("seed"), py::arg("warn_on_inaccurate_mask") = true);
  m.def(
      "agd_train",
      [](const tl::SampleSet& data, const tl::MaskMatrix& mask, const tl::WeightMatrix& w0,
         const tl::TrainConfig& config, const tl::OracleNetwork* oracle) {
        return tl::agd_train(data, mask, w0, config, oracle);
      },
      py::arg("data"), py::arg("mask"), py::arg("w0"), py::arg("config"),
      py::arg("oracle_for_metrics") = nullptr);
  m.def("estimate_rate", &tl::estimate_rate, py::arg("trace"), py::arg("noise_floor") = 1e-3);

  py::class_<tl::TrialResult>(m, "TrialResult")
      .def_readonly("success", &tl::TrialResult::success)
      .def_readonly("final_rel_error", &tl::TrialResult::final_rel_error)
      .def_readonly("iterations", &tl::TrialResult::iterations)
      .def_readonly("reason", &tl::TrialResult::reason);
  m.def("run_trial", &tl::run_trial, py::arg("oracle"), py::arg("N"), py::arg("learner_mask"),
        py::arg("lambda_"), py::arg("config"), py::arg("success_tol") = 1e-4);

  py::enum_<tl::RewindMode>(m, "RewindMode")
      .value("TO_INIT", tl::RewindMode::kToInit)
      .value("NONE", tl::RewindMode::kNone);

  py::class_<tl::PruneSchedule>(m, "PruneSchedule")
      .def(py::init<>())
      .def_readwrite("rounds", &tl::PruneSchedule::rounds)
      .def_readwrite("per_round_fraction", &tl::PruneSchedule::per_round_fraction)
      .def_readwrite("rewind", &tl::PruneSchedule::rewind);

  py::class_<tl::PrunedRunRecord>(m, "PrunedRunRecord")
      .def_readonly("round", &tl::PrunedRunRecord::round)
      .def_readonly("mask", &tl::PrunedRunRecord::mask)
      .def_readonly("pruning_ratio", &tl::PrunedRunRecord::pruning_ratio)
      .def_readonly("mask_accuracy", &tl::PrunedRunRecord::mask_accuracy)
      .def_readonly("test_error", &tl::PrunedRunRecord::test_error)
      .def_readonly("train_iterations", &tl::PrunedRunRecord::train_iterations)
      .def_readonly("stop_note", &tl::PrunedRunRecord::stop_note);

  py::class_<tl::GraspResult>(m, "GraspResult")
      .def_readonly("mask", &tl::GraspResult::mask)
      .def_readonly("magnitude_fallback", &tl::GraspResult::magnitude_fallback);

  py::class_<tl::ImpOptions>(m, "ImpOptions")
      .def(py::init<>())
      .def_readwrite("test_samples", &tl::ImpOptions::test_samples)
      .def_readwrite("test_seed", &tl::ImpOptions::test_seed)
      .def_readwrite("noisy_test", &tl::ImpOptions::noisy_test);

  m.def("magnitude_prune", &tl::magnitude_prune, py::arg("W"), py::arg("keep_per_neuron"));
  m.def("grasp_prune", &tl::grasp_prune, py::arg("data"), py::arg("mask_full"),
        py::arg("warmup"), py::arg("target_ratio"), py::arg("seed"));
  m.def("hessian_vector_product", &tl::hessian_vector_product, py::arg("W"), py::arg("data"),
        py::arg("v"));
  m.def("imp", &tl::imp, py::arg("data"), py::arg("schedule"), py::arg("config"),
        py::arg("W_init"), py::arg("oracle_for_metrics") = nullptr,
        py::arg("options") = tl::ImpOptions{});
  m.def("test_error", &tl::test_error, py::arg("W"), py::arg("oracle"), py::arg("N_test"),
        py::arg("seed"), py::arg("noisy") = true);

  m.def("oracle_to_json", &tl::oracle_to_json);
  m.def("oracle_from_json", &tl::oracle_from_json);
  m.def("samples_to_json", &tl::samples_to_json);
  m.def("samples_from_json", &tl::samples_from_json);
  m.def("mask_to_csv", &tl::mask_to_csv);
}
