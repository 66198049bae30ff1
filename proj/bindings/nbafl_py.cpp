#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nbafl/bounds.hpp"
#include "nbafl/config.hpp"
#include "nbafl/csv.hpp"
#include "nbafl/data.hpp"
#include "nbafl/federated.hpp"
#include "nbafl/model.hpp"
#include "nbafl/privacy.hpp"
#include "nbafl/rng.hpp"
#include "nbafl/train.hpp"

namespace py = pybind11;

namespace {

nbafl::Architecture make_arch(const std::string& kind, int input_dim, int hidden_dim,
                              int classes) {
  nbafl::Architecture arch;
  if (kind == "logistic") {
    arch.kind = nbafl::ModelKind::kMultinomialLogistic;
  } else if (kind == "mlp") {
    arch.kind = nbafl::ModelKind::kReluMlp;
  } else {
    throw std::invalid_argument("model kind must be 'logistic' or 'mlp'");
  }
  arch.input_dim = input_dim;
  arch.hidden_dim = hidden_dim;
  arch.classes = classes;
  return arch;
}

nbafl::LabeledDataset make_dataset(const Eigen::MatrixXd& features,
                                   const std::vector<int>& labels, int classes) {
  nbafl::LabeledDataset data;
  data.features = features;
  data.labels = labels;
  data.classes = classes;
  return data;
}

}  // namespace

PYBIND11_MODULE(nbafl, m) {
  m.doc() = "Differentially private federated averaging: simulator and bound evaluators";

  py::register_exception<nbafl::ScheduleDomainError>(m, "ScheduleDomainError",
                                                     PyExc_ValueError);
  py::register_exception<nbafl::DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  py::enum_<nbafl::StreamPurpose>(m, "StreamPurpose")
      .value("MODEL_INIT", nbafl::StreamPurpose::kModelInit)
      .value("UPLINK_NOISE", nbafl::StreamPurpose::kUplinkNoise)
      .value("DOWNLINK_NOISE", nbafl::StreamPurpose::kDownlinkNoise)
      .value("PARTITION", nbafl::StreamPurpose::kPartition)
      .value("SCHEDULING", nbafl::StreamPurpose::kScheduling)
      .value("SYNTH_DATA", nbafl::StreamPurpose::kSynthData)
      .value("PROBE", nbafl::StreamPurpose::kProbe)
      .value("AUDIT", nbafl::StreamPurpose::kAudit);

  py::class_<nbafl::RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, nbafl::StreamPurpose, std::uint64_t, std::uint64_t>(),
           py::arg("master_seed"), py::arg("purpose"), py::arg("round") = 0,
           py::arg("client") = 0)
      .def("next_u64", &nbafl::RngStream::next_u64)
      .def("next_unit", &nbafl::RngStream::next_unit)
      .def("next_gaussian", &nbafl::RngStream::next_gaussian);

  m.def("gaussian_constant", &nbafl::gaussian_constant, py::arg("delta"));
  m.def("uplink_sensitivity", &nbafl::uplink_sensitivity, py::arg("clip_c"),
        py::arg("shard_size"));
  m.def("downlink_sensitivity", &nbafl::downlink_sensitivity, py::arg("clip_c"),
        py::arg("shard_size"), py::arg("weight"));

  m.def(
      "uplink_sigma",
      [](double epsilon, double delta, double clip_c, int shard_size, int uplink_max) {
        const nbafl::PrivacyBudget budget = nbafl::make_budget(epsilon, delta);
        return nbafl::uplink_sigma(budget, nbafl::uplink_sensitivity(clip_c, shard_size),
                                   uplink_max);
      },
      py::arg("epsilon"), py::arg("delta"), py::arg("clip_c"), py::arg("shard_size"),
      py::arg("uplink_max"));

  m.def(
      "downlink_sigma_all",
      [](double epsilon, double delta, double clip_c, int shard_size, int n_clients,
         int rounds, int uplink_max) {
        return nbafl::downlink_sigma_all(nbafl::make_budget(epsilon, delta), clip_c,
                                         shard_size, n_clients,
                                         nbafl::ExposureModel{rounds, uplink_max});
      },
      py::arg("epsilon"), py::arg("delta"), py::arg("clip_c"), py::arg("shard_size"),
      py::arg("n_clients"), py::arg("rounds"), py::arg("uplink_max"));

  m.def(
      "downlink_sigma_ksched",
      [](double epsilon, double delta, double clip_c, int shard_size, int k_clients,
         int n_clients, int rounds, int uplink_max) {
        return nbafl::downlink_sigma_ksched(nbafl::make_budget(epsilon, delta), clip_c,
                                            shard_size, k_clients, n_clients,
                                            nbafl::ExposureModel{rounds, uplink_max});
      },
      py::arg("epsilon"), py::arg("delta"), py::arg("clip_c"), py::arg("shard_size"),
      py::arg("k_clients"), py::arg("n_clients"), py::arg("rounds"), py::arg("uplink_max"));

  m.def(
      "ksched_coefficients",
      [](double epsilon, double delta, int rounds, int k_clients, int n_clients,
         int uplink_max) {
        const nbafl::KschedCoefficients coeffs = nbafl::ksched_coefficients(
            nbafl::make_budget(epsilon, delta), rounds, k_clients, n_clients, uplink_max);
        return py::make_tuple(coeffs.b, coeffs.gamma);
      },
      py::arg("epsilon"), py::arg("delta"), py::arg("rounds"), py::arg("k_clients"),
      py::arg("n_clients"), py::arg("uplink_max"));

  py::class_<nbafl::NoiseCalibration>(m, "NoiseCalibration")
      .def_readonly("sigma_uplink", &nbafl::NoiseCalibration::sigma_uplink)
      .def_readonly("sigma_downlink", &nbafl::NoiseCalibration::sigma_downlink)
      .def_readonly("sigma_aggregate", &nbafl::NoiseCalibration::sigma_aggregate)
      .def_readonly("b", &nbafl::NoiseCalibration::b)
      .def_readonly("gamma", &nbafl::NoiseCalibration::gamma)
      .def_readonly("warnings", &nbafl::NoiseCalibration::warnings);

  m.def(
      "aggregate_sigma",
      [](const std::string& schedule, double epsilon, double delta, double clip_c,
         int shard_size, int n_clients, int k_clients, int rounds, int uplink_max) {
        const nbafl::ScheduleMode mode = schedule == "krandom"
                                             ? nbafl::ScheduleMode::kKRandom
                                             : nbafl::ScheduleMode::kAllClients;
        return nbafl::aggregate_sigma(mode, nbafl::make_budget(epsilon, delta), clip_c,
                                      shard_size, n_clients, k_clients,
                                      nbafl::ExposureModel{rounds, uplink_max});
      },
      py::arg("schedule"), py::arg("epsilon"), py::arg("delta"), py::arg("clip_c"),
      py::arg("shard_size"), py::arg("n_clients"), py::arg("k_clients"), py::arg("rounds"),
      py::arg("uplink_max"));

  m.def(
      "sample_noise",
      [](int dim, double sigma, nbafl::RngStream& stream) {
        return nbafl::sample_noise(dim, sigma, stream);
      },
      py::arg("dim"), py::arg("sigma"), py::arg("stream"));

  py::class_<nbafl::AuditReport>(m, "AuditReport")
      .def_readonly("estimate", &nbafl::AuditReport::estimate)
      .def_readonly("half_width", &nbafl::AuditReport::half_width)
      .def_readonly("samples", &nbafl::AuditReport::samples)
      .def_readonly("passed", &nbafl::AuditReport::pass);

  m.def(
      "audit_mechanism",
      [](double sigma, double sensitivity, double epsilon, double delta,
         std::int64_t samples, std::uint64_t seed) {
        nbafl::RngStream stream(seed, nbafl::StreamPurpose::kAudit);
        return nbafl::audit_mechanism(sigma, sensitivity, epsilon, delta, samples, stream);
      },
      py::arg("sigma"), py::arg("sensitivity"), py::arg("epsilon"), py::arg("delta"),
      py::arg("samples") = 1000000, py::arg("seed") = 0);

  m.def("clip", &nbafl::clip, py::arg("values"), py::arg("clip_c"));

  m.def(
      "init_params",
      [](const std::string& kind, int input_dim, int hidden_dim, int classes,
         std::uint64_t seed) {
        nbafl::RngStream stream(seed, nbafl::StreamPurpose::kModelInit);
        return nbafl::init_params(make_arch(kind, input_dim, hidden_dim, classes), stream)
            .values;
      },
      py::arg("kind"), py::arg("input_dim"), py::arg("hidden_dim"), py::arg("classes"),
      py::arg("seed") = 0);

  m.def(
      "loss",
      [](const std::string& kind, int hidden_dim, const Eigen::VectorXd& values,
         const Eigen::MatrixXd& features, const std::vector<int>& labels, int classes,
         double l2_reg) {
        const nbafl::Architecture arch =
            make_arch(kind, static_cast<int>(features.cols()), hidden_dim, classes);
        return nbafl::loss(nbafl::ModelParams{arch, values}, nbafl::LossSpec{l2_reg},
                           make_dataset(features, labels, classes));
      },
      py::arg("kind"), py::arg("hidden_dim"), py::arg("values"), py::arg("features"),
      py::arg("labels"), py::arg("classes"), py::arg("l2_reg") = 0.0);

  m.def(
      "gradient",
      [](const std::string& kind, int hidden_dim, const Eigen::VectorXd& values,
         const Eigen::MatrixXd& features, const std::vector<int>& labels, int classes,
         double l2_reg) {
        const nbafl::Architecture arch =
            make_arch(kind, static_cast<int>(features.cols()), hidden_dim, classes);
        return nbafl::gradient(nbafl::ModelParams{arch, values}, nbafl::LossSpec{l2_reg},
                               make_dataset(features, labels, classes));
      },
      py::arg("kind"), py::arg("hidden_dim"), py::arg("values"), py::arg("features"),
      py::arg("labels"), py::arg("classes"), py::arg("l2_reg") = 0.0);

  m.def(
      "accuracy",
      [](const std::string& kind, int hidden_dim, const Eigen::VectorXd& values,
         const Eigen::MatrixXd& features, const std::vector<int>& labels, int classes) {
        const nbafl::Architecture arch =
            make_arch(kind, static_cast<int>(features.cols()), hidden_dim, classes);
        return nbafl::accuracy(nbafl::ModelParams{arch, values},
                               make_dataset(features, labels, classes));
      },
      py::arg("kind"), py::arg("hidden_dim"), py::arg("values"), py::arg("features"),
      py::arg("labels"), py::arg("classes"));

  m.def(
      "synth_classification",
      [](int n, int dim, int classes, double margin, std::uint64_t seed) {
        nbafl::RngStream stream(seed, nbafl::StreamPurpose::kSynthData);
        const nbafl::LabeledDataset data =
            nbafl::synth_classification(n, dim, classes, margin, stream);
        return py::make_tuple(data.features, data.labels);
      },
      py::arg("n"), py::arg("dim"), py::arg("classes"), py::arg("margin"),
      py::arg("seed") = 0);

  m.def(
      "load_idx",
      [](const std::string& images_path, const std::string& labels_path) {
        const nbafl::LabeledDataset data = nbafl::load_idx(images_path, labels_path);
        return py::make_tuple(data.features, data.labels);
      },
      py::arg("images_path"), py::arg("labels_path"));

  m.def(
      "partition_iid",
      [](int n_samples, int n_clients, int shard_size, std::uint64_t seed) {
        nbafl::LabeledDataset dummy;
        dummy.features = Eigen::MatrixXd::Zero(n_samples, 1);
        dummy.labels.assign(static_cast<std::size_t>(n_samples), 0);
        dummy.classes = 1;
        nbafl::RngStream stream(seed, nbafl::StreamPurpose::kPartition);
        return nbafl::partition_iid(dummy, n_clients, shard_size, stream).shards;
      },
      py::arg("n_samples"), py::arg("n_clients"), py::arg("shard_size"), py::arg("seed") = 0);

  py::class_<nbafl::RoundTrace>(m, "RoundTrace")
      .def_readonly("round", &nbafl::RoundTrace::round)
      .def_readonly("scheduled", &nbafl::RoundTrace::scheduled)
      .def_readonly("train_loss", &nbafl::RoundTrace::train_loss)
      .def_readonly("test_loss", &nbafl::RoundTrace::test_loss)
      .def_readonly("test_accuracy", &nbafl::RoundTrace::test_accuracy)
      .def_readonly("sigma_uplink", &nbafl::RoundTrace::sigma_uplink)
      .def_readonly("sigma_downlink", &nbafl::RoundTrace::sigma_downlink)
      .def_readonly("sigma_aggregate", &nbafl::RoundTrace::sigma_aggregate);

  py::class_<nbafl::RunResult>(m, "RunResult")
      .def_readonly("trace", &nbafl::RunResult::trace)
      .def_readonly("calibration", &nbafl::RunResult::calibration)
      .def_property_readonly(
          "final_values", [](const nbafl::RunResult& r) { return r.final_params.values; });

  m.def(
      "run",
      [](const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
         const Eigen::MatrixXd& test_x, const std::vector<int>& test_y, int classes,
         int n_clients, const std::string& schedule, int k_clients, int rounds,
         double epsilon, double delta, double clip_c, double mu, int shard_size,
         int uplink_exposures, const std::string& model, int mlp_hidden, double l2_reg,
         int inner_steps, double learning_rate, std::uint64_t seed, bool noiseless,
         int jobs) {
        nbafl::FLConfig config;
        config.n_clients = n_clients;
        config.schedule = schedule == "krandom" ? nbafl::ScheduleMode::kKRandom
                                                : nbafl::ScheduleMode::kAllClients;
        config.k_clients = k_clients;
        config.rounds = rounds;
        config.epsilon = epsilon;
        config.delta = delta;
        config.clip_c = clip_c;
        config.shard_size = shard_size;
        config.uplink_exposures = uplink_exposures;
        config.model = model == "mlp" || model == "mlp256"
                           ? nbafl::ModelKind::kReluMlp
                           : nbafl::ModelKind::kMultinomialLogistic;
        config.mlp_hidden = mlp_hidden;
        config.loss.l2_reg = l2_reg;
        config.prox.mu = mu;
        config.prox.inner_steps = inner_steps;
        config.prox.learning_rate = learning_rate;
        config.seed = seed;
        config.noiseless = noiseless;
        config.jobs = jobs;
        return nbafl::run_nbafl(config, make_dataset(train_x, train_y, classes),
                                make_dataset(test_x, test_y, classes));
      },
      py::arg("train_x"), py::arg("train_y"), py::arg("test_x"), py::arg("test_y"),
      py::arg("classes"), py::arg("n_clients"), py::arg("schedule") = "all",
      py::arg("k_clients") = 0, py::arg("rounds") = 10, py::arg("epsilon") = 60.0,
      py::arg("delta") = 0.01, py::arg("clip_c") = 1.0, py::arg("mu") = 1.0,
      py::arg("shard_size") = 1, py::arg("uplink_exposures") = 1,
      py::arg("model") = "logistic", py::arg("mlp_hidden") = 256, py::arg("l2_reg") = 0.0,
      py::arg("inner_steps") = 30, py::arg("learning_rate") = 0.002, py::arg("seed") = 0,
      py::arg("noiseless") = false, py::arg("jobs") = 1);

  py::class_<nbafl::LossRegularity>(m, "LossRegularity")
      .def(py::init([](double rho, double beta, double l, double B, double Theta) {
             nbafl::LossRegularity reg;
             reg.rho = rho;
             reg.beta = beta;
             reg.l = l;
             reg.B = B;
             reg.Theta = Theta;
             return reg;
           }),
           py::arg("rho"), py::arg("beta"), py::arg("l"), py::arg("B"), py::arg("Theta"))
      .def_readonly("rho", &nbafl::LossRegularity::rho)
      .def_readonly("beta", &nbafl::LossRegularity::beta)
      .def_readonly("l", &nbafl::LossRegularity::l)
      .def_readonly("B", &nbafl::LossRegularity::B)
      .def_readonly("Theta", &nbafl::LossRegularity::Theta)
      .def_readonly("divergence", &nbafl::LossRegularity::divergence);

  m.def(
      "increment_coeffs",
      [](double mu, double rho, double B) {
        const nbafl::IncrementCoeffs coeffs = nbafl::increment_coeffs(mu, rho, B);
        return py::make_tuple(coeffs.noise_sq, coeffs.noise_grad, coeffs.grad_sq);
      },
      py::arg("mu"), py::arg("rho"), py::arg("B"));

  m.def("noise_norm_moments", &nbafl::noise_norm_moments, py::arg("sigma"),
        py::arg("n_dim_eff"));

  m.def(
      "convergence_bound_all",
      [](int rounds, double epsilon, double delta, int n_clients, int shard_size, double mu,
         const nbafl::LossRegularity& reg) {
        return nbafl::convergence_bound_all(
            nbafl::BoundParams{rounds, epsilon, delta, n_clients, shard_size, mu, reg});
      },
      py::arg("rounds"), py::arg("epsilon"), py::arg("delta"), py::arg("n_clients"),
      py::arg("shard_size"), py::arg("mu"), py::arg("reg"));

  m.def(
      "convergence_bound_all_general",
      [](int rounds, double epsilon, double delta, int n_clients, int shard_size, double mu,
         const nbafl::LossRegularity& reg, double clip_c, int n_dim_eff) {
        return nbafl::convergence_bound_all_general(
            nbafl::BoundParams{rounds, epsilon, delta, n_clients, shard_size, mu, reg},
            clip_c, n_dim_eff);
      },
      py::arg("rounds"), py::arg("epsilon"), py::arg("delta"), py::arg("n_clients"),
      py::arg("shard_size"), py::arg("mu"), py::arg("reg"), py::arg("clip_c"),
      py::arg("n_dim_eff") = -1);

  m.def(
      "convergence_bound_ksched",
      [](int rounds, double epsilon, double delta, int n_clients, int k_clients,
         int shard_size, double mu, const nbafl::LossRegularity& reg) {
        return nbafl::convergence_bound_ksched(nbafl::KBoundParams{
            rounds, epsilon, delta, n_clients, k_clients, shard_size, mu, reg});
      },
      py::arg("rounds"), py::arg("epsilon"), py::arg("delta"), py::arg("n_clients"),
      py::arg("k_clients"), py::arg("shard_size"), py::arg("mu"), py::arg("reg"));

  m.def(
      "estimate_regularity",
      [](const std::function<double(const Eigen::VectorXd&)>& value,
         const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
         const Eigen::VectorXd& w0, int probes, std::uint64_t seed, int descent_steps,
         int refine_steps, double learning_rate) {
        nbafl::Objective objective{value, gradient, nullptr};
        nbafl::RegularityOptions options;
        options.descent_steps = descent_steps;
        options.refine_steps = refine_steps;
        options.learning_rate = learning_rate;
        nbafl::RngStream stream(seed, nbafl::StreamPurpose::kProbe);
        return nbafl::estimate_regularity(objective, {}, w0, probes, stream, options);
      },
      py::arg("value"), py::arg("gradient"), py::arg("w0"), py::arg("probes") = 64,
      py::arg("seed") = 0, py::arg("descent_steps") = 300, py::arg("refine_steps") = 3000,
      py::arg("learning_rate") = 0.05);

  m.def("parse_config", [](const std::string& text) {
    const nbafl::RunConfigFile config = nbafl::parse_config_text(text);
    return nbafl::serialize_config(config);
  });
}
