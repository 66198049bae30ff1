#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nbafl/bounds.hpp"
#include "nbafl/config.hpp"
#include "nbafl/csv.hpp"
#include "nbafl/errors.hpp"
#include "nbafl/federated.hpp"
#include "nbafl/parallel.hpp"
#include "nbafl/privacy.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitDomain = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitAuditFail = 4;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int jobs = 1;
};

nbafl::RunConfigFile load_effective_config(const CommonOpts& opts) {
  nbafl::RunConfigFile config = nbafl::load_config(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  if (opts.out_dir) config.out_dir = *opts.out_dir;
  return config;
}

std::string data_dir_from_env() {
  const char* dir = std::getenv("NBAFL_DATA_DIR");
  return dir == nullptr ? std::string() : std::string(dir);
}

// Synthetic runs derive a held-out set from a disjoint stream; its size is a
// fifth of the training draw (at least 50) so evaluation stays cheap.
int synth_test_size(int synth_n) { return std::max(synth_n / 5, 50); }

std::pair<nbafl::LabeledDataset, nbafl::LabeledDataset> load_datasets(
    const nbafl::RunConfigFile& config) {
  if (config.dataset == "mnist") {
    const nbafl::MnistPaths paths = nbafl::resolve_mnist_paths(config, data_dir_from_env());
    nbafl::LabeledDataset train = nbafl::load_idx(paths.train_images, paths.train_labels);
    nbafl::LabeledDataset test = nbafl::load_idx(paths.test_images, paths.test_labels);
    // Train/test label ranges can differ on subsets; align on the wider one.
    train.classes = test.classes = std::max(train.classes, test.classes);
    return {std::move(train), std::move(test)};
  }
  // One draw covers train and held-out so both share the same class means.
  nbafl::RngStream stream(config.seed, nbafl::StreamPurpose::kSynthData);
  const int test_n = synth_test_size(config.synth_n);
  const nbafl::LabeledDataset all = nbafl::synth_classification(
      config.synth_n + test_n, config.synth_d, config.synth_classes, config.synth_margin,
      stream);
  std::vector<int> train_idx(static_cast<std::size_t>(config.synth_n));
  std::vector<int> test_idx(static_cast<std::size_t>(test_n));
  for (int i = 0; i < config.synth_n; ++i) train_idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < test_n; ++i) test_idx[static_cast<std::size_t>(i)] = config.synth_n + i;
  return {nbafl::gather(all, train_idx), nbafl::gather(all, test_idx)};
}

int run_protected(const std::function<int()>& body) {
  try {
    return body();
  } catch (const nbafl::ScheduleDomainError& error) {
    std::cerr << error.what() << '\n';
    return kExitDomain;
  } catch (const nbafl::DivergenceError& error) {
    std::cerr << "error: " << error.what() << '\n';
    return kExitDivergence;
  } catch (const nbafl::IoError& error) {
    std::cerr << "error: " << error.what() << '\n';
    return kExitIo;
  } catch (const nbafl::FormatError& error) {
    std::cerr << "error: " << error.what() << '\n';
    return kExitIo;
  } catch (const std::domain_error& error) {
    std::cerr << "error: " << error.what() << '\n';
    return kExitDomain;
  } catch (const std::invalid_argument& error) {
    std::cerr << "error: " << error.what() << '\n';
    return kExitDomain;
  }
}

void print_row(const char* name, double value) {
  std::printf("%-22s %.10g\n", name, value);
}

int cmd_calibrate(const CommonOpts& opts) {
  const nbafl::RunConfigFile config = load_effective_config(opts);
  const nbafl::FLConfig fl = nbafl::to_fl_config(config);
  const nbafl::PrivacyBudget budget = nbafl::make_budget(fl.epsilon, fl.delta);
  const nbafl::ExposureModel exposures{fl.rounds, fl.uplink_exposures};
  const nbafl::NoiseCalibration cal =
      nbafl::aggregate_sigma(fl.schedule, budget, fl.clip_c, fl.shard_size, fl.n_clients,
                             fl.k_clients, exposures);
  print_row("c", budget.c);
  print_row("sens_uplink", nbafl::uplink_sensitivity(fl.clip_c, fl.shard_size));
  const double weight = fl.schedule == nbafl::ScheduleMode::kKRandom
                            ? 1.0 / static_cast<double>(fl.k_clients)
                            : 1.0 / static_cast<double>(fl.n_clients);
  print_row("sens_downlink", nbafl::downlink_sensitivity(fl.clip_c, fl.shard_size, weight));
  print_row("sigma_uplink", cal.sigma_uplink);
  print_row("sigma_downlink", cal.sigma_downlink);
  print_row("sigma_aggregate", cal.sigma_aggregate);
  if (cal.b) print_row("b", *cal.b);
  if (cal.gamma) print_row("gamma", *cal.gamma);
  if (fl.schedule == nbafl::ScheduleMode::kKRandom && fl.k_clients < fl.n_clients) {
    const double minimal =
        -fl.epsilon /
        std::log1p(-static_cast<double>(fl.k_clients) / static_cast<double>(fl.n_clients));
    print_row("minimal_rounds", minimal);
    if (static_cast<double>(fl.rounds) <= minimal) {
      std::printf(
          "warning: the k-scheduling convergence bound is undefined at rounds=%d; "
          "minimal admissible T = %.10g\n",
          fl.rounds, minimal);
    }
  }
  for (const std::string& warning : cal.warnings) {
    std::printf("warning: %s\n", warning.c_str());
  }
  return kExitOk;
}

int cmd_run(const CommonOpts& opts) {
  nbafl::RunConfigFile config = load_effective_config(opts);
  nbafl::FLConfig fl = nbafl::to_fl_config(config);
  fl.jobs = opts.jobs;
  const auto [train, test] = load_datasets(config);
  const nbafl::RunResult result = nbafl::run_nbafl(fl, train, test);
  const std::string path = config.out_dir + "/run_" + std::to_string(fl.seed) + ".csv";
  nbafl::write_file_atomic(path, nbafl::render_trace_csv(result));
  const nbafl::RoundTrace& last = result.trace.back();
  std::printf("wrote %s\n", path.c_str());
  std::printf("final round=%d train_loss=%.10g test_loss=%.10g test_acc=%.10g\n", last.round,
              last.train_loss, last.test_loss, last.test_accuracy);
  return kExitOk;
}

struct BoundOpts {
  std::string variable = "rounds";
  int grid_max = 40;
  std::string k_values;
  int probes = 64;
  int est_steps = 300;
  int est_refine = 3000;
  double est_lr = -1.0;
  int n_dim_eff = -1;
  std::optional<double> rho, beta, l, B, theta;
};

nbafl::LossRegularity estimate_on_task(const nbafl::RunConfigFile& config,
                                       const nbafl::FLConfig& fl, const BoundOpts& bopts) {
  const auto [train, test] = load_datasets(config);
  nbafl::RngStream partition_stream(fl.seed, nbafl::StreamPurpose::kPartition);
  const nbafl::Partition partition =
      nbafl::partition_iid(train, fl.n_clients, fl.shard_size, partition_stream);
  std::vector<nbafl::LabeledDataset> shards;
  std::vector<int> union_indices;
  for (const std::vector<int>& shard : partition.shards) {
    shards.push_back(nbafl::gather(train, shard));
    union_indices.insert(union_indices.end(), shard.begin(), shard.end());
  }
  const nbafl::LabeledDataset train_union = nbafl::gather(train, union_indices);
  nbafl::Architecture arch;
  arch.kind = fl.model;
  arch.input_dim = train.dim();
  arch.hidden_dim = fl.model == nbafl::ModelKind::kReluMlp ? fl.mlp_hidden : 0;
  arch.classes = train.classes;
  nbafl::RngStream init_stream(fl.seed, nbafl::StreamPurpose::kModelInit);
  const nbafl::ModelParams w0 = nbafl::init_params(arch, init_stream);
  const nbafl::Objective global = nbafl::dataset_objective(arch, fl.loss, train_union);
  std::vector<nbafl::Objective> locals;
  locals.reserve(shards.size());
  for (const nbafl::LabeledDataset& shard : shards) {
    locals.push_back(nbafl::dataset_objective(arch, fl.loss, shard));
  }
  nbafl::RegularityOptions options;
  options.descent_steps = bopts.est_steps;
  options.refine_steps = bopts.est_refine;
  options.learning_rate = bopts.est_lr > 0.0 ? bopts.est_lr : fl.prox.learning_rate;
  nbafl::RngStream probe_stream(fl.seed, nbafl::StreamPurpose::kProbe);
  return nbafl::estimate_regularity(global, locals, w0.values, bopts.probes, probe_stream,
                                    options);
}

int cmd_bound(const CommonOpts& opts, const BoundOpts& bopts) {
  const nbafl::RunConfigFile config = load_effective_config(opts);
  const nbafl::FLConfig fl = nbafl::to_fl_config(config);

  const int provided = static_cast<int>(bopts.rho.has_value()) +
                       static_cast<int>(bopts.beta.has_value()) +
                       static_cast<int>(bopts.l.has_value()) +
                       static_cast<int>(bopts.B.has_value()) +
                       static_cast<int>(bopts.theta.has_value());
  nbafl::LossRegularity reg;
  if (provided == 5) {
    reg.rho = *bopts.rho;
    reg.beta = *bopts.beta;
    reg.l = *bopts.l;
    reg.B = *bopts.B;
    reg.Theta = *bopts.theta;
  } else if (provided == 0) {
    reg = estimate_on_task(config, fl, bopts);
    std::printf("estimated rho=%.10g beta=%.10g l=%.10g B=%.10g Theta=%.10g\n", reg.rho,
                reg.beta, reg.l, reg.B, reg.Theta);
  } else {
    throw std::invalid_argument(
        "bound: provide all of --rho --beta --l --B --theta or none of them");
  }

  std::vector<int> grid;
  std::string axis;
  std::function<double(int)> evaluator;
  if (bopts.variable == "rounds") {
    axis = "T";
    for (int t = 1; t <= bopts.grid_max; ++t) grid.push_back(t);
    if (fl.schedule == nbafl::ScheduleMode::kKRandom) {
      evaluator = [&](int t) {
        nbafl::KBoundParams params{t,           fl.epsilon,    fl.delta, fl.n_clients,
                                   fl.k_clients, fl.shard_size, fl.prox.mu, reg};
        return nbafl::convergence_bound_ksched(params);
      };
    } else {
      evaluator = [&](int t) {
        nbafl::BoundParams params{t,          fl.epsilon, fl.delta, fl.n_clients,
                                  fl.shard_size, fl.prox.mu, reg};
        return nbafl::convergence_bound_all_general(params, fl.clip_c, bopts.n_dim_eff);
      };
    }
  } else if (bopts.variable == "k_clients") {
    axis = "K";
    if (bopts.k_values.empty()) {
      for (int k = 2; k < fl.n_clients; ++k) grid.push_back(k);
    } else {
      std::istringstream in(bopts.k_values);
      std::string token;
      while (std::getline(in, token, ',')) grid.push_back(std::stoi(token));
    }
    evaluator = [&](int k) {
      nbafl::KBoundParams params{fl.rounds,   fl.epsilon,    fl.delta, fl.n_clients,
                                 k,           fl.shard_size, fl.prox.mu, reg};
      return nbafl::convergence_bound_ksched(params);
    };
  } else {
    throw std::invalid_argument("bound: --variable must be rounds or k_clients");
  }

  const nbafl::GridScan scan = nbafl::scan_bound(evaluator, grid);
  const std::string path = config.out_dir + "/bound_profile.csv";
  nbafl::write_file_atomic(path, nbafl::render_profile_csv(scan, axis));
  std::printf("wrote %s\n", path.c_str());
  std::printf("%s* = %d  value = %.10g  convex = %s\n", axis.c_str(),
              scan.points[static_cast<std::size_t>(scan.best)].x,
              scan.points[static_cast<std::size_t>(scan.best)].value,
              scan.convex ? "true" : "false");
  return kExitOk;
}

struct SweepOpts {
  std::string variable;
  std::string values;
  int seeds = 1;
};

int cmd_sweep(const CommonOpts& opts, const SweepOpts& sopts) {
  const nbafl::RunConfigFile base = load_effective_config(opts);
  if (sopts.variable != "epsilon" && sopts.variable != "n_clients" &&
      sopts.variable != "k_clients" && sopts.variable != "rounds") {
    throw std::invalid_argument(
        "sweep: --variable must be one of epsilon, n_clients, k_clients, rounds");
  }
  if (sopts.seeds < 1) throw std::invalid_argument("sweep: --seeds must be >= 1");
  std::vector<std::string> values;
  {
    std::istringstream in(sopts.values);
    std::string token;
    while (std::getline(in, token, ',')) {
      if (!token.empty()) values.push_back(token);
    }
  }
  if (values.empty()) throw std::invalid_argument("sweep: --values must be a nonempty list");

  struct Cell {
    std::string value;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    int exit_code = kExitOk;
    double final_train_loss = 0.0;
    double final_test_acc = 0.0;
  };
  std::vector<Cell> cells;
  for (const std::string& value : values) {
    for (int j = 0; j < sopts.seeds; ++j) {
      Cell cell;
      cell.value = value;
      cell.seed = base.seed + static_cast<std::uint64_t>(j);
      cells.push_back(std::move(cell));
    }
  }

  nbafl::parallel_for(static_cast<int>(cells.size()), opts.jobs, [&](int i) {
    Cell& cell = cells[static_cast<std::size_t>(i)];
    try {
      nbafl::RunConfigFile config = base;
      nbafl::set_config_key(config, sopts.variable, cell.value);
      config.seed = cell.seed;
      nbafl::FLConfig fl = nbafl::to_fl_config(config);
      fl.jobs = 1;
      const auto [train, test] = load_datasets(config);
      const nbafl::RunResult result = nbafl::run_nbafl(fl, train, test);
      cell.final_train_loss = result.trace.back().train_loss;
      cell.final_test_acc = result.trace.back().test_accuracy;
      cell.ok = true;
    } catch (const nbafl::ScheduleDomainError& error) {
      cell.error = error.what();
      cell.exit_code = kExitDomain;
    } catch (const nbafl::DivergenceError& error) {
      cell.error = error.what();
      cell.exit_code = kExitDivergence;
    } catch (const nbafl::IoError& error) {
      cell.error = error.what();
      cell.exit_code = kExitIo;
    } catch (const std::exception& error) {
      cell.error = error.what();
      cell.exit_code = kExitDomain;
    }
  });

  std::vector<nbafl::SweepCell> rows;
  int failure_code = kExitOk;
  for (const Cell& cell : cells) {
    if (!cell.ok) {
      std::fprintf(stderr, "cell %s=%s seed=%llu failed: %s\n", sopts.variable.c_str(),
                   cell.value.c_str(), static_cast<unsigned long long>(cell.seed),
                   cell.error.c_str());
      if (failure_code == kExitOk) failure_code = cell.exit_code;
      continue;
    }
    nbafl::SweepCell row;
    row.variable = sopts.variable;
    row.value = cell.value;
    row.seed = cell.seed;
    row.final_train_loss = cell.final_train_loss;
    row.final_test_acc = cell.final_test_acc;
    rows.push_back(std::move(row));
  }
  const std::string raw_path = base.out_dir + "/sweep.csv";
  const std::string summary_path = base.out_dir + "/sweep_summary.csv";
  nbafl::write_file_atomic(raw_path, nbafl::render_sweep_csv(rows));
  if (!rows.empty()) {
    nbafl::write_file_atomic(summary_path, nbafl::render_sweep_summary_csv(rows));
    std::printf("wrote %s and %s\n", raw_path.c_str(), summary_path.c_str());
  } else {
    std::printf("wrote %s (no successful cells)\n", raw_path.c_str());
  }
  return failure_code;
}

struct AuditOpts {
  double epsilon = 0.0;
  double delta = 0.0;
  std::int64_t samples = 1000000;
  std::uint64_t seed = 0;
  double sigma_scale = 1.0;
};

int cmd_audit(const AuditOpts& aopts) {
  const nbafl::PrivacyBudget budget = nbafl::make_budget(aopts.epsilon, aopts.delta);
  const double sensitivity = 1.0;
  const double sigma = aopts.sigma_scale * budget.c * sensitivity / budget.epsilon;
  nbafl::RngStream stream(aopts.seed, nbafl::StreamPurpose::kAudit);
  const nbafl::AuditReport report = nbafl::audit_mechanism(
      sigma, sensitivity, aopts.epsilon, aopts.delta, aopts.samples, stream);
  std::printf("sigma                  %.10g\n", sigma);
  std::printf("samples                %lld\n", static_cast<long long>(report.samples));
  std::printf("estimate               %.10g\n", report.estimate);
  std::printf("half_width             %.10g\n", report.half_width);
  std::printf("delta                  %.10g\n", aopts.delta);
  std::printf("%s\n", report.pass ? "PASS" : "FAIL");
  return report.pass ? kExitOk : kExitAuditFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator and analysis toolkit for noise-calibrated private federated averaging"};
  app.require_subcommand(1);

  CommonOpts common;
  BoundOpts bound_opts;
  SweepOpts sweep_opts;
  AuditOpts audit_opts;

  const auto add_common = [&common](CLI::App* cmd, bool needs_config) {
    CLI::Option* config = cmd->add_option("--config", common.config_path, "Run configuration file");
    if (needs_config) config->required();
    cmd->add_option("--seed", common.seed, "Override the config seed");
    cmd->add_option("--out", common.out_dir, "Override the config output directory");
    cmd->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };

  CLI::App* calibrate = app.add_subcommand("calibrate", "Print the noise calibration table");
  add_common(calibrate, true);

  CLI::App* run = app.add_subcommand("run", "Execute one federated run and write its trace CSV");
  add_common(run, true);

  CLI::App* bound = app.add_subcommand("bound", "Evaluate a convergence bound over a grid");
  add_common(bound, true);
  bound->add_option("--variable", bound_opts.variable, "Grid variable: rounds or k_clients");
  bound->add_option("--grid-max", bound_opts.grid_max, "Largest T in the rounds grid")
      ->check(CLI::PositiveNumber);
  bound->add_option("--k-values", bound_opts.k_values, "Comma-separated K grid");
  bound->add_option("--probes", bound_opts.probes, "Probe points for constant estimation");
  bound->add_option("--est-steps", bound_opts.est_steps, "Descent steps for estimation");
  bound->add_option("--est-refine", bound_opts.est_refine, "Refinement steps for estimation");
  bound->add_option("--est-lr", bound_opts.est_lr, "Estimation learning rate");
  bound->add_option("--n-dim-eff", bound_opts.n_dim_eff,
                    "Effective noise dimension (default: number of clients)");
  bound->add_option("--rho", bound_opts.rho, "Smoothness constant");
  bound->add_option("--beta", bound_opts.beta, "Gradient norm bound");
  bound->add_option("--l", bound_opts.l, "Quadratic growth constant");
  bound->add_option("--B", bound_opts.B, "Dissimilarity bound");
  bound->add_option("--theta", bound_opts.theta, "Initial optimality gap");

  CLI::App* sweep = app.add_subcommand("sweep", "Run a grid of experiments");
  add_common(sweep, true);
  sweep->add_option("--variable", sweep_opts.variable, "Swept config key")->required();
  sweep->add_option("--values", sweep_opts.values, "Comma-separated values")->required();
  sweep->add_option("--seeds", sweep_opts.seeds, "Seeds per value");

  CLI::App* audit = app.add_subcommand("audit", "Monte-Carlo check of the noise calibration");
  audit->add_option("--epsilon", audit_opts.epsilon, "Privacy budget epsilon")->required();
  audit->add_option("--delta", audit_opts.delta, "Privacy budget delta")->required();
  audit->add_option("--samples", audit_opts.samples, "Monte-Carlo sample count");
  audit->add_option("--seed", audit_opts.seed, "Audit stream seed");
  audit->add_option("--sigma-scale", audit_opts.sigma_scale, "Scale factor applied to sigma")
      ->group("");

  CLI11_PARSE(app, argc, argv);

  if (calibrate->parsed()) return run_protected([&] { return cmd_calibrate(common); });
  if (run->parsed()) return run_protected([&] { return cmd_run(common); });
  if (bound->parsed()) return run_protected([&] { return cmd_bound(common, bound_opts); });
  if (sweep->parsed()) return run_protected([&] { return cmd_sweep(common, sweep_opts); });
  if (audit->parsed()) return run_protected([&] { return cmd_audit(audit_opts); });
  return kExitOk;
}
