#include "nbafl/federated.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nbafl/parallel.hpp"

namespace nbafl {
namespace {

void validate_config(const FLConfig& config, const LabeledDataset& train) {
  if (config.n_clients < 1) throw std::invalid_argument("run: n_clients must be >= 1");
  if (config.rounds < 1) throw std::invalid_argument("run: rounds must be >= 1");
  if (config.shard_size < 1) throw std::invalid_argument("run: shard_size must be >= 1");
  if (config.uplink_exposures < 1) throw std::invalid_argument("run: uplink_exposures must be >= 1");
  if (!(config.clip_c > 0.0)) throw std::invalid_argument("run: clip_c must be positive");
  if (config.jobs < 1) throw std::invalid_argument("run: jobs must be >= 1");
  if (config.schedule == ScheduleMode::kKRandom) {
    // k_clients == n_clients is accepted: scheduling then selects every client
    // and the noise calibration reduces exactly to the all-client case.
    if (!(config.k_clients > 1 && config.k_clients <= config.n_clients)) {
      throw std::invalid_argument("run: k-client scheduling requires 1 < k_clients <= n_clients");
    }
  }
  if (!config.noiseless && !(config.epsilon > 0.0)) {
    throw std::invalid_argument("run: epsilon must be positive");
  }
  if (train.classes < 2) throw std::invalid_argument("run: training data needs >= 2 classes");
}

Architecture make_architecture(const FLConfig& config, const LabeledDataset& train) {
  Architecture arch;
  arch.kind = config.model;
  arch.input_dim = train.dim();
  arch.hidden_dim = config.model == ModelKind::kReluMlp ? config.mlp_hidden : 0;
  arch.classes = train.classes;
  return arch;
}

}  // namespace

std::vector<int> select_clients(int k, int n, RngStream& stream) {
  if (n < 1 || k < 1 || k > n) {
    throw std::invalid_argument("select_clients: need 1 <= k <= n");
  }
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

Eigen::VectorXd aggregate(const std::vector<Eigen::VectorXd>& uploads,
                          const std::vector<double>& weights) {
  if (uploads.empty() || uploads.size() != weights.size()) {
    throw std::invalid_argument("aggregate: uploads and weights must be non-empty and equal-length");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("aggregate: weights must sum to 1");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(uploads.front().size());
  for (std::size_t i = 0; i < uploads.size(); ++i) {
    if (uploads[i].size() != out.size()) {
      throw std::invalid_argument("aggregate: upload dimensions differ");
    }
    out += weights[i] * uploads[i];
  }
  return out;
}

RunResult run_nbafl(const FLConfig& config, const LabeledDataset& train,
                    const LabeledDataset& test) {
  validate_config(config, train);
  const Architecture arch = make_architecture(config, train);
  const int dim = arch.param_count();
  const int n = config.n_clients;

  RunResult result;
  result.config = config;

  // Calibration happens before any round so domain errors surface up front.
  if (config.noiseless) {
    result.calibration.mode = config.schedule;
  } else {
    const PrivacyBudget budget = make_budget(config.epsilon, config.delta);
    const ExposureModel exposures{config.rounds, config.uplink_exposures};
    result.calibration =
        aggregate_sigma(config.schedule, budget, config.clip_c, config.shard_size, n,
                        config.k_clients, exposures);
  }
  const double sigma_up = result.calibration.sigma_uplink;
  const double sigma_down = result.calibration.sigma_downlink;

  RngStream partition_stream(config.seed, StreamPurpose::kPartition);
  const Partition partition = partition_iid(train, n, config.shard_size, partition_stream);
  std::vector<LabeledDataset> shards;
  shards.reserve(static_cast<std::size_t>(n));
  std::vector<int> union_indices;
  union_indices.reserve(static_cast<std::size_t>(n) * config.shard_size);
  for (const std::vector<int>& shard : partition.shards) {
    shards.push_back(gather(train, shard));
    union_indices.insert(union_indices.end(), shard.begin(), shard.end());
  }
  // Equal shard sizes make the mean of per-shard losses equal the loss on
  // the union of shards; the union needs one pass instead of N.
  const LabeledDataset train_union = gather(train, union_indices);

  RngStream init_stream(config.seed, StreamPurpose::kModelInit);
  ModelParams global = init_params(arch, init_stream);

  std::vector<int> upload_counts(static_cast<std::size_t>(n), 0);
  result.trace.reserve(static_cast<std::size_t>(config.rounds));

  for (int round = 1; round <= config.rounds; ++round) {
    std::vector<int> scheduled;
    if (config.schedule == ScheduleMode::kAllClients) {
      scheduled.resize(static_cast<std::size_t>(n));
      std::iota(scheduled.begin(), scheduled.end(), 0);
    } else {
      RngStream schedule_stream(config.seed, StreamPurpose::kScheduling,
                                static_cast<std::uint64_t>(round));
      scheduled = select_clients(config.k_clients, n, schedule_stream);
    }

    const int active = static_cast<int>(scheduled.size());
    std::vector<Eigen::VectorXd> uploads(static_cast<std::size_t>(active));
    try {
      parallel_for(active, config.jobs, [&](int slot) {
        const int client = scheduled[static_cast<std::size_t>(slot)];
        LocalTrainResult local;
        try {
          local = local_train(global, config.loss, shards[static_cast<std::size_t>(client)],
                              config.prox);
        } catch (const DivergenceError& error) {
          throw DivergenceError(error.what(), error.step(), error.round(), client);
        }
        Eigen::VectorXd upload = clip(local.params.values, config.clip_c);
        if (sigma_up > 0.0) {
          RngStream noise_stream(config.seed, StreamPurpose::kUplinkNoise,
                                 static_cast<std::uint64_t>(round),
                                 static_cast<std::uint64_t>(client));
          upload += sample_noise(dim, sigma_up, noise_stream);
        }
        uploads[static_cast<std::size_t>(slot)] = std::move(upload);
      });
    } catch (const DivergenceError& error) {
      std::ostringstream msg;
      msg << "round " << round << ": " << error.what();
      throw DivergenceError(msg.str(), error.step(), round, error.client());
    }
    for (const int client : scheduled) ++upload_counts[static_cast<std::size_t>(client)];

    const std::vector<double> weights(static_cast<std::size_t>(active),
                                      1.0 / static_cast<double>(active));
    Eigen::VectorXd next = aggregate(uploads, weights);
    if (sigma_down > 0.0) {
      RngStream noise_stream(config.seed, StreamPurpose::kDownlinkNoise,
                             static_cast<std::uint64_t>(round));
      next += sample_noise(dim, sigma_down, noise_stream);
    }
    global.values = std::move(next);

    RoundTrace row;
    row.round = round;
    row.scheduled = scheduled;
    row.train_loss = loss(global, config.loss, train_union);
    if (test.size() > 0) {
      row.test_loss = loss(global, config.loss, test);
      row.test_accuracy = accuracy(global, test);
    }
    row.sigma_uplink = sigma_up;
    row.sigma_downlink = sigma_down;
    row.sigma_aggregate = result.calibration.sigma_aggregate;
    row.upload_counts = upload_counts;
    result.trace.push_back(std::move(row));
  }

  result.final_params = std::move(global);
  return result;
}

bool exposure_check(const RunResult& result, int uplink_max) {
  std::vector<int> scheduled_counts;
  if (!result.trace.empty()) {
    scheduled_counts.assign(result.trace.back().upload_counts.size(), 0);
    for (const RoundTrace& row : result.trace) {
      for (const int client : row.scheduled) {
        ++scheduled_counts[static_cast<std::size_t>(client)];
      }
    }
    const std::vector<int>& uploads = result.trace.back().upload_counts;
    for (std::size_t i = 0; i < uploads.size(); ++i) {
      if (uploads[i] > scheduled_counts[i]) return false;
      if (uploads[i] > uplink_max) return false;
    }
  }
  return true;
}

}  // namespace nbafl
