#pragma once

#include <cstdint>
#include <vector>

#include "nbafl/data.hpp"
#include "nbafl/model.hpp"
#include "nbafl/privacy.hpp"
#include "nbafl/train.hpp"

namespace nbafl {

// Complete description of one federated run.
struct FLConfig {
  int n_clients = 0;
  ScheduleMode schedule = ScheduleMode::kAllClients;
  int k_clients = 0;          // only read under k-client scheduling
  int rounds = 0;             // T
  double epsilon = 0.0;
  double delta = 0.0;
  double clip_c = 0.0;
  int shard_size = 0;         // m
  int uplink_exposures = 0;   // L, the declared adversarial uplink budget
  ModelKind model = ModelKind::kMultinomialLogistic;
  int mlp_hidden = 256;
  LossSpec loss;
  ProximalConfig prox;
  std::uint64_t seed = 0;
  bool noiseless = false;     // forces both noise scales to zero
  int jobs = 1;               // client-level worker threads per round
};

// Per-round record of everything the CSV trace and the evaluators need.
struct RoundTrace {
  int round = 0;              // 1-based
  std::vector<int> scheduled;
  double train_loss = 0.0;    // mean loss over all client shards
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double sigma_uplink = 0.0;
  double sigma_downlink = 0.0;
  double sigma_aggregate = 0.0;
  std::vector<int> upload_counts;  // cumulative per-client uploads so far
};

struct RunResult {
  FLConfig config;
  NoiseCalibration calibration;
  std::vector<RoundTrace> trace;
  ModelParams final_params;   // the last broadcast model
};

// Draws K distinct clients uniformly from [0, n); returned sorted ascending.
std::vector<int> select_clients(int k, int n, RngStream& stream);

// Weighted sum of client parameter vectors; weights must sum to ~1.
Eigen::VectorXd aggregate(const std::vector<Eigen::VectorXd>& uploads,
                          const std::vector<double>& weights);

// Runs the full protocol: partition, calibrate, then T rounds of local
// proximal training, clipping, client-side noising, aggregation, and
// server-side noising.  Calibration domain errors surface before round 1;
// DivergenceError is rethrown with the failing round and client attached.
RunResult run_nbafl(const FLConfig& config, const LabeledDataset& train,
                    const LabeledDataset& test);

// True iff no client uploaded more often than the declared exposure budget
// permits: per-client uploads never exceed scheduled rounds, and the maximum
// upload count is at most uplink_max.
bool exposure_check(const RunResult& result, int uplink_max);

}  // namespace nbafl
