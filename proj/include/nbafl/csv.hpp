#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nbafl/bounds.hpp"
#include "nbafl/federated.hpp"

namespace nbafl {

// Formats a real with 17 significant digits (lossless double round trip).
std::string format_real17(double value);

// Writes content to path atomically: a temp file in the same directory is
// renamed over the target, so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

// Per-round trace CSV; header is fixed:
// round,train_loss,test_loss,test_acc,sigma_uplink,sigma_downlink,sigma_aggregate,scheduled_k,seed
std::string render_trace_csv(const RunResult& result);

// Bound profile CSV with columns <axis>,bound_value,regime_flags where axis
// is "T" or "K"; undefined points carry an empty value and their flag.
std::string render_profile_csv(const GridScan& scan, const std::string& axis);

// One sweep cell: the varied key, its value for this cell, and the run's
// final-round metrics.
struct SweepCell {
  std::string variable;
  std::string value;
  std::uint64_t seed = 0;
  double final_train_loss = 0.0;
  double final_test_acc = 0.0;
};

// Raw sweep CSV: variable,value,seed,final_train_loss,final_test_acc.
std::string render_sweep_csv(const std::vector<SweepCell>& cells);

// Seed-averaged summary grouped by value in first-appearance order:
// variable,value,mean_final_train_loss,se_final_train_loss,
// mean_final_test_acc,se_final_test_acc,n_seeds.
std::string render_sweep_summary_csv(const std::vector<SweepCell>& cells);

}  // namespace nbafl
