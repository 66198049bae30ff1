#pragma once

#include <cstdint>
#include <string>

#include "nbafl/federated.hpp"

namespace nbafl {

// Flat key=value run configuration exactly as stored on disk.  String-valued
// selectors stay strings here; to_fl_config resolves them into enums and
// validates cross-field constraints.
struct RunConfigFile {
  int n_clients = 0;
  std::string schedule = "all";      // all | krandom
  int k_clients = 0;
  int rounds = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double clip_c = 0.0;
  double mu = 0.0;
  int shard_size = 0;
  int uplink_exposures = 1;
  std::string dataset = "synthetic";  // mnist | synthetic
  std::string mnist_images;
  std::string mnist_labels;
  std::string mnist_test_images;
  std::string mnist_test_labels;
  int synth_n = 0;
  int synth_d = 0;
  int synth_classes = 0;
  double synth_margin = 0.0;
  std::string model = "logistic";     // logistic | mlp256
  double l2_reg = 0.0;
  int inner_steps = 30;               // calibration choice, not dictated by the protocol
  double learning_rate = 0.002;
  std::uint64_t seed = 0;
  bool noiseless = false;
  std::string out_dir = ".";

  bool operator==(const RunConfigFile&) const = default;
};

// Parses key=value lines ('#' starts a comment, blank lines ignored).
// Unknown keys, duplicate keys, and malformed values raise
// std::invalid_argument.
RunConfigFile parse_config_text(const std::string& text);

// Assigns one key from its textual value; same validation as the parser.
void set_config_key(RunConfigFile& config, const std::string& key, const std::string& value);

// Reads and parses a config file; IoError on open failure.
RunConfigFile load_config(const std::string& path);

// Emits every key in a fixed order; reals carry 17 significant digits so a
// parse -> serialize -> parse round trip is the identity.
std::string serialize_config(const RunConfigFile& config);

// Cross-field validation plus conversion into the orchestrator's config.
// data_dir supplies default MNIST paths when the mnist_* keys are empty.
FLConfig to_fl_config(const RunConfigFile& config);

// Resolves the four MNIST paths, filling empty ones with the conventional
// file names under data_dir; throws std::invalid_argument when a path is
// empty and data_dir is too.
struct MnistPaths {
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
};
MnistPaths resolve_mnist_paths(const RunConfigFile& config, const std::string& data_dir);

}  // namespace nbafl
