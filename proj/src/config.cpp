#include "nbafl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nbafl {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' needs an integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' needs an unsigned integer, got '" +
                                value + "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' needs a real, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: key '" + key + "' needs true/false, got '" + value + "'");
}

std::string format_real(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace

RunConfigFile parse_config_text(const std::string& text) {
  RunConfigFile config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << "config: line " << line_no << " is not key=value: '" << line << "'";
      throw std::invalid_argument(msg.str());
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    }
    set_config_key(config, key, value);
  }
  return config;
}

void set_config_key(RunConfigFile& config, const std::string& key, const std::string& value) {
  if (key == "n_clients") config.n_clients = parse_int(key, value);
  else if (key == "schedule") config.schedule = value;
  else if (key == "k_clients") config.k_clients = parse_int(key, value);
  else if (key == "rounds") config.rounds = parse_int(key, value);
  else if (key == "epsilon") config.epsilon = parse_real(key, value);
  else if (key == "delta") config.delta = parse_real(key, value);
  else if (key == "clip_c") config.clip_c = parse_real(key, value);
  else if (key == "mu") config.mu = parse_real(key, value);
  else if (key == "shard_size") config.shard_size = parse_int(key, value);
  else if (key == "uplink_exposures") config.uplink_exposures = parse_int(key, value);
  else if (key == "dataset") config.dataset = value;
  else if (key == "mnist_images") config.mnist_images = value;
  else if (key == "mnist_labels") config.mnist_labels = value;
  else if (key == "mnist_test_images") config.mnist_test_images = value;
  else if (key == "mnist_test_labels") config.mnist_test_labels = value;
  else if (key == "synth_n") config.synth_n = parse_int(key, value);
  else if (key == "synth_d") config.synth_d = parse_int(key, value);
  else if (key == "synth_classes") config.synth_classes = parse_int(key, value);
  else if (key == "synth_margin") config.synth_margin = parse_real(key, value);
  else if (key == "model") config.model = value;
  else if (key == "l2_reg") config.l2_reg = parse_real(key, value);
  else if (key == "inner_steps") config.inner_steps = parse_int(key, value);
  else if (key == "learning_rate") config.learning_rate = parse_real(key, value);
  else if (key == "seed") config.seed = parse_u64(key, value);
  else if (key == "noiseless") config.noiseless = parse_bool(key, value);
  else if (key == "out_dir") config.out_dir = value;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string serialize_config(const RunConfigFile& config) {
  std::ostringstream out;
  out << "n_clients=" << config.n_clients << '\n';
  out << "schedule=" << config.schedule << '\n';
  out << "k_clients=" << config.k_clients << '\n';
  out << "rounds=" << config.rounds << '\n';
  out << "epsilon=" << format_real(config.epsilon) << '\n';
  out << "delta=" << format_real(config.delta) << '\n';
  out << "clip_c=" << format_real(config.clip_c) << '\n';
  out << "mu=" << format_real(config.mu) << '\n';
  out << "shard_size=" << config.shard_size << '\n';
  out << "uplink_exposures=" << config.uplink_exposures << '\n';
  out << "dataset=" << config.dataset << '\n';
  out << "mnist_images=" << config.mnist_images << '\n';
  out << "mnist_labels=" << config.mnist_labels << '\n';
  out << "mnist_test_images=" << config.mnist_test_images << '\n';
  out << "mnist_test_labels=" << config.mnist_test_labels << '\n';
  out << "synth_n=" << config.synth_n << '\n';
  out << "synth_d=" << config.synth_d << '\n';
  out << "synth_classes=" << config.synth_classes << '\n';
  out << "synth_margin=" << format_real(config.synth_margin) << '\n';
  out << "model=" << config.model << '\n';
  out << "l2_reg=" << format_real(config.l2_reg) << '\n';
  out << "inner_steps=" << config.inner_steps << '\n';
  out << "learning_rate=" << format_real(config.learning_rate) << '\n';
  out << "seed=" << config.seed << '\n';
  out << "noiseless=" << (config.noiseless ? "true" : "false") << '\n';
  out << "out_dir=" << config.out_dir << '\n';
  return out.str();
}

FLConfig to_fl_config(const RunConfigFile& config) {
  FLConfig fl;
  fl.n_clients = config.n_clients;
  if (config.schedule == "all") {
    fl.schedule = ScheduleMode::kAllClients;
  } else if (config.schedule == "krandom") {
    fl.schedule = ScheduleMode::kKRandom;
  } else {
    throw std::invalid_argument("config: schedule must be 'all' or 'krandom', got '" +
                                config.schedule + "'");
  }
  fl.k_clients = config.k_clients;
  fl.rounds = config.rounds;
  fl.epsilon = config.epsilon;
  fl.delta = config.delta;
  fl.clip_c = config.clip_c;
  fl.shard_size = config.shard_size;
  fl.uplink_exposures = config.uplink_exposures;
  if (config.model == "logistic") {
    fl.model = ModelKind::kMultinomialLogistic;
  } else if (config.model == "mlp256") {
    fl.model = ModelKind::kReluMlp;
    fl.mlp_hidden = 256;
  } else {
    throw std::invalid_argument("config: model must be 'logistic' or 'mlp256', got '" +
                                config.model + "'");
  }
  fl.loss.l2_reg = config.l2_reg;
  fl.prox.mu = config.mu;
  fl.prox.inner_steps = config.inner_steps;
  fl.prox.learning_rate = config.learning_rate;
  fl.seed = config.seed;
  fl.noiseless = config.noiseless;
  if (config.dataset != "mnist" && config.dataset != "synthetic") {
    throw std::invalid_argument("config: dataset must be 'mnist' or 'synthetic', got '" +
                                config.dataset + "'");
  }
  if (config.dataset == "synthetic" &&
      (config.synth_n < 1 || config.synth_d < 1 || config.synth_classes < 2)) {
    throw std::invalid_argument(
        "config: synthetic dataset needs synth_n >= 1, synth_d >= 1, synth_classes >= 2");
  }
  return fl;
}

MnistPaths resolve_mnist_paths(const RunConfigFile& config, const std::string& data_dir) {
  const auto resolve = [&data_dir](const std::string& given, const char* fallback) {
    if (!given.empty()) return given;
    if (data_dir.empty()) {
      throw std::invalid_argument(
          std::string("config: mnist path for ") + fallback +
          " is unset and no data directory is configured (set the key or NBAFL_DATA_DIR)");
    }
    return data_dir + "/" + fallback;
  };
  MnistPaths paths;
  paths.train_images = resolve(config.mnist_images, "train-images-idx3-ubyte");
  paths.train_labels = resolve(config.mnist_labels, "train-labels-idx1-ubyte");
  paths.test_images = resolve(config.mnist_test_images, "t10k-images-idx3-ubyte");
  paths.test_labels = resolve(config.mnist_test_labels, "t10k-labels-idx1-ubyte");
  return paths;
}

}  // namespace nbafl
