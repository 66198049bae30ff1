#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "nbafl/errors.hpp"
#include "nbafl/rng.hpp"

namespace nbafl {

// Dense feature matrix (one row per sample, values in [0, 1] for image data)
// with integer class labels in [0, classes).
struct LabeledDataset {
  Eigen::MatrixXd features;  // n x d
  std::vector<int> labels;   // n
  int classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

// Equal-size client shards given as index lists into the source dataset;
// samples beyond n_clients * shard_size are discarded.
struct Partition {
  std::vector<std::vector<int>> shards;
  int shard_size = 0;
};

// Reads an IDX image/label file pair (big-endian headers, one byte per pixel
// scaled to [0, 1]).  Throws IoError on open/truncation failures and
// FormatError on magic or count mismatches.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Gaussian class clusters: unit-direction class means scaled by margin, unit
// isotropic within-class noise, labels assigned round-robin.  Deterministic
// given the stream.
LabeledDataset synth_classification(int n, int dim, int classes, double margin,
                                    RngStream& stream);

// Draws a uniform permutation and cuts it into n_clients shards of exactly
// shard_size samples each.  Throws std::invalid_argument when the dataset is
// too small.
Partition partition_iid(const LabeledDataset& data, int n_clients, int shard_size,
                        RngStream& stream);

// Materializes the subset of data selected by indices.
LabeledDataset gather(const LabeledDataset& data, const std::vector<int>& indices);

}  // namespace nbafl
