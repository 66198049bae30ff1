#include "nbafl/data.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nbafl {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw IoError("truncated file: " + path);
  }
  return (static_cast<std::uint32_t>(bytes[0]) << 24) |
         (static_cast<std::uint32_t>(bytes[1]) << 16) |
         (static_cast<std::uint32_t>(bytes[2]) << 8) |
         static_cast<std::uint32_t>(bytes[3]);
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  return in;
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream images = open_binary(images_path);
  const std::uint32_t image_magic = read_u32_be(images, images_path);
  if (image_magic != kImageMagic) {
    std::ostringstream msg;
    msg << "bad image magic in " << images_path << ": got " << image_magic;
    throw FormatError(msg.str());
  }
  const std::uint32_t n_images = read_u32_be(images, images_path);
  const std::uint32_t rows = read_u32_be(images, images_path);
  const std::uint32_t cols = read_u32_be(images, images_path);

  std::ifstream labels = open_binary(labels_path);
  const std::uint32_t label_magic = read_u32_be(labels, labels_path);
  if (label_magic != kLabelMagic) {
    std::ostringstream msg;
    msg << "bad label magic in " << labels_path << ": got " << label_magic;
    throw FormatError(msg.str());
  }
  const std::uint32_t n_labels = read_u32_be(labels, labels_path);
  if (n_images != n_labels) {
    std::ostringstream msg;
    msg << "image/label count mismatch: " << n_images << " vs " << n_labels;
    throw FormatError(msg.str());
  }

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  LabeledDataset data;
  data.features.resize(n_images, static_cast<Eigen::Index>(pixels));
  data.labels.resize(n_images);
  std::vector<unsigned char> buffer(pixels);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!images.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(pixels))) {
      throw IoError("truncated file: " + images_path);
    }
    for (std::size_t p = 0; p < pixels; ++p) {
      data.features(i, static_cast<Eigen::Index>(p)) = buffer[p] / 255.0;
    }
  }
  std::vector<unsigned char> raw_labels(n_labels);
  if (n_labels > 0 &&
      !labels.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(n_labels))) {
    throw IoError("truncated file: " + labels_path);
  }
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    data.labels[i] = raw_labels[i];
    max_label = std::max(max_label, data.labels[i]);
  }
  data.classes = max_label + 1;
  return data;
}

LabeledDataset synth_classification(int n, int dim, int classes, double margin,
                                    RngStream& stream) {
  if (n < 1 || dim < 1 || classes < 2) {
    throw std::invalid_argument("synth_classification: need n >= 1, dim >= 1, classes >= 2");
  }
  if (margin < 0.0) throw std::invalid_argument("synth_classification: margin must be >= 0");
  Eigen::MatrixXd means(classes, dim);
  for (int k = 0; k < classes; ++k) {
    for (int j = 0; j < dim; ++j) means(k, j) = stream.next_gaussian();
    const double norm = means.row(k).norm();
    if (norm > 0.0) means.row(k) *= margin / norm;
  }
  LabeledDataset data;
  data.classes = classes;
  data.features.resize(n, dim);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int label = i % classes;
    data.labels[i] = label;
    for (int j = 0; j < dim; ++j) {
      data.features(i, j) = means(label, j) + stream.next_gaussian();
    }
  }
  return data;
}

Partition partition_iid(const LabeledDataset& data, int n_clients, int shard_size,
                        RngStream& stream) {
  if (n_clients < 1 || shard_size < 1) {
    throw std::invalid_argument("partition_iid: need n_clients >= 1 and shard_size >= 1");
  }
  const std::int64_t needed = static_cast<std::int64_t>(n_clients) * shard_size;
  if (needed > data.size()) {
    std::ostringstream msg;
    msg << "partition_iid: dataset has " << data.size() << " samples but "
        << n_clients << " x " << shard_size << " = " << needed << " are required";
    throw std::invalid_argument(msg.str());
  }
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates driven by the stream keeps the permutation reproducible.
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(stream.next_below(i + 1));
    std::swap(order[i], order[j]);
  }
  Partition part;
  part.shard_size = shard_size;
  part.shards.resize(n_clients);
  int cursor = 0;
  for (int c = 0; c < n_clients; ++c) {
    part.shards[c].assign(order.begin() + cursor, order.begin() + cursor + shard_size);
    cursor += shard_size;
  }
  return part;
}

LabeledDataset gather(const LabeledDataset& data, const std::vector<int>& indices) {
  LabeledDataset out;
  out.classes = data.classes;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), data.features.cols());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(indices[i]);
    out.labels[i] = data.labels[indices[i]];
  }
  return out;
}

}  // namespace nbafl
