#include "nbafl/model.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace nbafl {
namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajorMatrix>;
using MatMap = Eigen::Map<RowMajorMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

void check_shapes(const ModelParams& params, const LabeledDataset& data) {
  if (params.values.size() != params.arch.param_count()) {
    throw std::invalid_argument("model: parameter vector length does not match architecture");
  }
  if (data.dim() != params.arch.input_dim) {
    throw std::invalid_argument("model: dataset feature dim does not match architecture");
  }
  if (data.classes > params.arch.classes) {
    throw std::invalid_argument("model: dataset has more classes than the architecture");
  }
  if (data.size() < 1) {
    throw std::invalid_argument("model: dataset is empty");
  }
}

// Row-wise softmax cross-entropy on logits; fills dz with
// (softmax - onehot) / n when grad is requested and returns the mean loss.
double softmax_xent(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                    Eigen::MatrixXd* dz) {
  const Eigen::Index n = logits.rows();
  double total = 0.0;
  if (dz != nullptr) dz->resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double peak = logits.row(i).maxCoeff();
    const Eigen::ArrayXd shifted = logits.row(i).array() - peak;
    const Eigen::ArrayXd expz = shifted.exp();
    const double mass = expz.sum();
    total += std::log(mass) - shifted(labels[static_cast<std::size_t>(i)]);
    if (dz != nullptr) {
      dz->row(i) = (expz / mass).matrix().transpose();
      (*dz)(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    }
  }
  if (dz != nullptr) *dz /= static_cast<double>(n);
  return total / static_cast<double>(n);
}

struct LinearSlices {
  ConstMatMap w;
  ConstVecMap b;
};

LinearSlices linear_slices(const Architecture& arch, const Eigen::VectorXd& v) {
  const int c = arch.classes, d = arch.input_dim;
  return {ConstMatMap(v.data(), c, d), ConstVecMap(v.data() + c * d, c)};
}

struct MlpSlices {
  ConstMatMap w1;
  ConstVecMap b1;
  ConstMatMap w2;
  ConstVecMap b2;
};

MlpSlices mlp_slices(const Architecture& arch, const Eigen::VectorXd& v) {
  const int h = arch.hidden_dim, d = arch.input_dim, c = arch.classes;
  const double* p = v.data();
  return {ConstMatMap(p, h, d), ConstVecMap(p + h * d, h),
          ConstMatMap(p + h * d + h, c, h), ConstVecMap(p + h * d + h + c * h, c)};
}

EvalResult evaluate(const ModelParams& params, const LossSpec& spec,
                    const LabeledDataset& data, bool want_gradient) {
  check_shapes(params, data);
  const Architecture& arch = params.arch;
  const Eigen::MatrixXd& x = data.features;
  EvalResult out;
  if (arch.kind == ModelKind::kMultinomialLogistic) {
    const LinearSlices s = linear_slices(arch, params.values);
    Eigen::MatrixXd logits = x * s.w.transpose();
    logits.rowwise() += s.b.transpose();
    Eigen::MatrixXd dz;
    out.loss = softmax_xent(logits, data.labels, want_gradient ? &dz : nullptr);
    if (want_gradient) {
      out.gradient.resize(params.values.size());
      const int c = arch.classes, d = arch.input_dim;
      MatMap gw(out.gradient.data(), c, d);
      VecMap gb(out.gradient.data() + c * d, c);
      gw.noalias() = dz.transpose() * x;
      gb = dz.colwise().sum();
    }
  } else {
    const MlpSlices s = mlp_slices(arch, params.values);
    Eigen::MatrixXd pre = x * s.w1.transpose();
    pre.rowwise() += s.b1.transpose();
    const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
    Eigen::MatrixXd logits = hidden * s.w2.transpose();
    logits.rowwise() += s.b2.transpose();
    Eigen::MatrixXd dz;
    out.loss = softmax_xent(logits, data.labels, want_gradient ? &dz : nullptr);
    if (want_gradient) {
      out.gradient.resize(params.values.size());
      const int h = arch.hidden_dim, d = arch.input_dim, c = arch.classes;
      double* g = out.gradient.data();
      MatMap gw1(g, h, d);
      VecMap gb1(g + h * d, h);
      MatMap gw2(g + h * d + h, c, h);
      VecMap gb2(g + h * d + h + c * h, c);
      gw2.noalias() = dz.transpose() * hidden;
      gb2 = dz.colwise().sum();
      Eigen::MatrixXd dh = dz * s.w2;
      dh = (pre.array() > 0.0).select(dh, 0.0);
      gw1.noalias() = dh.transpose() * x;
      gb1 = dh.colwise().sum();
    }
  }
  if (spec.l2_reg != 0.0) {
    out.loss += spec.l2_reg * params.values.squaredNorm();
    if (want_gradient) out.gradient += 2.0 * spec.l2_reg * params.values;
  }
  return out;
}

}  // namespace

ModelParams init_params(const Architecture& arch, RngStream& stream) {
  if (arch.input_dim < 1 || arch.classes < 2 ||
      (arch.kind == ModelKind::kReluMlp && arch.hidden_dim < 1)) {
    throw std::invalid_argument("init_params: malformed architecture");
  }
  ModelParams params;
  params.arch = arch;
  params.values = Eigen::VectorXd::Zero(arch.param_count());
  const auto fill_glorot = [&stream](double* p, int rows, int cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (int i = 0; i < rows * cols; ++i) {
      p[i] = bound * (2.0 * stream.next_unit() - 1.0);
    }
  };
  if (arch.kind == ModelKind::kMultinomialLogistic) {
    fill_glorot(params.values.data(), arch.classes, arch.input_dim);
  } else {
    const int h = arch.hidden_dim, d = arch.input_dim, c = arch.classes;
    fill_glorot(params.values.data(), h, d);
    fill_glorot(params.values.data() + h * d + h, c, h);
  }
  return params;
}

double loss(const ModelParams& params, const LossSpec& spec, const LabeledDataset& data) {
  return evaluate(params, spec, data, false).loss;
}

Eigen::VectorXd gradient(const ModelParams& params, const LossSpec& spec,
                         const LabeledDataset& data) {
  return std::move(evaluate(params, spec, data, true).gradient);
}

EvalResult loss_and_gradient(const ModelParams& params, const LossSpec& spec,
                             const LabeledDataset& data) {
  return evaluate(params, spec, data, true);
}

double accuracy(const ModelParams& params, const LabeledDataset& data) {
  check_shapes(params, data);
  const Architecture& arch = params.arch;
  Eigen::MatrixXd logits;
  if (arch.kind == ModelKind::kMultinomialLogistic) {
    const LinearSlices s = linear_slices(arch, params.values);
    logits = data.features * s.w.transpose();
    logits.rowwise() += s.b.transpose();
  } else {
    const MlpSlices s = mlp_slices(arch, params.values);
    Eigen::MatrixXd pre = data.features * s.w1.transpose();
    pre.rowwise() += s.b1.transpose();
    logits = pre.cwiseMax(0.0) * s.w2.transpose();
    logits.rowwise() += s.b2.transpose();
  }
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    double best_value = logits(i, 0);
    for (Eigen::Index j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > best_value) {
        best_value = logits(i, j);
        best = static_cast<int>(j);
      }
    }
    if (best == data.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

Eigen::VectorXd clip(const Eigen::VectorXd& values, double clip_c) {
  if (!(clip_c > 0.0)) throw std::invalid_argument("clip: clip_c must be positive");
  const double norm = values.norm();
  // The slack absorbs the rounding of a just-clipped vector's recomputed
  // norm, so reapplying the projection reproduces the input exactly.
  if (norm <= clip_c * (1.0 + 8.0 * std::numeric_limits<double>::epsilon())) {
    return values;
  }
  return values * (clip_c / norm);
}

Objective dataset_objective(const Architecture& arch, const LossSpec& spec,
                            const LabeledDataset& data) {
  const auto owned = std::make_shared<const LabeledDataset>(data);
  return Objective{
      [arch, spec, owned](const Eigen::VectorXd& v) {
        return loss(ModelParams{arch, v}, spec, *owned);
      },
      [arch, spec, owned](const Eigen::VectorXd& v) {
        return gradient(ModelParams{arch, v}, spec, *owned);
      },
      [arch, spec, owned](const Eigen::VectorXd& v) {
        EvalResult eval = loss_and_gradient(ModelParams{arch, v}, spec, *owned);
        return std::make_pair(eval.loss, std::move(eval.gradient));
      },
  };
}

}  // namespace nbafl
