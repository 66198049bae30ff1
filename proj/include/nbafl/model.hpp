#pragma once

#include <Eigen/Core>

#include "nbafl/data.hpp"
#include "nbafl/objective.hpp"
#include "nbafl/rng.hpp"

namespace nbafl {

enum class ModelKind { kMultinomialLogistic, kReluMlp };

// Static shape of a classifier; hidden_dim is 0 for the linear model.
struct Architecture {
  ModelKind kind = ModelKind::kMultinomialLogistic;
  int input_dim = 0;
  int hidden_dim = 0;
  int classes = 0;

  int param_count() const {
    if (kind == ModelKind::kReluMlp) {
      return hidden_dim * (input_dim + 1) + classes * (hidden_dim + 1);
    }
    return classes * (input_dim + 1);
  }
};

// Loss definition: softmax cross-entropy plus l2_reg * ||w||^2 over every
// parameter including biases (the ridge term is what makes the objective
// strongly convex for the linear model).
struct LossSpec {
  double l2_reg = 0.0;
};

// Flat parameter vector.  Layout is layer-major with each weight matrix
// stored row-major and its bias vector immediately after it:
//   linear: [W (classes x input), b (classes)]
//   mlp:    [W1 (hidden x input), b1 (hidden), W2 (classes x hidden), b2 (classes)]
struct ModelParams {
  Architecture arch;
  Eigen::VectorXd values;
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))) drawn from the stream
// in storage order; biases are zero and consume no draws.
ModelParams init_params(const Architecture& arch, RngStream& stream);

// Mean softmax cross-entropy plus the ridge term over the dataset.
double loss(const ModelParams& params, const LossSpec& spec, const LabeledDataset& data);

// Exact gradient of loss in the flat layout.
Eigen::VectorXd gradient(const ModelParams& params, const LossSpec& spec,
                         const LabeledDataset& data);

// One fused forward/backward pass; cheaper than calling loss and gradient
// separately inside the inner solver.
struct EvalResult {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};
EvalResult loss_and_gradient(const ModelParams& params, const LossSpec& spec,
                             const LabeledDataset& data);

// Fraction of samples whose highest logit matches the label; ties resolve to
// the lowest class index.
double accuracy(const ModelParams& params, const LabeledDataset& data);

// Projects onto the l2 ball of radius clip_c: w * min(1, clip_c/||w||).
// Norms within rounding of the radius count as inside, which makes the
// projection idempotent bit-for-bit.
Eigen::VectorXd clip(const Eigen::VectorXd& values, double clip_c);

// loss/gradient closures over a fixed dataset, for the solver and the
// regularity estimator.  The closures share one owned copy of the dataset,
// so the argument may be a temporary.
Objective dataset_objective(const Architecture& arch, const LossSpec& spec,
                            const LabeledDataset& data);

}  // namespace nbafl
