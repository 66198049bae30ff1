#pragma once

#include <Eigen/Core>

#include "nbafl/data.hpp"
#include "nbafl/errors.hpp"
#include "nbafl/model.hpp"
#include "nbafl/objective.hpp"

namespace nbafl {

// Inner-solver settings for the proximal local objective
// G(w) = F(w) + (mu/2) * ||w - anchor||^2.
struct ProximalConfig {
  double mu = 0.0;
  int inner_steps = 30;
  double learning_rate = 0.002;
};

struct SolveResult {
  Eigen::VectorXd point;
  double objective = 0.0;       // G at the returned point
  double residual_norm = 0.0;   // ||grad G|| at the returned point
};

// Full-batch gradient descent on the proximal objective, starting from the
// anchor.  Throws DivergenceError if the objective increases on three
// consecutive steps.
SolveResult proximal_solve(const Objective& objective, const Eigen::VectorXd& anchor,
                           const ProximalConfig& config);

// One client's local update: proximal_solve on its shard loss anchored at
// the broadcast parameters.
struct LocalTrainResult {
  ModelParams params;
  double objective = 0.0;
  double residual_norm = 0.0;
};
LocalTrainResult local_train(const ModelParams& anchor, const LossSpec& spec,
                             const LabeledDataset& shard, const ProximalConfig& config);

}  // namespace nbafl
