#include "nbafl/train.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace nbafl {
namespace {

void check_config(const ProximalConfig& config) {
  if (config.mu < 0.0) throw std::invalid_argument("proximal_solve: mu must be >= 0");
  if (config.inner_steps < 1) throw std::invalid_argument("proximal_solve: inner_steps must be >= 1");
  if (!(config.learning_rate > 0.0)) {
    throw std::invalid_argument("proximal_solve: learning_rate must be positive");
  }
}

}  // namespace

SolveResult proximal_solve(const Objective& objective, const Eigen::VectorXd& anchor,
                           const ProximalConfig& config) {
  check_config(config);
  Eigen::VectorXd w = anchor;
  double previous = std::numeric_limits<double>::infinity();
  int rising_streak = 0;
  for (int step = 0; step < config.inner_steps; ++step) {
    auto [value, grad] = evaluate_fused(objective, w);
    const double proximal_value = value + 0.5 * config.mu * (w - anchor).squaredNorm();
    // Relative slack so rounding jitter at the convergence floor does not
    // read as a rise; genuine divergence grows by orders of magnitude.
    const double slack = 1e-12 * std::max(1.0, std::abs(previous));
    if (proximal_value > previous + slack) {
      if (++rising_streak >= 3) {
        std::ostringstream msg;
        msg << "inner solver diverged at step " << step
            << " (objective rose three steps in a row)";
        throw DivergenceError(msg.str(), step);
      }
    } else {
      rising_streak = 0;
    }
    previous = proximal_value;
    grad += config.mu * (w - anchor);
    w -= config.learning_rate * grad;
  }
  SolveResult out;
  auto [value, grad] = evaluate_fused(objective, w);
  grad += config.mu * (w - anchor);
  out.objective = value + 0.5 * config.mu * (w - anchor).squaredNorm();
  out.residual_norm = grad.norm();
  out.point = std::move(w);
  return out;
}

LocalTrainResult local_train(const ModelParams& anchor, const LossSpec& spec,
                             const LabeledDataset& shard, const ProximalConfig& config) {
  const Objective objective = dataset_objective(anchor.arch, spec, shard);
  SolveResult solved = proximal_solve(objective, anchor.values, config);
  LocalTrainResult out;
  out.objective = solved.objective;
  out.residual_norm = solved.residual_norm;
  out.params = ModelParams{anchor.arch, std::move(solved.point)};
  return out;
}

}  // namespace nbafl
