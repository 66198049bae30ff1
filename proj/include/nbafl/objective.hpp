#pragma once

#include <Eigen/Core>
#include <functional>
#include <utility>

namespace nbafl {

// A differentiable objective over a flat parameter vector.  Used by the
// proximal inner solver and by the regularity estimator so both work on
// model losses and on hand-built analytic objectives alike.  The fused
// member is optional; when present it must agree with value/gradient and
// lets the solver pay one forward pass per step instead of two.
struct Objective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd&)> fused;
};

inline std::pair<double, Eigen::VectorXd> evaluate_fused(const Objective& objective,
                                                         const Eigen::VectorXd& w) {
  if (objective.fused) return objective.fused(w);
  return {objective.value(w), objective.gradient(w)};
}

}  // namespace nbafl
