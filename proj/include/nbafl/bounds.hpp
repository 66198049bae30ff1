#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nbafl/errors.hpp"
#include "nbafl/objective.hpp"
#include "nbafl/rng.hpp"

namespace nbafl {

// Empirical regularity constants of a training task: smoothness rho,
// gradient bound beta, quadratic-growth rate l (the Polyak-Lojasiewicz
// constant), gradient-divergence amplification B, and the initial
// optimality gap Theta.  divergence holds the per-client gradient
// divergence estimates the B computation used.
struct LossRegularity {
  double rho = 0.0;
  double beta = 0.0;
  double l = 0.0;
  double B = 1.0;
  double Theta = 0.0;
  std::vector<double> divergence;
};

struct RegularityOptions {
  int descent_steps = 300;       // probed trajectory length
  int refine_steps = 3000;       // extra descent to pin the optimal value
  double learning_rate = 0.05;
  double jitter_scale = 0.1;     // probe displacement relative to ||w||
  double gap_floor = 1e-10;      // trajectory points closer to optimal are skipped
  double grad_floor = 1e-12;     // probes with smaller ||grad|| are skipped
};

// Estimates LossRegularity by running noiseless gradient descent from w0,
// then measuring rho/beta/B on jittered probe points along the trajectory
// and l on the trajectory itself.  locals supplies per-client objectives
// for the divergence estimate; it may be empty, in which case B = 1.
LossRegularity estimate_regularity(const Objective& global,
                                   const std::vector<Objective>& locals,
                                   const Eigen::VectorXd& w0, int probes,
                                   RngStream& stream,
                                   const RegularityOptions& options = {});

// Per-round expected-gap increment coefficients from (mu, rho, B); requires
// mu > rho.  grad_sq < 0 is the contraction regime.
struct IncrementCoeffs {
  double noise_sq = 0.0;    // multiplies E||noise||^2
  double noise_grad = 0.0;  // multiplies ||grad|| * E||noise||
  double grad_sq = 0.0;     // multiplies ||grad||^2
};
IncrementCoeffs increment_coeffs(double mu, double rho, double B);

// One-round bound on the next optimality gap increment.
double increment_bound(double grad_norm, double noise_mean, double noise_sq_mean,
                       const IncrementCoeffs& coeffs);

// (E||n||, E||n||^2) for an isotropic Gaussian with per-coordinate sigma in
// n_dim_eff dimensions, using the l1-based surrogate E||n|| = sigma *
// sqrt(2 * n_dim_eff / pi) that the convergence analysis assumes.
std::pair<double, double> noise_norm_moments(double sigma, int n_dim_eff);

// Inputs shared by the closed-form convergence evaluators.
struct BoundParams {
  int rounds = 0;        // T
  double epsilon = 0.0;
  double delta = 0.0;
  int n_clients = 0;     // N
  int shard_size = 0;    // m
  double mu = 0.0;
  LossRegularity reg;
};

// Closed-form upper bound on the optimality gap after T rounds of the
// all-clients protocol, with the noise constants in their published unit-
// sensitivity form (numerator sensitivity 1/(mN)).  Throws std::domain_error
// outside the contraction regime (needs 0 < 1 + 2*l*grad_sq < 1).
double convergence_bound_all(const BoundParams& params);

// Same bound with the sensitivity spelled out as 2*clip_c/(m*N) and the
// noise-vector dimension configurable; n_dim_eff < 0 selects the published
// convention of using N.  This is the form a simulated run is compared to.
double convergence_bound_all_general(const BoundParams& params, double clip_c,
                                     int n_dim_eff = -1);

// K-client-scheduling variant of BoundParams.
struct KBoundParams {
  int rounds = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  int n_clients = 0;
  int k_clients = 0;
  int shard_size = 0;
  double mu = 0.0;
  LossRegularity reg;
};

// Gap coefficients for the k-client-scheduling bound.
struct KschedGapCoeffs {
  double noise_sq = 0.0;    // alpha_0
  double noise_grad = 0.0;  // alpha_1
  double grad_sq = 0.0;     // alpha_2
  double contraction = 0.0; // Q = 1 + 2*l*alpha_2
};
KschedGapCoeffs ksched_gap_coeffs(const KBoundParams& params);

// Closed-form upper bound under k-client scheduling.  Throws
// ScheduleDomainError (with the minimal admissible T) when the composition
// log has no solution, and std::domain_error outside the contraction regime.
double convergence_bound_ksched(const KBoundParams& params);

// Scan of a bound over an integer grid.  Points where the bound is undefined
// carry has_value = false and a flag describing why.
struct GridPoint {
  int x = 0;
  bool has_value = false;
  double value = 0.0;
  std::string flag;
};
struct GridScan {
  std::vector<GridPoint> points;
  int best = -1;         // index of the smallest defined value, -1 if none
  bool convex = false;   // second differences nonnegative over the defined run
};

// Evaluates bound(x) over the grid; bound may throw domain errors, which are
// recorded as flags.  Throws std::domain_error when every point is undefined.
GridScan scan_bound(const std::function<double(int)>& bound, const std::vector<int>& grid);

}  // namespace nbafl
