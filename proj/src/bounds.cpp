#include "nbafl/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "nbafl/privacy.hpp"

namespace nbafl {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void check_contraction(double p, const char* name) {
  if (!(p > 0.0 && p < 1.0)) {
    std::ostringstream msg;
    msg << name << ": contraction factor " << p
        << " is outside (0, 1); the bound needs the descent regime (negative "
           "gradient-squared coefficient, mu large enough)";
    throw std::domain_error(msg.str());
  }
}

double geometric_weight(double p, int t) {
  // (1 - p^T) with p in (0, 1).
  return 1.0 - std::pow(p, t);
}

}  // namespace

LossRegularity estimate_regularity(const Objective& global,
                                   const std::vector<Objective>& locals,
                                   const Eigen::VectorXd& w0, int probes,
                                   RngStream& stream,
                                   const RegularityOptions& options) {
  if (probes < 2) throw std::invalid_argument("estimate_regularity: need at least 2 probes");
  if (options.descent_steps < 1 || options.refine_steps < 0) {
    throw std::invalid_argument("estimate_regularity: malformed step counts");
  }

  // Noiseless descent trajectory; every visited point keeps its value and
  // gradient norm for the growth-rate estimate.
  std::vector<Eigen::VectorXd> trajectory;
  trajectory.reserve(static_cast<std::size_t>(options.descent_steps) + 1);
  std::vector<double> values;
  std::vector<double> grad_norms;
  Eigen::VectorXd w = w0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= options.descent_steps; ++step) {
    auto [value, grad] = evaluate_fused(global, w);
    trajectory.push_back(w);
    values.push_back(value);
    grad_norms.push_back(grad.norm());
    best_value = std::min(best_value, value);
    w -= options.learning_rate * grad;
  }
  for (int step = 0; step < options.refine_steps; ++step) {
    auto [value, grad] = evaluate_fused(global, w);
    best_value = std::min(best_value, value);
    w -= options.learning_rate * grad;
  }
  best_value = std::min(best_value, global.value(w));

  LossRegularity reg;
  reg.Theta = values.front() - best_value;

  double l_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double gap = values[i] - best_value;
    if (gap < options.gap_floor) continue;
    l_min = std::min(l_min, grad_norms[i] * grad_norms[i] / (2.0 * gap));
  }
  if (!std::isfinite(l_min)) {
    throw std::domain_error(
        "estimate_regularity: every trajectory point sits at the optimum; "
        "cannot estimate the growth rate");
  }
  reg.l = l_min;

  // Probe points: trajectory points spread evenly, displaced by Gaussian
  // jitter proportional to their norm.
  std::vector<Eigen::VectorXd> probe_points;
  std::vector<Eigen::VectorXd> probe_grads;
  probe_points.reserve(static_cast<std::size_t>(probes));
  probe_grads.reserve(static_cast<std::size_t>(probes));
  const Eigen::Index dim = w0.size();
  for (int p = 0; p < probes; ++p) {
    const std::size_t idx =
        (static_cast<std::size_t>(p) * trajectory.size()) / static_cast<std::size_t>(probes);
    const Eigen::VectorXd& base = trajectory[idx];
    const double scale =
        options.jitter_scale * (base.norm() > 0.0 ? base.norm() : 1.0);
    Eigen::VectorXd point = base;
    for (Eigen::Index j = 0; j < dim; ++j) point[j] += scale * stream.next_gaussian();
    probe_grads.push_back(global.gradient(point));
    probe_points.push_back(std::move(point));
  }

  double beta = 0.0;
  for (const Eigen::VectorXd& g : probe_grads) beta = std::max(beta, g.norm());
  reg.beta = beta;

  double rho = 0.0;
  for (std::size_t a = 0; a < probe_points.size(); ++a) {
    for (std::size_t b = a + 1; b < probe_points.size(); ++b) {
      const double dist = (probe_points[a] - probe_points[b]).norm();
      if (dist < 1e-12) continue;
      rho = std::max(rho, (probe_grads[a] - probe_grads[b]).norm() / dist);
    }
  }
  reg.rho = rho;

  reg.B = 1.0;
  if (!locals.empty()) {
    reg.divergence.assign(locals.size(), 0.0);
    int usable = 0;
    double b_max = 1.0;
    for (std::size_t p = 0; p < probe_points.size(); ++p) {
      const double g_norm = probe_grads[p].norm();
      if (g_norm < options.grad_floor) continue;
      ++usable;
      double mean_sq = 0.0;
      for (std::size_t i = 0; i < locals.size(); ++i) {
        const double eps_i = (locals[i].gradient(probe_points[p]) - probe_grads[p]).norm();
        reg.divergence[i] = std::max(reg.divergence[i], eps_i);
        mean_sq += eps_i * eps_i;
      }
      mean_sq /= static_cast<double>(locals.size());
      b_max = std::max(b_max, std::sqrt(1.0 + mean_sq / (g_norm * g_norm)));
    }
    if (usable == 0) {
      throw std::domain_error(
          "estimate_regularity: every probe has a degenerate gradient; cannot "
          "estimate the dissimilarity bound");
    }
    reg.B = b_max;
  }
  return reg;
}

IncrementCoeffs increment_coeffs(double mu, double rho, double B) {
  if (!(rho > 0.0)) throw std::invalid_argument("increment_coeffs: rho must be positive");
  if (B < 1.0) throw std::invalid_argument("increment_coeffs: B must be >= 1");
  if (!(mu > rho)) {
    throw std::domain_error("increment_coeffs: mu must exceed rho");
  }
  IncrementCoeffs out;
  out.noise_sq = rho / 2.0;
  out.noise_grad = 1.0 / mu + rho * B / mu;
  out.grad_sq = -1.0 / mu + rho * B / (mu * mu) + rho * B * B / (2.0 * mu * mu);
  return out;
}

double increment_bound(double grad_norm, double noise_mean, double noise_sq_mean,
                       const IncrementCoeffs& coeffs) {
  return coeffs.grad_sq * grad_norm * grad_norm +
         coeffs.noise_grad * noise_mean * grad_norm + coeffs.noise_sq * noise_sq_mean;
}

std::pair<double, double> noise_norm_moments(double sigma, int n_dim_eff) {
  if (sigma < 0.0) throw std::invalid_argument("noise_norm_moments: sigma must be >= 0");
  if (n_dim_eff < 1) throw std::invalid_argument("noise_norm_moments: dimension must be >= 1");
  const double n = static_cast<double>(n_dim_eff);
  return {sigma * std::sqrt(2.0 * n / kPi), sigma * sigma * n};
}

namespace {

void check_bound_params(int rounds, double epsilon, int n_clients, int shard_size,
                        const LossRegularity& reg) {
  if (rounds < 1) throw std::invalid_argument("bound: rounds must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("bound: epsilon must be positive");
  if (n_clients < 1) throw std::invalid_argument("bound: n_clients must be >= 1");
  if (shard_size < 1) throw std::invalid_argument("bound: shard_size must be >= 1");
  if (!(reg.beta > 0.0) || !(reg.l > 0.0) || !(reg.Theta >= 0.0)) {
    throw std::invalid_argument("bound: regularity constants must be positive");
  }
}

}  // namespace

double convergence_bound_all(const BoundParams& params) {
  check_bound_params(params.rounds, params.epsilon, params.n_clients, params.shard_size,
                     params.reg);
  const IncrementCoeffs coeffs = increment_coeffs(params.mu, params.reg.rho, params.reg.B);
  const double p = 1.0 + 2.0 * params.reg.l * coeffs.grad_sq;
  check_contraction(p, "convergence_bound_all");
  const double c = gaussian_constant(params.delta);
  const double n = static_cast<double>(params.n_clients);
  const double m = static_cast<double>(params.shard_size);
  const double t = static_cast<double>(params.rounds);
  const double kappa1 =
      coeffs.noise_grad * params.reg.beta * c * std::sqrt(2.0 / (n * kPi)) / (m * (1.0 - p));
  const double kappa0 = coeffs.noise_sq * c * c / (m * m * (1.0 - p) * n);
  const double decay = std::pow(p, params.rounds);
  return decay * params.reg.Theta +
         (kappa1 * t / params.epsilon + kappa0 * t * t / (params.epsilon * params.epsilon)) *
             (1.0 - decay);
}

double convergence_bound_all_general(const BoundParams& params, double clip_c,
                                     int n_dim_eff) {
  check_bound_params(params.rounds, params.epsilon, params.n_clients, params.shard_size,
                     params.reg);
  if (!(clip_c > 0.0)) throw std::invalid_argument("bound: clip_c must be positive");
  const IncrementCoeffs coeffs = increment_coeffs(params.mu, params.reg.rho, params.reg.B);
  const double p = 1.0 + 2.0 * params.reg.l * coeffs.grad_sq;
  check_contraction(p, "convergence_bound_all_general");
  const double c = gaussian_constant(params.delta);
  const double n = static_cast<double>(params.n_clients);
  const double m = static_cast<double>(params.shard_size);
  const double t = static_cast<double>(params.rounds);
  const double sens_down = 2.0 * clip_c / (m * n);
  const double sigma_a = c * t * sens_down / params.epsilon;
  const auto [noise_mean, noise_sq] =
      noise_norm_moments(sigma_a, n_dim_eff < 0 ? params.n_clients : n_dim_eff);
  const double per_round =
      coeffs.noise_grad * params.reg.beta * noise_mean + coeffs.noise_sq * noise_sq;
  const double decay = std::pow(p, params.rounds);
  return decay * params.reg.Theta + per_round * (1.0 - decay) / (1.0 - p);
}

KschedGapCoeffs ksched_gap_coeffs(const KBoundParams& params) {
  if (params.k_clients < 1 || params.k_clients > params.n_clients) {
    throw std::invalid_argument("ksched_gap_coeffs: need 1 <= k_clients <= n_clients");
  }
  if (!(params.mu > params.reg.rho)) {
    throw std::domain_error("ksched_gap_coeffs: mu must exceed rho");
  }
  const double mu = params.mu;
  const double rho = params.reg.rho;
  const double b_diss = params.reg.B;
  const double k = static_cast<double>(params.k_clients);
  const double n = static_cast<double>(params.n_clients);
  KschedGapCoeffs out;
  out.noise_sq = 2.0 * rho * k / n + rho;
  out.noise_grad = 1.0 + 2.0 * rho * b_diss / mu + 2.0 * rho * b_diss * std::sqrt(k) / (mu * n);
  out.grad_sq = (rho * b_diss * b_diss / 2.0 + rho * b_diss + rho * b_diss * b_diss / k +
                 2.0 * rho * b_diss * b_diss / std::sqrt(k) + mu * b_diss / std::sqrt(k) - mu) /
                (mu * mu);
  out.contraction = 1.0 + 2.0 * params.reg.l * out.grad_sq;
  return out;
}

double convergence_bound_ksched(const KBoundParams& params) {
  check_bound_params(params.rounds, params.epsilon, params.n_clients, params.shard_size,
                     params.reg);
  const double k = static_cast<double>(params.k_clients);
  const double n = static_cast<double>(params.n_clients);
  const double log_arg =
      1.0 - n / k + (n / k) * std::exp(-params.epsilon / static_cast<double>(params.rounds));
  if (!(log_arg > 0.0)) {
    const double minimal = -params.epsilon / std::log1p(-k / n);
    std::ostringstream msg;
    msg << "bound-undefined: minimal T = " << minimal;
    throw ScheduleDomainError(msg.str(), minimal);
  }
  const KschedGapCoeffs coeffs = ksched_gap_coeffs(params);
  check_contraction(coeffs.contraction, "convergence_bound_ksched");
  const double c = gaussian_constant(params.delta);
  const double m = static_cast<double>(params.shard_size);
  const double log_term = std::log(log_arg);
  const double noise_term =
      c * coeffs.noise_grad * params.reg.beta * std::sqrt(2.0 / kPi) / (-m * k * log_term) +
      c * c * coeffs.noise_sq / (m * m * k * k * log_term * log_term);
  const double decay = std::pow(coeffs.contraction, params.rounds);
  return decay * params.reg.Theta +
         geometric_weight(coeffs.contraction, params.rounds) / (1.0 - coeffs.contraction) *
             noise_term;
}

GridScan scan_bound(const std::function<double(int)>& bound, const std::vector<int>& grid) {
  if (grid.empty()) throw std::invalid_argument("scan_bound: empty grid");
  GridScan scan;
  scan.points.reserve(grid.size());
  for (const int x : grid) {
    GridPoint point;
    point.x = x;
    try {
      point.value = bound(x);
      point.has_value = true;
    } catch (const ScheduleDomainError&) {
      point.flag = "bound-undefined";
    } catch (const std::domain_error&) {
      point.flag = "out-of-regime";
    }
    scan.points.push_back(std::move(point));
  }
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    if (scan.points[i].has_value && scan.points[i].value < best_value) {
      best_value = scan.points[i].value;
      scan.best = static_cast<int>(i);
    }
  }
  if (scan.best < 0) {
    throw std::domain_error("scan_bound: the bound is undefined on the entire grid");
  }
  double magnitude = 0.0;
  for (const GridPoint& point : scan.points) {
    if (point.has_value) magnitude = std::max(magnitude, std::abs(point.value));
  }
  const double tolerance = 1e-12 * magnitude;
  scan.convex = true;
  for (std::size_t i = 1; i + 1 < scan.points.size(); ++i) {
    if (!scan.points[i - 1].has_value || !scan.points[i].has_value ||
        !scan.points[i + 1].has_value) {
      continue;
    }
    const double second_diff = scan.points[i + 1].value - 2.0 * scan.points[i].value +
                               scan.points[i - 1].value;
    if (second_diff < -tolerance) scan.convex = false;
  }
  return scan;
}

}  // namespace nbafl
