#include "nbafl/privacy.hpp"

#include <cmath>
#include <sstream>

namespace nbafl {
namespace {

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

std::string format_minimal_rounds(double minimal_rounds) {
  std::ostringstream out;
  out << "b-undefined: minimal T = " << minimal_rounds;
  return out.str();
}

double ksched_gamma(double eps, double k, double n, double l) {
  const double arg = 1.0 - k / n + (k / n) * std::exp(-eps / (l * std::sqrt(k)));
  return -std::log(arg);
}

}  // namespace

double gaussian_constant(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("gaussian_constant: delta must lie in (0, 1)");
  }
  return std::sqrt(2.0 * std::log(1.25 / delta));
}

PrivacyBudget make_budget(double epsilon, double delta) {
  require(epsilon > 0.0, "make_budget: epsilon must be positive");
  return PrivacyBudget{epsilon, delta, gaussian_constant(delta)};
}

double uplink_sensitivity(double clip_c, int shard_size) {
  require(clip_c > 0.0, "uplink_sensitivity: clip_c must be positive");
  require(shard_size >= 1, "uplink_sensitivity: shard_size must be >= 1");
  return 2.0 * clip_c / static_cast<double>(shard_size);
}

double downlink_sensitivity(double clip_c, int shard_size, double weight) {
  require(clip_c > 0.0, "downlink_sensitivity: clip_c must be positive");
  require(shard_size >= 1, "downlink_sensitivity: shard_size must be >= 1");
  require(weight > 0.0 && weight <= 1.0, "downlink_sensitivity: weight must lie in (0, 1]");
  return 2.0 * clip_c * weight / static_cast<double>(shard_size);
}

double uplink_sigma(const PrivacyBudget& budget, double uplink_sens, int uplink_max) {
  require(budget.epsilon > 0.0, "uplink_sigma: epsilon must be positive");
  require(uplink_sens > 0.0, "uplink_sigma: sensitivity must be positive");
  require(uplink_max >= 1, "uplink_sigma: uplink_max must be >= 1");
  return budget.c * static_cast<double>(uplink_max) * uplink_sens / budget.epsilon;
}

double downlink_sigma_all(const PrivacyBudget& budget, double clip_c, int shard_size,
                          int n_clients, const ExposureModel& exposures) {
  require(budget.epsilon > 0.0, "downlink_sigma_all: epsilon must be positive");
  require(clip_c > 0.0, "downlink_sigma_all: clip_c must be positive");
  require(shard_size >= 1, "downlink_sigma_all: shard_size must be >= 1");
  require(n_clients >= 1, "downlink_sigma_all: n_clients must be >= 1");
  require(exposures.rounds >= 1, "downlink_sigma_all: rounds must be >= 1");
  require(exposures.uplink_max >= 1, "downlink_sigma_all: uplink_max must be >= 1");
  const double t = static_cast<double>(exposures.rounds);
  const double l = static_cast<double>(exposures.uplink_max);
  const double n = static_cast<double>(n_clients);
  // Client-side noise alone already covers the composition up to L*sqrt(N)
  // rounds; only the excess needs server-side noise.
  if (!(t > l * std::sqrt(n))) return 0.0;
  const double radicand = t * t - l * l * n;
  return 2.0 * budget.c * clip_c * std::sqrt(radicand) /
         (static_cast<double>(shard_size) * n * budget.epsilon);
}

KschedCoefficients ksched_coefficients(const PrivacyBudget& budget, int rounds,
                                       int k_clients, int n_clients, int uplink_max) {
  require(budget.epsilon > 0.0, "ksched_coefficients: epsilon must be positive");
  require(rounds >= 1, "ksched_coefficients: rounds must be >= 1");
  require(n_clients >= 1, "ksched_coefficients: n_clients must be >= 1");
  require(k_clients >= 1 && k_clients <= n_clients,
          "ksched_coefficients: k_clients must lie in [1, n_clients]");
  require(uplink_max >= 1, "ksched_coefficients: uplink_max must be >= 1");
  const double eps = budget.epsilon;
  const double t = static_cast<double>(rounds);
  const double k = static_cast<double>(k_clients);
  const double n = static_cast<double>(n_clients);
  const double l = static_cast<double>(uplink_max);
  KschedCoefficients out;
  if (k_clients == n_clients) {
    // Sampling every client each round composes exactly like the all-clients
    // scheme; short-circuiting keeps the reduction free of log/exp roundoff.
    out.b = 1.0;
    out.gamma = eps / (l * std::sqrt(k));
    return out;
  }
  const double arg_b = 1.0 - n / k + (n / k) * std::exp(-eps / t);
  if (!(arg_b > 0.0)) {
    const double minimal = -eps / std::log1p(-k / n);
    throw ScheduleDomainError(format_minimal_rounds(minimal), minimal);
  }
  out.b = -(t / eps) * std::log(arg_b);
  out.gamma = ksched_gamma(eps, k, n, l);
  return out;
}

double downlink_sigma_ksched(const PrivacyBudget& budget, double clip_c, int shard_size,
                             int k_clients, int n_clients, const ExposureModel& exposures,
                             std::vector<std::string>* warnings) {
  require(budget.epsilon > 0.0, "downlink_sigma_ksched: epsilon must be positive");
  require(clip_c > 0.0, "downlink_sigma_ksched: clip_c must be positive");
  require(shard_size >= 1, "downlink_sigma_ksched: shard_size must be >= 1");
  require(n_clients >= 1, "downlink_sigma_ksched: n_clients must be >= 1");
  require(k_clients >= 1 && k_clients <= n_clients,
          "downlink_sigma_ksched: k_clients must lie in [1, n_clients]");
  require(exposures.rounds >= 1, "downlink_sigma_ksched: rounds must be >= 1");
  require(exposures.uplink_max >= 1, "downlink_sigma_ksched: uplink_max must be >= 1");
  if (k_clients == n_clients) {
    return downlink_sigma_all(budget, clip_c, shard_size, n_clients, exposures);
  }
  const double eps = budget.epsilon;
  const double t = static_cast<double>(exposures.rounds);
  const double k = static_cast<double>(k_clients);
  const double l = static_cast<double>(exposures.uplink_max);
  // gamma never needs b, so the zero branch is reachable even where b has no
  // solution; b is only evaluated once the positive branch is selected.
  const double gamma = ksched_gamma(eps, k, static_cast<double>(n_clients), l);
  if (!(t > eps / gamma)) return 0.0;
  const KschedCoefficients coeffs =
      ksched_coefficients(budget, exposures.rounds, k_clients, n_clients, exposures.uplink_max);
  const double scaled_t = t / coeffs.b;
  const double radicand = scaled_t * scaled_t - l * l * k;
  if (warnings != nullptr && !(t > coeffs.b * l * std::sqrt(k))) {
    std::ostringstream note;
    note << "regime check disagreement: T > eps/gamma holds but T <= b*L*sqrt(K) "
         << "(T=" << exposures.rounds << ", b=" << coeffs.b << ")";
    warnings->push_back(note.str());
  }
  if (radicand <= 0.0) return 0.0;
  return 2.0 * budget.c * clip_c * std::sqrt(radicand) /
         (static_cast<double>(shard_size) * k * eps);
}

NoiseCalibration aggregate_sigma(ScheduleMode mode, const PrivacyBudget& budget,
                                 double clip_c, int shard_size, int n_clients,
                                 int k_clients, const ExposureModel& exposures) {
  NoiseCalibration cal;
  cal.mode = mode;
  cal.sigma_uplink =
      uplink_sigma(budget, uplink_sensitivity(clip_c, shard_size), exposures.uplink_max);
  if (mode == ScheduleMode::kAllClients) {
    cal.sigma_downlink = downlink_sigma_all(budget, clip_c, shard_size, n_clients, exposures);
    cal.sigma_aggregate = std::sqrt(cal.sigma_downlink * cal.sigma_downlink +
                                    cal.sigma_uplink * cal.sigma_uplink /
                                        static_cast<double>(n_clients));
    return cal;
  }
  cal.sigma_downlink = downlink_sigma_ksched(budget, clip_c, shard_size, k_clients,
                                             n_clients, exposures, &cal.warnings);
  try {
    const KschedCoefficients coeffs = ksched_coefficients(
        budget, exposures.rounds, k_clients, n_clients, exposures.uplink_max);
    cal.b = coeffs.b;
    cal.gamma = coeffs.gamma;
  } catch (const ScheduleDomainError& error) {
    // Zero branch with b out of domain: still a valid calibration, the
    // composition coefficient just has no solution at this round count.
    cal.gamma = ksched_gamma(budget.epsilon, static_cast<double>(k_clients),
                             static_cast<double>(n_clients),
                             static_cast<double>(exposures.uplink_max));
    cal.warnings.push_back(error.what());
  }
  cal.sigma_aggregate = std::sqrt(cal.sigma_downlink * cal.sigma_downlink +
                                  cal.sigma_uplink * cal.sigma_uplink /
                                      static_cast<double>(k_clients));
  return cal;
}

Eigen::VectorXd sample_noise(int dim, double sigma, RngStream& stream) {
  require(dim >= 1, "sample_noise: dim must be positive");
  if (sigma < 0.0) throw std::invalid_argument("sample_noise: sigma must be >= 0");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
  if (sigma == 0.0) return out;
  for (int i = 0; i < dim; ++i) out[i] = sigma * stream.next_gaussian();
  return out;
}

AuditReport audit_mechanism(double sigma, double sensitivity, double epsilon,
                            double delta, std::int64_t samples, RngStream& stream) {
  if (!(sigma > 0.0)) throw std::domain_error("audit_mechanism: sigma must be positive");
  require(sensitivity > 0.0, "audit_mechanism: sensitivity must be positive");
  require(epsilon > 0.0, "audit_mechanism: epsilon must be positive");
  require(samples >= 100000, "audit_mechanism: need at least 1e5 samples");
  // For a release o of the mechanism on input 0 against neighbour ds, the
  // privacy loss ln p0(o)/p1(o) exceeds epsilon iff the noise falls below
  // ds/2 - sigma^2*eps/ds; the mirrored direction flips the threshold sign.
  const double threshold =
      sensitivity / 2.0 - sigma * sigma * epsilon / sensitivity;
  std::int64_t hits_forward = 0;
  std::int64_t hits_reverse = 0;
  for (std::int64_t i = 0; i < samples; ++i) {
    if (sigma * stream.next_gaussian() < threshold) ++hits_forward;
    if (sigma * stream.next_gaussian() > -threshold) ++hits_reverse;
  }
  const double worst = static_cast<double>(std::max(hits_forward, hits_reverse));
  AuditReport report;
  report.samples = samples;
  report.estimate = worst / static_cast<double>(samples);
  report.half_width =
      3.0 * std::sqrt(report.estimate * (1.0 - report.estimate) /
                      static_cast<double>(samples));
  report.pass = report.estimate <= delta + report.half_width;
  return report;
}

}  // namespace nbafl
