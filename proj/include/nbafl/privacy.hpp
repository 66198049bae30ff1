#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nbafl/errors.hpp"
#include "nbafl/rng.hpp"

namespace nbafl {

// Per-client (epsilon, delta) guarantee; c is the Gaussian-mechanism
// multiplier sqrt(2 ln(1.25/delta)) derived from delta.
struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;
  double c = 0.0;
};

// What an adversary may observe: T aggregation rounds in total, of which any
// single client's upload is exposed at most uplink_max times.
struct ExposureModel {
  int rounds = 0;       // T
  int uplink_max = 0;   // L
};

// How far one sample's replacement can move each protected query.
struct SensitivityReport {
  double uplink = 0.0;    // per-client upload, 2C/m
  double downlink = 0.0;  // aggregated broadcast, 2C*weight/m
};

enum class ScheduleMode { kAllClients, kKRandom };

// Calibrated noise scales for one protocol configuration.  b and gamma are
// populated only for k-client scheduling (b solves the composition balance,
// gamma the per-round budget split); warnings carry soft regime violations.
struct NoiseCalibration {
  ScheduleMode mode = ScheduleMode::kAllClients;
  double sigma_uplink = 0.0;
  double sigma_downlink = 0.0;
  double sigma_aggregate = 0.0;
  std::optional<double> b;
  std::optional<double> gamma;
  std::vector<std::string> warnings;
};

// sqrt(2 ln(1.25/delta)); requires 0 < delta < 1.
double gaussian_constant(double delta);

// PrivacyBudget with c filled in; requires epsilon > 0.
PrivacyBudget make_budget(double epsilon, double delta);

// Worst-case change of one client's uploaded parameters when a single local
// sample is replaced: 2*clip_c / shard_size.
double uplink_sensitivity(double clip_c, int shard_size);

// Same for the weighted aggregate broadcast by the server: weight is the
// client's aggregation weight (1/N, or 1/K under k-client scheduling).
double downlink_sensitivity(double clip_c, int shard_size, double weight);

// Std-dev for client-side noise covering uplink_max exposed uploads.
double uplink_sigma(const PrivacyBudget& budget, double uplink_sens, int uplink_max);

// Std-dev the server adds so T rounds of broadcasts stay within budget once
// the aggregated client noise is credited; zero when client noise already
// covers all T rounds (T <= L*sqrt(N)).
double downlink_sigma_all(const PrivacyBudget& budget, double clip_c, int shard_size,
                          int n_clients, const ExposureModel& exposures);

// Composition coefficients for k-of-N scheduling.  Throws ScheduleDomainError
// when the amplified composition has no solution for this T (carrying the
// minimal admissible T).  When K == N both reduce to the all-clients scheme:
// b = 1 and gamma = epsilon / (L*sqrt(K)).
struct KschedCoefficients {
  double b = 0.0;
  double gamma = 0.0;
};
KschedCoefficients ksched_coefficients(const PrivacyBudget& budget, int rounds,
                                       int k_clients, int n_clients, int uplink_max);

// Server noise std-dev under k-of-N scheduling; zero when T <= epsilon/gamma.
// The b-undefined error can only surface on the positive branch.  warnings,
// when given, receives a note if the secondary regime check T > b*L*sqrt(K)
// disagrees with the governing one.
double downlink_sigma_ksched(const PrivacyBudget& budget, double clip_c, int shard_size,
                             int k_clients, int n_clients, const ExposureModel& exposures,
                             std::vector<std::string>* warnings = nullptr);

// Full calibration for one configuration: uplink, downlink, and the
// effective per-coordinate std-dev of total noise on the broadcast model.
NoiseCalibration aggregate_sigma(ScheduleMode mode, const PrivacyBudget& budget,
                                 double clip_c, int shard_size, int n_clients,
                                 int k_clients, const ExposureModel& exposures);

// dim iid N(0, sigma^2) draws from the stream; sigma = 0 yields zeros
// without consuming any draws.
Eigen::VectorXd sample_noise(int dim, double sigma, RngStream& stream);

// Empirical check of one Gaussian-mechanism release.
struct AuditReport {
  double estimate = 0.0;    // worst-direction mass with privacy loss > epsilon
  double half_width = 0.0;  // three binomial standard errors
  std::int64_t samples = 0;
  bool pass = false;        // estimate <= delta + half_width
};

// Monte-Carlo estimate of Pr[privacy loss > epsilon] for a scalar Gaussian
// release with the given sensitivity, taking the worse of the two
// neighbouring-input directions.  Requires sigma > 0 and samples >= 1e5.
AuditReport audit_mechanism(double sigma, double sensitivity, double epsilon,
                            double delta, std::int64_t samples, RngStream& stream);

}  // namespace nbafl
