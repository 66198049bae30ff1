#pragma once

#include <cmath>
#include <cstdint>

namespace nbafl {

// Labels that keep random draws for unrelated subsystems on disjoint streams.
enum class StreamPurpose : std::uint64_t {
  kModelInit = 1,
  kUplinkNoise = 2,
  kDownlinkNoise = 3,
  kPartition = 4,
  kScheduling = 5,
  kSynthData = 6,
  kProbe = 7,
  kAudit = 8,
};

// Deterministic pseudo-random stream keyed by (seed, purpose, round, client).
// Two streams with different keys are statistically independent, and a stream
// never shares state with another, so per-client draws can be consumed in any
// order (including concurrently) without changing any value.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed, StreamPurpose purpose,
                     std::uint64_t round = 0, std::uint64_t client = 0)
      : state_(derive_key(master_seed, static_cast<std::uint64_t>(purpose), round, client)) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return finalize(state_);
  }

  // Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log argument.
  double next_unit_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  // Standard normal via the Box-Muller transform; the paired value is cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(next_unit_pos()));
    const double a = 2.0 * 3.141592653589793238462643383279502884 * next_unit();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n); n must be positive.  The modulo bias is below
  // n / 2^64, which is far beyond statistical resolution at simulator scales.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t purpose,
                                  std::uint64_t round, std::uint64_t client) {
    std::uint64_t h = finalize(seed + kGolden);
    h = finalize(h ^ (purpose + kGolden + (h << 6) + (h >> 2)));
    h = finalize(h ^ (round + kGolden + (h << 6) + (h >> 2)));
    h = finalize(h ^ (client + kGolden + (h << 6) + (h >> 2)));
    return h;
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nbafl
