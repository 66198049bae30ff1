#pragma once

#include <stdexcept>
#include <string>

namespace nbafl {

// A dataset or model file could not be opened or was cut short.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A dataset file was readable but its contents violate the expected layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The k-client scheduling calibration has no solution for the requested
// round count; carries the smallest admissible number of rounds.
class ScheduleDomainError : public std::domain_error {
 public:
  ScheduleDomainError(std::string what, double minimal_rounds)
      : std::domain_error(std::move(what)), minimal_rounds_(minimal_rounds) {}
  double minimal_rounds() const noexcept { return minimal_rounds_; }

 private:
  double minimal_rounds_;
};

// The inner solver increased its objective for several consecutive steps.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::string what, int step, int round = -1, int client = -1)
      : std::runtime_error(std::move(what)), step_(step), round_(round), client_(client) {}
  int step() const noexcept { return step_; }
  int round() const noexcept { return round_; }
  int client() const noexcept { return client_; }

 private:
  int step_;
  int round_;
  int client_;
};

}  // namespace nbafl
