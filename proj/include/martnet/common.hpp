#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace martnet {

// Invalid arguments, shape mismatches, bad configs.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values produced during path simulation.
struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Optimizer or training loop hit a non-finite / runaway state.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool is_finite(double x) { return std::isfinite(x); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInput(msg);
}

}  // namespace martnet
