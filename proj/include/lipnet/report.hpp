#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lipnet {

struct ConstraintViolation {
  std::string location;  // e.g. "steps[2]", "maps[0].row_block[1]"
  std::string kind;      // e.g. "tau_range", "spectral_norm"
  double magnitude = 0;  // amount by which the bound is exceeded, >= 0
};

/// Which Lipschitz argument covers a network that passed the audit.
enum class Guarantee {
  kNone,           // constraint violations present
  kConstructive,   // every factor is nonexpansive, so the network is 1-Lipschitz
  kEmpiricalOnly,  // layers feasible but the lift is unconstrained (architecture G)
};

const char* to_string(Guarantee g);

struct VerificationReport {
  std::string architecture;
  std::vector<ConstraintViolation> constraint_violations;
  Guarantee guarantee = Guarantee::kNone;
  double max_lipschitz_quotient = 0.0;
  std::optional<double> max_oracle_deviation;
  std::size_t samples_used = 0;
  std::uint64_t seed = 0;

  bool constraints_ok() const { return constraint_violations.empty(); }
};

}  // namespace lipnet
