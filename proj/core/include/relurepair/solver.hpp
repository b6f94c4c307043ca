/* Copyright 2026 The relurepair Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relurepair/constraints.hpp"

namespace relurepair {

enum class SolveStatus { kFeasible, kInfeasible };

struct Solution {
  SolveStatus status = SolveStatus::kInfeasible;
  // One value per declared variable; empty when infeasible.
  std::vector<double> assignment;
  // Sum of |assignment|.
  double objective = 0.0;
  std::size_t pivots = 0;

  bool feasible() const { return status == SolveStatus::kFeasible; }
};

enum class Objective { kMinimizeL1, kFeasibility };

struct SolverOptions {
  Objective objective = Objective::kMinimizeL1;
  // Phase-1 optimum above this means infeasible.
  double feasibility_tolerance = 1e-7;
  // Cap on simplex pivots; exceeding it throws SolverError. 0 picks a cap
  // from the tableau size.
  std::size_t max_pivots = 0;
};

// Two-phase dense-tableau simplex over the split form d = d+ - d-, with
// Bland's rule. Phase 1 decides feasibility; phase 2 minimizes sum(d+ + d-)
// unless only feasibility is requested. Numerical breakdown throws
// SolverError; an infeasible system is a normal kInfeasible result.
Solution solve(const ConstraintSystem& system, const SolverOptions& options = {});

// Substitutes the assignment into every constraint, with strict relations
// tightened by the system margin. Throws std::out_of_range when the
// assignment does not cover the declared variables.
bool verify(const ConstraintSystem& system, std::span<const double> assignment, double tolerance = 1e-7);

// Largest violation over all constraints at the assignment (0 when satisfied).
double max_violation(const ConstraintSystem& system, std::span<const double> assignment);

inline constexpr const char* kSmtSolverEnv = "RELUREPAIR_SMT_SOLVER";

struct SmtCheck {
  enum class Status { kSat, kUnsat, kUnknown, kUnavailable };
  Status status = Status::kUnavailable;
  std::vector<double> assignment;
  std::string detail;
};

// Runs an external SMT-LIB2 solver on the exported system. The executable is
// `executable` when given, otherwise the RELUREPAIR_SMT_SOLVER environment
// variable. A missing executable yields kUnavailable, never a fallback.
SmtCheck solve_via_smt_check(const ConstraintSystem& system,
                             std::optional<std::filesystem::path> executable = std::nullopt);

// Reads `(define-fun dN () Real <value>)` entries from solver output.
std::vector<double> parse_smt_model(const std::string& text, std::size_t variable_count);

}  // namespace relurepair
