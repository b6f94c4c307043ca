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

#include "relurepair/solver.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "relurepair/error.hpp"
#include "sexpr.hpp"

namespace relurepair {
namespace {

constexpr double kPivotEps = 1e-9;
constexpr double kCostEps = 1e-9;

// Right-hand side a constraint must reach once the constant is moved over and
// strict relations are tightened: terms >= rhs (lower) or terms <= rhs.
struct Normalized {
  bool lower;
  double rhs;
};

Normalized normalize(const LinearConstraint& c, double margin) {
  switch (c.relation) {
    case Relation::kGe:
      return {true, c.bound - c.expr.constant()};
    case Relation::kGt:
      return {true, c.bound + margin - c.expr.constant()};
    case Relation::kLe:
      return {false, c.bound - c.expr.constant()};
    case Relation::kLt:
      return {false, c.bound - margin - c.expr.constant()};
  }
  return {false, 0.0};
}

class Simplex {
 public:
  Simplex(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), stride_(cols + 1), cells_(rows * stride_, 0.0), obj_(stride_, 0.0),
        basis_(rows, 0) {}

  double& at(std::size_t r, std::size_t c) { return cells_[r * stride_ + c]; }
  double& rhs(std::size_t r) { return cells_[r * stride_ + cols_]; }
  std::size_t& basis(std::size_t r) { return basis_[r]; }
  std::size_t rows() const { return rows_; }
  std::size_t pivots() const { return pivots_; }

  // Sets reduced costs for `costs` given the current basis.
  void price(const std::vector<double>& costs) {
    std::fill(obj_.begin(), obj_.end(), 0.0);
    for (std::size_t c = 0; c < cols_; ++c) obj_[c] = costs[c];
    for (std::size_t r = 0; r < rows_; ++r) {
      const double cb = costs[basis_[r]];
      if (cb == 0.0) continue;
      const double* row = &cells_[r * stride_];
      for (std::size_t c = 0; c <= cols_; ++c) obj_[c] -= cb * row[c];
    }
  }

  // Objective value at the current basic solution.
  double value() const { return -obj_[cols_]; }

  // Minimizes over columns with allowed[c]; returns false when unbounded.
  bool optimize(const std::vector<bool>& allowed, std::size_t max_pivots) {
    for (;;) {
      std::size_t enter = cols_;
      for (std::size_t c = 0; c < cols_; ++c) {
        if (allowed[c] && obj_[c] < -kCostEps) {
          enter = c;
          break;
        }
      }
      if (enter == cols_) return true;
      std::size_t leave = rows_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows_; ++r) {
        const double a = at(r, enter);
        if (a <= kPivotEps) continue;
        const double ratio = std::max(rhs(r), 0.0) / a;
        if (leave == rows_ || ratio < best - 1e-12) {
          best = ratio;
          leave = r;
        } else if (ratio <= best + 1e-12 && basis_[r] < basis_[leave]) {
          leave = r;
        }
      }
      if (leave == rows_) return false;
      if (pivots_ >= max_pivots) {
        throw SolverError("simplex exceeded " + std::to_string(max_pivots) + " pivots");
      }
      pivot(leave, enter);
    }
  }

  void pivot(std::size_t r, std::size_t c) {
    ++pivots_;
    double* prow = &cells_[r * stride_];
    const double inv = 1.0 / prow[c];
    for (std::size_t j = 0; j <= cols_; ++j) prow[j] *= inv;
    prow[c] = 1.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      if (i == r) continue;
      double* row = &cells_[i * stride_];
      const double f = row[c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) row[j] -= f * prow[j];
      row[c] = 0.0;
    }
    const double f = obj_[c];
    if (f != 0.0) {
      for (std::size_t j = 0; j <= cols_; ++j) obj_[j] -= f * prow[j];
      obj_[c] = 0.0;
    }
    basis_[r] = c;
  }

  void drop_row(std::size_t r) {
    cells_.erase(cells_.begin() + static_cast<std::ptrdiff_t>(r * stride_),
                 cells_.begin() + static_cast<std::ptrdiff_t>((r + 1) * stride_));
    basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
    --rows_;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::size_t stride_;
  std::vector<double> cells_;
  std::vector<double> obj_;
  std::vector<std::size_t> basis_;
  std::size_t pivots_ = 0;
};

bool constant_holds(const Normalized& n, double tolerance) {
  // The terms are empty, so the requirement is 0 >= rhs or 0 <= rhs.
  return n.lower ? n.rhs <= tolerance : n.rhs >= -tolerance;
}

}  // namespace

Solution solve(const ConstraintSystem& system, const SolverOptions& options) {
  system.check();
  const std::size_t n = system.variables.size();

  struct Row {
    const LinearConstraint* c;
    double sign;
    double rhs;
    bool needs_artificial;
  };
  std::vector<Row> rows;
  for (const auto& c : system.constraints) {
    const Normalized norm = normalize(c, system.margin);
    if (c.expr.terms().empty()) {
      if (!constant_holds(norm, options.feasibility_tolerance)) return Solution{};
      continue;
    }
    // Store every row as `sign * terms (<= | >=) rhs` with rhs >= 0.
    double sign = 1.0;
    bool lower = norm.lower;
    double rhs = norm.rhs;
    if (rhs < 0.0 || (rhs == 0.0 && lower)) {
      sign = -1.0;
      rhs = -rhs;
      lower = !lower;
    }
    rows.push_back({&c, sign, rhs, lower});
  }

  std::size_t slack_count = rows.size();
  std::size_t artificial_count = 0;
  for (const auto& r : rows) artificial_count += r.needs_artificial ? 1 : 0;
  const std::size_t structural = 2 * n;
  const std::size_t first_artificial = structural + slack_count;
  const std::size_t cols = first_artificial + artificial_count;

  Simplex tab(rows.size(), cols);
  std::size_t next_artificial = first_artificial;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Row& row = rows[r];
    for (const auto& [var, coeff] : row.c->expr.terms()) {
      tab.at(r, 2 * var) = row.sign * coeff;
      tab.at(r, 2 * var + 1) = -row.sign * coeff;
    }
    tab.rhs(r) = row.rhs;
    if (row.needs_artificial) {
      tab.at(r, structural + r) = -1.0;
      tab.at(r, next_artificial) = 1.0;
      tab.basis(r) = next_artificial++;
    } else {
      tab.at(r, structural + r) = 1.0;
      tab.basis(r) = structural + r;
    }
  }

  const std::size_t max_pivots =
      options.max_pivots > 0 ? options.max_pivots : 50 * (rows.size() + cols) + 1000;

  std::vector<bool> allowed(cols, true);
  if (artificial_count > 0) {
    std::vector<double> phase1(cols, 0.0);
    for (std::size_t c = first_artificial; c < cols; ++c) phase1[c] = 1.0;
    tab.price(phase1);
    if (!tab.optimize(allowed, max_pivots)) throw SolverError("phase 1 reported an unbounded direction");
    if (tab.value() > options.feasibility_tolerance) {
      Solution out;
      out.pivots = tab.pivots();
      return out;
    }
    // Pivot remaining zero-level artificials out of the basis; rows where that
    // is impossible are linearly dependent and can go.
    for (std::size_t r = tab.rows(); r-- > 0;) {
      if (tab.basis(r) < first_artificial) continue;
      std::size_t enter = first_artificial;
      for (std::size_t c = 0; c < first_artificial; ++c) {
        if (std::abs(tab.at(r, c)) > kPivotEps) {
          enter = c;
          break;
        }
      }
      if (enter == first_artificial) {
        tab.drop_row(r);
      } else {
        tab.pivot(r, enter);
      }
    }
    for (std::size_t c = first_artificial; c < cols; ++c) allowed[c] = false;
  }

  if (options.objective == Objective::kMinimizeL1) {
    std::vector<double> phase2(cols, 0.0);
    for (std::size_t c = 0; c < structural; ++c) phase2[c] = 1.0;
    tab.price(phase2);
    if (!tab.optimize(allowed, max_pivots)) throw SolverError("phase 2 reported an unbounded direction");
  }

  std::vector<double> columns(cols, 0.0);
  for (std::size_t r = 0; r < tab.rows(); ++r) columns[tab.basis(r)] = std::max(tab.rhs(r), 0.0);
  Solution out;
  out.status = SolveStatus::kFeasible;
  out.pivots = tab.pivots();
  out.assignment.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    out.assignment[v] = columns[2 * v] - columns[2 * v + 1];
    out.objective += std::abs(out.assignment[v]);
  }
  return out;
}

double max_violation(const ConstraintSystem& system, std::span<const double> assignment) {
  if (assignment.size() < system.variables.size()) {
    throw std::out_of_range("assignment covers " + std::to_string(assignment.size()) + " of " +
                            std::to_string(system.variables.size()) + " variables");
  }
  double worst = 0.0;
  for (const auto& c : system.constraints) {
    const double v = c.expr.evaluate(assignment);
    double gap = 0.0;
    switch (c.relation) {
      case Relation::kGe:
        gap = c.bound - v;
        break;
      case Relation::kGt:
        gap = c.bound + system.margin - v;
        break;
      case Relation::kLe:
        gap = v - c.bound;
        break;
      case Relation::kLt:
        gap = v - (c.bound - system.margin);
        break;
    }
    worst = std::max(worst, gap);
  }
  return worst;
}

bool verify(const ConstraintSystem& system, std::span<const double> assignment, double tolerance) {
  return max_violation(system, assignment) <= tolerance;
}

std::vector<double> parse_smt_model(const std::string& text, std::size_t variable_count) {
  std::vector<double> values(variable_count, 0.0);
  const auto visit = [&](const auto& self, const sexpr::Node& node) -> void {
    if (!node.is_list) return;
    if (node.list.size() == 5 && !node.list[0].is_list && node.list[0].atom == "define-fun") {
      const std::string& name = node.list[1].atom;
      if (name.size() > 1 && name[0] == 'd') {
        const std::size_t id = std::stoul(name.substr(1));
        if (id < variable_count) values[id] = sexpr::constant_value(node.list[4]);
      }
      return;
    }
    for (const auto& child : node.list) self(self, child);
  };
  for (const auto& form : sexpr::parse(text)) visit(visit, form);
  return values;
}

namespace {

std::optional<std::filesystem::path> resolve_executable(std::optional<std::filesystem::path> explicit_path) {
  std::filesystem::path candidate;
  if (explicit_path) {
    candidate = *explicit_path;
  } else if (const char* env = std::getenv(kSmtSolverEnv); env != nullptr && *env != '\0') {
    candidate = env;
  } else {
    return std::nullopt;
  }
  const auto usable = [](const std::filesystem::path& p) {
    return std::filesystem::is_regular_file(p) && ::access(p.c_str(), X_OK) == 0;
  };
  if (candidate.has_parent_path()) {
    return usable(candidate) ? std::optional(candidate) : std::nullopt;
  }
  if (const char* path = std::getenv("PATH"); path != nullptr) {
    std::stringstream dirs(path);
    std::string dir;
    while (std::getline(dirs, dir, ':')) {
      if (dir.empty()) continue;
      const auto full = std::filesystem::path(dir) / candidate;
      if (usable(full)) return full;
    }
  }
  return std::nullopt;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

}  // namespace

SmtCheck solve_via_smt_check(const ConstraintSystem& system, std::optional<std::filesystem::path> executable) {
  SmtCheck out;
  const auto exe = resolve_executable(std::move(executable));
  if (!exe) {
    out.detail = "cross-check unavailable: no SMT solver executable configured";
    return out;
  }
  static std::atomic<unsigned> counter{0};
  const auto file = std::filesystem::temp_directory_path() /
                    ("relurepair-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".smt2");
  {
    std::ofstream os(file);
    os << "(set-option :produce-models true)\n" << export_smtlib(system);
  }
  const std::string cmd = shell_quote(exe->string()) + " " + shell_quote(file.string()) + " 2>&1";
  std::string output;
  {
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen(cmd.c_str(), "r"), ::pclose);
    if (!pipe) {
      std::filesystem::remove(file);
      out.detail = "cross-check unavailable: cannot launch " + exe->string();
      return out;
    }
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe.get())) > 0) output.append(buf.data(), got);
  }
  std::filesystem::remove(file);

  std::istringstream lines(output);
  std::string first;
  lines >> first;
  out.detail = output;
  if (first == "sat") {
    out.status = SmtCheck::Status::kSat;
    out.assignment = parse_smt_model(output.substr(output.find("sat") + 3), system.variables.size());
  } else if (first == "unsat") {
    out.status = SmtCheck::Status::kUnsat;
  } else {
    out.status = SmtCheck::Status::kUnknown;
  }
  return out;
}

}  // namespace relurepair
