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

#include "fm_oracle.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace relurepair::testing {
namespace {

using Rational = boost::multiprecision::cpp_rational;

// sum(coeffs[j] * x_j) >= rhs, derived from the original rows in `history`.
struct Row {
  std::vector<Rational> coeffs;
  Rational rhs;
  std::uint64_t history = 0;
};

// Scales so the first non-zero coefficient has magnitude 1.
void normalize(Row& row) {
  for (const auto& c : row.coeffs) {
    if (c != 0) {
      const Rational scale = abs(c);
      for (auto& x : row.coeffs) x /= scale;
      row.rhs /= scale;
      return;
    }
  }
}

}  // namespace

bool fm_feasible(const ConstraintSystem& system) {
  if (system.constraints.size() > 64) throw std::invalid_argument("fm_feasible: at most 64 rows");
  const std::size_t n = system.variables.size();
  const Rational margin(system.margin);
  std::vector<Row> rows;
  for (std::size_t i = 0; i < system.constraints.size(); ++i) {
    const auto& c = system.constraints[i];
    Row row;
    row.coeffs.assign(n, Rational(0));
    for (const auto& [var, coeff] : c.expr.terms()) row.coeffs.at(var) = Rational(coeff);
    Rational rhs = Rational(c.bound) - Rational(c.expr.constant());
    bool flip = false;
    switch (c.relation) {
      case Relation::kGe:
        break;
      case Relation::kGt:
        rhs += margin;
        break;
      case Relation::kLe:
        flip = true;
        break;
      case Relation::kLt:
        rhs -= margin;
        flip = true;
        break;
    }
    if (flip) {
      for (auto& x : row.coeffs) x = -x;
      rhs = -rhs;
    }
    row.rhs = rhs;
    row.history = std::uint64_t{1} << i;
    rows.push_back(std::move(row));
  }

  std::vector<bool> done(n, false);
  for (std::size_t step = 0; step < n; ++step) {
    // Eliminate the variable producing the fewest combinations.
    std::size_t var = n;
    std::size_t cheapest = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (done[v]) continue;
      std::size_t p = 0, q = 0;
      for (const auto& r : rows) {
        if (r.coeffs[v] > 0) ++p;
        if (r.coeffs[v] < 0) ++q;
      }
      if (var == n || p * q < cheapest) {
        var = v;
        cheapest = p * q;
      }
    }
    done[var] = true;
    std::vector<Row> pos, neg, next;
    for (auto& r : rows) {
      if (r.coeffs[var] > 0) {
        pos.push_back(std::move(r));
      } else if (r.coeffs[var] < 0) {
        neg.push_back(std::move(r));
      } else {
        next.push_back(std::move(r));
      }
    }
    const std::size_t eliminated = step + 1;
    for (const auto& p : pos) {
      for (const auto& q : neg) {
        const std::uint64_t history = p.history | q.history;
        // Chernikov: a row built from more than (eliminated + 1) originals is implied.
        if (static_cast<std::size_t>(__builtin_popcountll(history)) > eliminated + 1) continue;
        Row r;
        r.coeffs.resize(n);
        const Rational a = -q.coeffs[var];
        const Rational b = p.coeffs[var];
        for (std::size_t j = 0; j < n; ++j) r.coeffs[j] = a * p.coeffs[j] + b * q.coeffs[j];
        r.coeffs[var] = 0;
        r.rhs = a * p.rhs + b * q.rhs;
        r.history = history;
        next.push_back(std::move(r));
      }
    }
    rows.clear();
    // Parallel rows keep only the strongest bound; equal bounds keep the
    // smallest history so the Chernikov test stays sound.
    std::map<std::vector<Rational>, std::size_t> seen;
    for (auto& r : next) {
      normalize(r);
      bool zero = true;
      for (const auto& c : r.coeffs) zero = zero && c == 0;
      if (zero) {
        if (r.rhs > 0) return false;
        continue;
      }
      auto [it, fresh] = seen.try_emplace(r.coeffs, rows.size());
      if (fresh) {
        rows.push_back(std::move(r));
        continue;
      }
      Row& kept = rows[it->second];
      if (r.rhs > kept.rhs ||
          (r.rhs == kept.rhs && __builtin_popcountll(r.history) < __builtin_popcountll(kept.history))) {
        kept = std::move(r);
      }
    }
    // A row whose history strictly contains another row's history is a
    // non-extreme combination of the multiplier cone, hence implied.
    std::vector<Row> minimal;
    for (auto& r : rows) {
      const bool dominated = std::any_of(rows.begin(), rows.end(), [&](const Row& o) {
        return o.history != r.history && (o.history & r.history) == o.history;
      });
      if (!dominated) minimal.push_back(std::move(r));
    }
    rows = std::move(minimal);
  }
  for (const auto& r : rows) {
    if (r.rhs > 0) return false;
  }
  return true;
}

}  // namespace relurepair::testing
