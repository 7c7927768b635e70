#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "avgcost/mdp.hpp"

namespace avgcost {

enum class LpStatus { optimal, infeasible, unbounded, pivot_limit };

struct LpOptions {
  double eps = 1e-11;                   // pivot / reduced-cost tolerance
  double feasibility_tol = 1e-9;        // phase-one objective accepted as zero
  std::size_t max_pivots = 5'000'000;
  std::ostream* tableau_dump = nullptr; // pivot log and final tableau, for audit
};

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Vector x;
  double objective = 0.0;
  std::vector<std::size_t> basis;  // basic column per constraint row
  std::size_t pivots = 0;
};

/// min c'x  s.t.  A x = b, x >= 0, by a dense two-phase tableau simplex with
/// Bland's rule for both the entering and the leaving variable. Redundant
/// equality rows are tolerated (their artificial stays basic at level zero).
LpResult simplex_standard_form(const Matrix& a, const Vector& b, const Vector& c,
                               const LpOptions& options = {});

}  // namespace avgcost
