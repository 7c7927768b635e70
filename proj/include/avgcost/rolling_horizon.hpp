#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "avgcost/iteration.hpp"
#include "avgcost/mdp.hpp"

namespace avgcost {

/// Selector v_n recorded in the trace. Throws ModelError when n is out of range.
StationaryPolicy extract_policy(const IterationTrace& trace, std::size_t n);

struct RollingRecord {
  std::size_t n = 0;
  StationaryPolicy policy;
  bool unichain = true;
  std::optional<double> beta_n;  // average cost of v_n, absent when multichain
  std::optional<double> bound;   // stabilization bound, absent when its denominator is <= 0
  std::optional<double> gap;     // beta_n - beta
};

struct RollingHorizonReport {
  double beta = 0.0;
  double c0 = 0.0;
  H2Certificate cert;
  std::vector<RollingRecord> records;  // sorted by n
  /// Smallest listed n from which every later record is unichain with gap
  /// below kLockInTolerance.
  std::optional<std::size_t> lock_in;

  bool bound_respected() const;
  bool gaps_nonnegative(double tol = 1e-9) const;
};

inline constexpr double kLockInTolerance = 1e-8;

/// beta + (1 + c0 rho^{n+1})(beta + theta2) / (theta1 - (1 + c0 rho) rho^n),
/// absent when the denominator is not positive.
std::optional<double> stabilization_bound(const H2Certificate& cert, double c0, double beta,
                                          std::size_t n);

/// Evaluates each v_n for n in n_list against the optimal beta.
RollingHorizonReport evaluate_rolling_horizon(const FiniteMdp& m, const IterationTrace& trace,
                                              const std::vector<std::size_t>& n_list, double beta,
                                              const H2Certificate& cert, double c0);

/// Smallest N0 with (1 + c0 rho) rho^N0 < theta1.
std::size_t stabilization_threshold(const H2Certificate& cert, double c0);

}  // namespace avgcost
