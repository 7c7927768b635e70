#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "avgcost/mdp.hpp"
#include "avgcost/split_chain.hpp"

namespace avgcost {

/// Stationary state-action frequencies, indexed by FiniteMdp::pair(x, k).
struct OccupationMeasure {
  Vector zeta;

  double mass(const FiniteMdp& m, std::size_t x, std::size_t k) const {
    return zeta[static_cast<Eigen::Index>(m.pair(x, k))];
  }
  /// State marginal pi_zeta.
  Vector state_marginal(const FiniteMdp& m) const;
  /// Largest violation of total mass and of the balance equations.
  double balance_error(const FiniteMdp& m) const;
};

enum class SolveMethod { lp, enumeration };

struct SolveReport {
  double beta = 0.0;
  StationaryPolicy policy;
  OccupationMeasure occupation;
  ValueField value;  // Poisson solution of policy, nu(value) = beta
  SolveMethod method = SolveMethod::lp;
};

/// Unique invariant law of the chain under v. Throws MultichainError when the
/// nullspace of (I - P_v)^T has dimension above one.
Vector stationary_distribution(const FiniteMdp& m, const StationaryPolicy& v);

/// pi_v(c_v).
double average_cost(const FiniteMdp& m, const StationaryPolicy& v);

/// Conditional law zeta(.|x) where the marginal is positive, lowest-index
/// action elsewhere.
StationaryPolicy disintegrate(const FiniteMdp& m, const OccupationMeasure& zeta);

struct LpSolveOptions {
  std::ostream* tableau_dump = nullptr;
  /// Anchor measure for the reported value field; point mass at state 0 when
  /// absent.
  const std::vector<double>* nu = nullptr;
};

/// Minimizes the mean cost over occupation measures. Throws SolverError if the
/// simplex fails (which a valid stochastic kernel rules out).
SolveReport optimal_average_cost_lp(const FiniteMdp& m, const LpSolveOptions& opt = {});

struct EnumeratedPolicy {
  StationaryPolicy policy;
  std::optional<double> cost;      // absent when multichain
  std::vector<double> class_costs; // one entry per closed class when multichain
  bool multichain() const { return !cost.has_value(); }
};

inline constexpr std::size_t kEnumerationLimit = 1'000'000;

/// Every deterministic policy in lexicographic order of the action indices
/// (last state varies fastest). Throws ModelError with the count when the
/// product of action-set sizes exceeds kEnumerationLimit.
std::vector<EnumeratedPolicy> enumerate_policies_bruteforce(const FiniteMdp& m);

/// Minimum over unichain entries. Throws SolverError when there is none.
SolveReport best_enumerated(const FiniteMdp& m, const std::vector<EnumeratedPolicy>& list);

/// (G, beta_v) with (I - P_v) G = c_v - beta_v and nu(G) = beta_v.
std::pair<ValueField, double> solve_poisson(const FiniteMdp& m, const StationaryPolicy& v,
                                            const std::vector<double>& nu);
std::pair<ValueField, double> solve_poisson(const FiniteMdp& m, const StationaryPolicy& v,
                                            const SmallSetSpec& s);

/// Finite first-passage cost to B from every state under v (c-stability
/// proxy): false entries mark states from which B is not reached.
std::vector<bool> reaches_small_set(const FiniteMdp& m, const StationaryPolicy& v,
                                    const SmallSetSpec& s);

}  // namespace avgcost
