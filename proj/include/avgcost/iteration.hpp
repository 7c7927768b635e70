#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "avgcost/mdp.hpp"
#include "avgcost/split_chain.hpp"

namespace avgcost {

struct StopRule {
  std::size_t max_iters = 100'000;
  double span_tol = 1e-10;
  std::size_t snapshot_every = 0;  // 0: no intermediate snapshots
  double divergence_bound = 1e12;
};

/// Record n describes the iterate V_n: the offset subtracted when producing
/// V_{n+1}, span(V_{n+1} - V_n), the Bellman residual sup|V_{n+1} - V_n| at
/// that offset, and the minimizing selector of V_n.
struct IterationRecord {
  std::size_t n = 0;
  std::optional<double> offset;
  double span = 0.0;
  double residual = 0.0;
  StationaryPolicy selector;
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  std::vector<std::pair<std::size_t, ValueField>> snapshots;  // (n, V_n)
  ValueField final_field;  // V_N with N = records.size()
  bool converged = false;
  IndexSpace space = IndexSpace::base;

  std::size_t iterations() const { return records.size(); }
  /// Snapshot of V_n, or nullptr when n was not recorded.
  const ValueField* field_at(std::size_t n) const;
};

/// Phi_{n+1} = min_u [c - beta + P_u Phi_n]. Throws DivergenceError when the
/// field blows past stop.divergence_bound, or when successive differences
/// settle on a nonzero constant (the signature of a wrong beta).
IterationTrace value_iteration(const FiniteMdp& m, double beta, const ValueField& phi0,
                               const StopRule& stop = {});

/// Value iteration on the split chain, written with the three update rows
/// (B x {0}, complement x {0}, atom). The initial split field is
/// V0/(1-delta) on B x {0}, V0 off B and 0 on the atom, so that fold()
/// recovers V0. Selectors are indexed by split state.
IterationTrace split_value_iteration(const SplitChainModel& sc, double beta, const ValueField& v0,
                                     const StopRule& stop = {});

enum class OffsetKind { nu, min, anchor };

struct OffsetRule {
  OffsetKind kind = OffsetKind::min;
  std::vector<double> nu;  // for OffsetKind::nu
  std::size_t anchor = 0;  // for OffsetKind::anchor

  double operator()(const Vector& v) const;
};

/// V_{n+1} = S V_n - offset(V_n), S f = min_u [c + P_u f]. Stops once both the
/// span and the sup norm of V_{n+1} - V_n are below span_tol, so that the
/// offset has settled and not just the shape of the field.
IterationTrace relative_value_iteration(const FiniteMdp& m, const OffsetRule& rule,
                                        const ValueField& v0, const StopRule& stop = {});

IterationTrace rvi_nu(const FiniteMdp& m, const std::vector<double>& nu, const ValueField& v0,
                      const StopRule& stop = {});
IterationTrace rvi_min(const FiniteMdp& m, const ValueField& v0, const StopRule& stop = {});
/// Rejects xhat outside B with ModelError.
IterationTrace rvi_anchor(const FiniteMdp& m, const SmallSetSpec& s, std::size_t xhat,
                          const ValueField& v0, const StopRule& stop = {});

/// sup_x |V(x) - min_u [c(x,u) - beta + P_u V(x)]|.
double acoe_residual(const FiniteMdp& m, const ValueField& v, double beta);

/// min_u c(x,u) >= theta1 V*(x) - theta2 with slack recorded per state.
struct H2Certificate {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double rho = 1.0;
  Vector slack;
};

/// Certificate for the given constants, or nullopt when some slack is negative.
std::optional<H2Certificate> validate_h2(const FiniteMdp& m, const ValueField& vstar,
                                         double theta1, double theta2);

/// Grid theta1 values tried by check_h2, largest first.
const std::vector<double>& h2_theta_grid();

/// First grid theta1 whose certificate (with the smallest admissible theta2)
/// validates. Throws SolverError at the bottom of the grid.
H2Certificate check_h2(const FiniteMdp& m, const ValueField& vstar);

struct EnvelopeFit {
  double c0 = 0.0;          // smallest constant making the envelope hold on the trace
  double decay_rate = 0.0;  // regression slope of log|Phi_n - V* - limit| (diagnostic)
  std::vector<std::size_t> checked;  // iterate indices used
  bool holds = false;
  std::string note;
};

/// Fits C0 in |Phi_n - V*| <= C0 (1 + rho^n V*) over every snapshot with
/// n >= 1 and certifies it. Requires 1 + rho^n V* > 0 on the checked range.
EnvelopeFit fit_envelope(const IterationTrace& trace, const ValueField& vstar,
                         const H2Certificate& cert);

}  // namespace avgcost
