#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "avgcost/mdp.hpp"

namespace avgcost {

/// Kernel entries produced by P - delta*nu that fall in [-kClampBand, 0) are
/// treated as rounding noise and clamped to zero.
inline constexpr double kClampBand = 1e-14;

/// Small set B with minorizing measure nu and constant delta:
/// P(y|x,u) >= delta * nu(y) for all x in B, all admissible u, all y.
struct SmallSetSpec {
  std::vector<std::size_t> B;  // sorted, unique
  std::vector<double> nu;      // length n_states, zero off B
  double delta = 0.0;

  bool contains(std::size_t x) const;
  /// nu(f)
  double integrate(const Vector& f) const;
};

/// Invariant problems of s against m (empty when the small set is usable).
std::vector<std::string> validate_small_set(const FiniteMdp& m, const SmallSetSpec& s);

/// min over x in B and admissible u of P(B|x,u).
double min_mass_into(const FiniteMdp& m, const std::vector<std::size_t>& B);

/// delta = 0.9 * min_{x in B, u, y: nu(y) > 0} P(y|x,u) / nu(y), kept strictly
/// below min P(B|x,u). Throws ModelError when the minimum ratio is zero.
double auto_delta(const FiniteMdp& m, const std::vector<std::size_t>& B,
                  const std::vector<double>& nu);

/// Singleton small set {b} where b maximizes min_u P(b|b,u) (lowest index on
/// ties), nu the point mass at b, delta from auto_delta. Throws ModelError
/// when no singleton admits a minorization.
SmallSetSpec auto_small_set(const FiniteMdp& m);

/// ((1-delta)/delta) / (min_{x in B,u} P(B|x,u) - delta). Throws ModelError
/// when the gap is not positive.
double delta_circ(const FiniteMdp& m, const SmallSetSpec& s);

/// The split chain on (X x {0}) u (B x {1}).
///
/// Split states are numbered with (x,0) at index x for every base state,
/// followed by (b,1) for b in B in increasing order. The lifted chain keeps
/// the base action sets; rows out of the atom B x {1} do not depend on the
/// action.
class SplitChainModel {
 public:
  SplitChainModel(FiniteMdp base, SmallSetSpec s, FiniteMdp lifted,
                  std::optional<double> delta_circ);

  const FiniteMdp& base() const { return base_; }
  const SmallSetSpec& small_set() const { return small_set_; }
  /// Split kernel Q and split cost as a model over split states.
  const FiniteMdp& lifted() const { return lifted_; }
  /// Absent when min P(B|x,u) - delta is not positive.
  std::optional<double> delta_circ() const { return delta_circ_; }

  std::size_t n_base() const { return base_.n_states(); }
  std::size_t n_split() const { return lifted_.n_states(); }
  bool is_atom(std::size_t z) const { return z >= n_base(); }
  std::size_t base_state(std::size_t z) const;
  /// Index of (x,1); x must lie in B.
  std::size_t atom_index(std::size_t x) const;
  /// "x:i"
  std::string label(std::size_t z) const;

  /// Lifts a base policy to split states: (x,i) plays v(x).
  StationaryPolicy lift(const StationaryPolicy& v) const;

  /// Folds a split-indexed field: (1-delta) g(x,0) + delta g(x,1) on B,
  /// g(x,0) off B.
  ValueField fold(const ValueField& g) const;

 private:
  FiniteMdp base_;
  SmallSetSpec small_set_;
  FiniteMdp lifted_;
  std::optional<double> delta_circ_;
  std::vector<std::size_t> atom_of_;  // base state -> split index, or npos
};

/// Builds Q and the split cost literally from the level-0/level-1 transition
/// formulas and the atom exit law (1-delta)nu (+) delta nu. Throws ModelError
/// with the witness (x,u,y) when the minorization fails.
SplitChainModel build_split_chain(const FiniteMdp& m, const SmallSetSpec& s);

/// (1-delta)mu(x) at (x,0) and delta mu(x) at (x,1) on B; mu(x) at (x,0) off B.
Vector split_measure(const Vector& mu, const SmallSetSpec& s);

/// Inverse of split_measure: base mass at x is split_mu(x,0) + split_mu(x,1).
Vector marginalize(const Vector& split_mu, const SmallSetSpec& s, std::size_t n_base);

/// Expected visits to B x {0} before the first return to the atom, at every
/// split state, under the base policy v played on both levels.
ValueField expected_visits_before_atom(const SplitChainModel& sc, const StationaryPolicy& v);

/// E[sum_{k < tau} (split cost - beta)] up to the first return to the atom.
ValueField first_return_cost(const SplitChainModel& sc, const StationaryPolicy& v, double beta);

}  // namespace avgcost
