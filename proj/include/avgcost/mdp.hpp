#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avgcost/errors.hpp"

namespace avgcost {

/// Absolute tolerance used when comparing candidate minimizers. Ties inside
/// this band resolve to the lowest action index.
inline constexpr double kArgminTolerance = 1e-12;
inline constexpr double kRowSumTolerance = 1e-12;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class IndexSpace { base, split };

/// A real function on the states of a model (or of its split chain).
struct ValueField {
  Vector values;
  IndexSpace space = IndexSpace::base;

  ValueField() = default;
  explicit ValueField(Vector v, IndexSpace s = IndexSpace::base)
      : values(std::move(v)), space(s) {}

  static ValueField zeros(std::size_t n, IndexSpace s = IndexSpace::base) {
    return ValueField(Vector::Zero(static_cast<Eigen::Index>(n)), s);
  }
  static ValueField from(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return ValueField(std::move(out));
  }

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  double operator[](std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }
  bool all_finite() const { return values.allFinite(); }
};

/// Nonzero entries of one kernel row.
struct SparseRow {
  std::vector<std::size_t> targets;
  std::vector<double> probs;
};

/// Finite controlled Markov chain with per-state action sets, a transition
/// kernel P(y|x,u) and running cost c(x,u).
///
/// Construction only checks shapes. Stochasticity, admissibility and the
/// cost floor are reported by validate_mdp() so that broken models can still
/// be loaded and diagnosed; solvers call require_valid() first.
class FiniteMdp {
 public:
  FiniteMdp() = default;

  /// kernel[x][k] is the distribution over next states under the k-th action
  /// of state x; cost[x][k] the matching running cost.
  FiniteMdp(std::vector<std::vector<std::string>> action_labels,
            std::vector<std::vector<std::vector<double>>> kernel,
            std::vector<std::vector<double>> cost, double cost_floor = 1.0);

  std::size_t n_states() const { return labels_.size(); }
  std::size_t n_actions(std::size_t x) const { return labels_[x].size(); }
  std::size_t n_pairs() const { return rows_.size(); }
  double cost_floor() const { return cost_floor_; }

  const std::vector<std::string>& action_labels(std::size_t x) const { return labels_[x]; }
  std::span<const double> row(std::size_t x, std::size_t k) const { return rows_[pair(x, k)]; }
  const SparseRow& sparse_row(std::size_t x, std::size_t k) const { return sparse_[pair(x, k)]; }
  double cost(std::size_t x, std::size_t k) const { return costs_[pair(x, k)]; }
  double prob(std::size_t x, std::size_t k, std::size_t y) const { return rows_[pair(x, k)][y]; }

  /// Flat index of the state-action pair (x, k).
  std::size_t pair(std::size_t x, std::size_t k) const { return offsets_[x] + k; }

  /// Sum over y of P(y|x,k) f(y).
  double expect(std::size_t x, std::size_t k, const Vector& f) const;

  /// Index of the action with this label at x, or throws ModelError.
  std::size_t action_index(std::size_t x, const std::string& label) const;

  /// Copy of the model with a different floor (the kernel is unchanged).
  FiniteMdp with_cost_floor(double floor) const;

 private:
  std::vector<std::vector<std::string>> labels_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<double>> rows_;
  std::vector<SparseRow> sparse_;
  std::vector<double> costs_;
  double cost_floor_ = 1.0;
};

/// Stationary Markov policy, deterministic or randomized.
class StationaryPolicy {
 public:
  StationaryPolicy() = default;

  static StationaryPolicy deterministic(std::vector<std::size_t> choice);
  static StationaryPolicy randomized(std::vector<std::vector<double>> weights);

  bool is_deterministic() const { return deterministic_; }
  std::size_t n_states() const { return deterministic_ ? choice_.size() : weights_.size(); }

  /// Chosen action at x. Throws ModelError for randomized policies.
  std::size_t action(std::size_t x) const;
  const std::vector<std::size_t>& actions() const;

  /// Probability of the k-th action at x.
  double weight(std::size_t x, std::size_t k) const;

  /// Admissibility and normalization problems against m, empty when valid.
  std::vector<std::string> check(const FiniteMdp& m) const;

  bool operator==(const StationaryPolicy& other) const = default;

 private:
  bool deterministic_ = true;
  std::vector<std::size_t> choice_;
  std::vector<std::vector<double>> weights_;
};

struct Violation {
  std::string location;
  std::string message;
};

/// Every invariant violation of m. Never throws.
std::vector<Violation> validate_mdp(const FiniteMdp& m);

/// Throws ModelError listing the violations when validate_mdp() is non-empty.
void require_valid(const FiniteMdp& m);

/// Throws ModelError when the policy does not fit the model.
void require_admissible(const FiniteMdp& m, const StationaryPolicy& v);

/// (P_v f)(x) = sum_u v(u|x) sum_y P(y|x,u) f(y).
ValueField apply_kernel(const FiniteMdp& m, const StationaryPolicy& v, const ValueField& f);

/// Dense transition matrix and running cost of the chain under v.
Matrix policy_kernel(const FiniteMdp& m, const StationaryPolicy& v);
Vector policy_cost(const FiniteMdp& m, const StationaryPolicy& v);

struct BellmanResult {
  ValueField field;
  StationaryPolicy selector;
};

/// One application of f -> min_u [c(x,u) - beta + P_u f(x)] with the
/// minimizing selector (lowest index on ties).
BellmanResult bellman_min(const FiniteMdp& m, const ValueField& f, double beta);

/// Same as bellman_min on raw vectors; used by the iteration loops.
void bellman_min_into(const FiniteMdp& m, const Vector& f, double beta, Vector& out,
                      std::vector<std::size_t>& selector);

/// max f - min f.
double span(const Vector& f);

}  // namespace avgcost
