#include "avgcost/oracles.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "avgcost/linalg.hpp"
#include "avgcost/simplex.hpp"

namespace avgcost {

Vector OccupationMeasure::state_marginal(const FiniteMdp& m) const {
  Vector pi = Vector::Zero(static_cast<Eigen::Index>(m.n_states()));
  for (std::size_t x = 0; x < m.n_states(); ++x)
    for (std::size_t k = 0; k < m.n_actions(x); ++k) pi[static_cast<Eigen::Index>(x)] += mass(m, x, k);
  return pi;
}

double OccupationMeasure::balance_error(const FiniteMdp& m) const {
  Vector inflow = Vector::Zero(static_cast<Eigen::Index>(m.n_states()));
  for (std::size_t x = 0; x < m.n_states(); ++x)
    for (std::size_t k = 0; k < m.n_actions(x); ++k) {
      const double z = mass(m, x, k);
      const auto& r = m.sparse_row(x, k);
      for (std::size_t i = 0; i < r.targets.size(); ++i)
        inflow[static_cast<Eigen::Index>(r.targets[i])] += z * r.probs[i];
    }
  const Vector pi = state_marginal(m);
  return std::max((pi - inflow).cwiseAbs().maxCoeff(), std::abs(zeta.sum() - 1.0));
}

Vector stationary_distribution(const FiniteMdp& m, const StationaryPolicy& v) {
  const Matrix p = policy_kernel(m, v);
  const auto n = p.rows();
  const Matrix a = (Matrix::Identity(n, n) - p).transpose();
  if (static_cast<Eigen::Index>(numerical_rank(a)) < n - 1) throw MultichainError("multichain under policy");
  Matrix stacked(n + 1, n);
  stacked << a, Matrix::Ones(1, n);
  Vector rhs = Vector::Zero(n + 1);
  rhs[n] = 1.0;
  return stacked.colPivHouseholderQr().solve(rhs);
}

double average_cost(const FiniteMdp& m, const StationaryPolicy& v) {
  return stationary_distribution(m, v).dot(policy_cost(m, v));
}

StationaryPolicy disintegrate(const FiniteMdp& m, const OccupationMeasure& zeta) {
  std::vector<std::vector<double>> w(m.n_states());
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    w[x].assign(m.n_actions(x), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < m.n_actions(x); ++k) total += std::max(0.0, zeta.mass(m, x, k));
    if (total < 1e-12) {
      w[x][0] = 1.0;
      continue;
    }
    for (std::size_t k = 0; k < m.n_actions(x); ++k) w[x][k] = std::max(0.0, zeta.mass(m, x, k)) / total;
  }
  return StationaryPolicy::randomized(std::move(w));
}

namespace {

std::vector<double> point_mass(std::size_t n, std::size_t at) {
  std::vector<double> nu(n, 0.0);
  nu[at] = 1.0;
  return nu;
}

// Howard improvement from an optimal policy. Only switches on a strict gain,
// so actions on the recurrent support are kept and the result satisfies the
// optimality equation at transient states too.
StationaryPolicy settle_completion(const FiniteMdp& m, StationaryPolicy v,
                                   const std::vector<double>& nu) {
  for (std::size_t round = 0; round < 10 * m.n_states() + 10; ++round) {
    std::pair<ValueField, double> g;
    try {
      g = solve_poisson(m, v, nu);
    } catch (const MultichainError&) {
      return v;
    }
    std::vector<std::size_t> next = v.actions();
    bool changed = false;
    for (std::size_t x = 0; x < m.n_states(); ++x) {
      const std::size_t cur = next[x];
      double best = m.cost(x, cur) + m.expect(x, cur, g.first.values);
      for (std::size_t k = 0; k < m.n_actions(x); ++k) {
        const double q = m.cost(x, k) + m.expect(x, k, g.first.values);
        if (q < best - 1e-10) {
          best = q;
          next[x] = k;
          changed = true;
        }
      }
    }
    if (!changed) return v;
    v = StationaryPolicy::deterministic(std::move(next));
  }
  return v;
}

}  // namespace

SolveReport optimal_average_cost_lp(const FiniteMdp& m, const LpSolveOptions& opt) {
  require_valid(m);
  const std::size_t n = m.n_states();
  const std::size_t np = m.n_pairs();
  // Balance rows for states 0..n-2 (the last one is implied) plus normalization.
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(np));
  Vector b = Vector::Zero(static_cast<Eigen::Index>(n));
  Vector c(static_cast<Eigen::Index>(np));
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t k = 0; k < m.n_actions(x); ++k) {
      const auto j = static_cast<Eigen::Index>(m.pair(x, k));
      c[j] = m.cost(x, k);
      if (x + 1 < n) a(static_cast<Eigen::Index>(x), j) += 1.0;
      const auto& r = m.sparse_row(x, k);
      for (std::size_t i = 0; i < r.targets.size(); ++i)
        if (r.targets[i] + 1 < n) a(static_cast<Eigen::Index>(r.targets[i]), j) -= r.probs[i];
      a(static_cast<Eigen::Index>(n - 1), j) = 1.0;
    }
  }
  b[static_cast<Eigen::Index>(n - 1)] = 1.0;

  LpOptions lp;
  lp.tableau_dump = opt.tableau_dump;
  const LpResult res = simplex_standard_form(a, b, c, lp);
  if (res.status != LpStatus::optimal) throw SolverError("occupation-measure LP did not reach an optimum");

  SolveReport report;
  report.method = SolveMethod::lp;
  report.occupation.zeta = res.x.cwiseMax(0.0);
  report.beta = c.dot(report.occupation.zeta);

  // Deterministic policy: the heaviest action of the conditional law.
  const StationaryPolicy cond = disintegrate(m, report.occupation);
  std::vector<std::size_t> choice(n, 0);
  for (std::size_t x = 0; x < n; ++x) {
    double best = -1.0;
    for (std::size_t k = 0; k < m.n_actions(x); ++k)
      if (cond.weight(x, k) > best + 1e-12) {
        best = cond.weight(x, k);
        choice[x] = k;
      }
  }
  const std::vector<double> nu = opt.nu ? *opt.nu : point_mass(n, 0);
  report.policy = settle_completion(m, StationaryPolicy::deterministic(std::move(choice)), nu);
  try {
    report.value = solve_poisson(m, report.policy, nu).first;
  } catch (const MultichainError&) {
    report.value = ValueField();
  }
  return report;
}

std::vector<EnumeratedPolicy> enumerate_policies_bruteforce(const FiniteMdp& m) {
  require_valid(m);
  const std::size_t n = m.n_states();
  double count = 1.0;
  for (std::size_t x = 0; x < n; ++x) count *= static_cast<double>(m.n_actions(x));
  if (count > static_cast<double>(kEnumerationLimit)) {
    std::ostringstream os;
    os << "refusing to enumerate " << std::fixed << std::setprecision(0) << count << " policies (limit " << kEnumerationLimit << ")";
    throw ModelError(os.str());
  }

  std::vector<EnumeratedPolicy> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> choice(n, 0);
  while (true) {
    EnumeratedPolicy e;
    e.policy = StationaryPolicy::deterministic(choice);
    try {
      e.cost = average_cost(m, e.policy);
    } catch (const MultichainError&) {
      const Matrix p = policy_kernel(m, e.policy);
      const Vector cv = policy_cost(m, e.policy);
      for (const auto& cls : recurrent_classes(p)) {
        const auto k = static_cast<Eigen::Index>(cls.size());
        Matrix sub(k, k);
        Vector csub(k);
        for (Eigen::Index i = 0; i < k; ++i) {
          csub[i] = cv[static_cast<Eigen::Index>(cls[static_cast<std::size_t>(i)])];
          for (Eigen::Index j = 0; j < k; ++j)
            sub(i, j) = p(static_cast<Eigen::Index>(cls[static_cast<std::size_t>(i)]),
                          static_cast<Eigen::Index>(cls[static_cast<std::size_t>(j)]));
        }
        Matrix stacked(k + 1, k);
        stacked << (Matrix::Identity(k, k) - sub).transpose(), Matrix::Ones(1, k);
        Vector rhs = Vector::Zero(k + 1);
        rhs[k] = 1.0;
        const Vector pi = stacked.colPivHouseholderQr().solve(rhs);
        e.class_costs.push_back(pi.dot(csub));
      }
    }
    out.push_back(std::move(e));

    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++choice[pos] < m.n_actions(pos)) break;
      choice[pos] = 0;
      if (pos == 0) return out;
    }
    if (n == 0) return out;
  }
}

SolveReport best_enumerated(const FiniteMdp& m, const std::vector<EnumeratedPolicy>& list) {
  const EnumeratedPolicy* best = nullptr;
  for (const auto& e : list)
    if (e.cost && (!best || *e.cost < *best->cost - kArgminTolerance)) best = &e;
  if (!best) throw SolverError("no unichain deterministic policy");
  SolveReport r;
  r.method = SolveMethod::enumeration;
  r.beta = *best->cost;
  r.policy = best->policy;
  const Vector pi = stationary_distribution(m, r.policy);
  r.occupation.zeta = Vector::Zero(static_cast<Eigen::Index>(m.n_pairs()));
  for (std::size_t x = 0; x < m.n_states(); ++x)
    r.occupation.zeta[static_cast<Eigen::Index>(m.pair(x, r.policy.action(x)))] =
        pi[static_cast<Eigen::Index>(x)];
  r.value = solve_poisson(m, r.policy, point_mass(m.n_states(), 0)).first;
  return r;
}

std::pair<ValueField, double> solve_poisson(const FiniteMdp& m, const StationaryPolicy& v,
                                            const std::vector<double>& nu) {
  if (nu.size() != m.n_states()) throw ModelError("anchor measure has the wrong length");
  const double beta = average_cost(m, v);
  const Matrix p = policy_kernel(m, v);
  const Vector cv = policy_cost(m, v);
  const auto n = p.rows();
  Matrix stacked(n + 1, n);
  stacked.topRows(n) = Matrix::Identity(n, n) - p;
  for (Eigen::Index j = 0; j < n; ++j) stacked(n, j) = nu[static_cast<std::size_t>(j)];
  Vector rhs(n + 1);
  rhs.head(n) = cv.array() - beta;
  rhs[n] = beta;
  Vector g = stacked.colPivHouseholderQr().solve(rhs);
  return {ValueField(std::move(g)), beta};
}

std::pair<ValueField, double> solve_poisson(const FiniteMdp& m, const StationaryPolicy& v,
                                            const SmallSetSpec& s) {
  return solve_poisson(m, v, s.nu);
}

std::vector<bool> reaches_small_set(const FiniteMdp& m, const StationaryPolicy& v,
                                    const SmallSetSpec& s) {
  std::vector<bool> target(m.n_states(), false);
  for (std::size_t b : s.B) target[b] = true;
  return reaches(policy_kernel(m, v), target);
}

}  // namespace avgcost
