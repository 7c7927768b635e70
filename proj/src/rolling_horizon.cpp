#include "avgcost/rolling_horizon.hpp"

#include <algorithm>
#include <cmath>

#include "avgcost/oracles.hpp"

namespace avgcost {

StationaryPolicy extract_policy(const IterationTrace& trace, std::size_t n) {
  if (n >= trace.records.size())
    throw ModelError("iterate " + std::to_string(n) + " not in trace of length " +
                     std::to_string(trace.records.size()));
  return trace.records[n].selector;
}

std::optional<double> stabilization_bound(const H2Certificate& cert, double c0, double beta,
                                          std::size_t n) {
  const double rho = cert.rho;
  const double rn = std::pow(rho, static_cast<double>(n));
  const double denom = cert.theta1 - (1.0 + c0 * rho) * rn;
  if (!(denom > 0.0)) return std::nullopt;
  return beta + (1.0 + c0 * rn * rho) * (beta + cert.theta2) / denom;
}

RollingHorizonReport evaluate_rolling_horizon(const FiniteMdp& m, const IterationTrace& trace,
                                              const std::vector<std::size_t>& n_list, double beta,
                                              const H2Certificate& cert, double c0) {
  RollingHorizonReport rep;
  rep.beta = beta;
  rep.c0 = c0;
  rep.cert = cert;
  std::vector<std::size_t> ns = n_list;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  for (std::size_t n : ns) {
    RollingRecord r;
    r.n = n;
    r.policy = extract_policy(trace, n);
    try {
      r.beta_n = average_cost(m, r.policy);
      r.gap = *r.beta_n - beta;
    } catch (const MultichainError&) {
      r.unichain = false;
    }
    r.bound = stabilization_bound(cert, c0, beta, n);
    rep.records.push_back(std::move(r));
  }
  for (std::size_t i = rep.records.size(); i-- > 0;) {
    const auto& r = rep.records[i];
    if (!r.unichain || !(std::abs(*r.gap) < kLockInTolerance)) break;
    rep.lock_in = r.n;
  }
  return rep;
}

bool RollingHorizonReport::bound_respected() const {
  for (const auto& r : records)
    if (r.bound && r.beta_n && *r.beta_n > *r.bound + 1e-12) return false;
  return true;
}

bool RollingHorizonReport::gaps_nonnegative(double tol) const {
  for (const auto& r : records)
    if (r.gap && *r.gap < -tol) return false;
  return true;
}

std::size_t stabilization_threshold(const H2Certificate& cert, double c0) {
  const double lead = 1.0 + c0 * cert.rho;
  std::size_t n = 0;
  double rn = 1.0;
  while (!(lead * rn < cert.theta1)) {
    rn *= cert.rho;
    ++n;
    if (n > 100'000) throw SolverError("stabilization threshold search did not terminate");
  }
  return n;
}

}  // namespace avgcost
