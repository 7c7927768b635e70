#include "avgcost/iteration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace avgcost {

namespace {

// Sup-norm step still above this once the span has converged means the
// iterates are drifting linearly.
constexpr double kDriftTolerance = 1e-6;

void check_field(const FiniteMdp& m, const ValueField& f) {
  if (f.size() != m.n_states())
    throw ModelError("initial field has length " + std::to_string(f.size()) + ", expected " +
                     std::to_string(m.n_states()));
  if (!f.all_finite()) throw ModelError("initial field is not finite");
}

void guard(const Vector& next, const StopRule& stop, const char* what) {
  if (!next.allFinite() || next.cwiseAbs().maxCoeff() > stop.divergence_bound)
    throw DivergenceError(std::string(what) + ": iterates exceeded the divergence bound");
}

void maybe_snapshot(IterationTrace& t, const StopRule& stop, std::size_t n, const Vector& v) {
  if (stop.snapshot_every > 0 && n % stop.snapshot_every == 0)
    t.snapshots.emplace_back(n, ValueField(v, t.space));
}

}  // namespace

const ValueField* IterationTrace::field_at(std::size_t n) const {
  if (n == records.size()) return &final_field;
  for (const auto& [k, f] : snapshots)
    if (k == n) return &f;
  return nullptr;
}

IterationTrace value_iteration(const FiniteMdp& m, double beta, const ValueField& phi0,
                               const StopRule& stop) {
  require_valid(m);
  check_field(m, phi0);
  IterationTrace t;
  Vector phi = phi0.values;
  Vector next;
  std::vector<std::size_t> sel;
  for (std::size_t n = 0; n < stop.max_iters; ++n) {
    bellman_min_into(m, phi, beta, next, sel);
    const Vector diff = next - phi;
    IterationRecord r;
    r.n = n;
    r.span = span(diff);
    r.residual = diff.cwiseAbs().maxCoeff();
    r.selector = StationaryPolicy::deterministic(sel);
    t.records.push_back(std::move(r));
    maybe_snapshot(t, stop, n, phi);
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > stop.divergence_bound)
      throw DivergenceError("value iteration diverged: beta likely incorrect");
    phi.swap(next);
    if (t.records.back().span < stop.span_tol) {
      if (t.records.back().residual > kDriftTolerance) {
        std::ostringstream os;
        os << "value iteration drifts by " << diff.mean() << " per step: beta likely incorrect";
        throw DivergenceError(os.str());
      }
      t.converged = true;
      break;
    }
  }
  maybe_snapshot(t, stop, t.records.size(), phi);
  t.final_field = ValueField(phi);
  return t;
}

IterationTrace split_value_iteration(const SplitChainModel& sc, double beta, const ValueField& v0,
                                     const StopRule& stop) {
  const FiniteMdp& base = sc.base();
  const SmallSetSpec& s = sc.small_set();
  require_valid(base);
  check_field(base, v0);
  const double delta = s.delta;
  const std::size_t nb = sc.n_base();
  const std::size_t nz = sc.n_split();

  IterationTrace t;
  t.space = IndexSpace::split;
  Vector phi = Vector::Zero(static_cast<Eigen::Index>(nz));
  for (std::size_t x = 0; x < nb; ++x)
    phi[static_cast<Eigen::Index>(x)] = s.contains(x) ? v0[x] / (1.0 - delta) : v0[x];

  Vector next(static_cast<Eigen::Index>(nz));
  Vector smin;
  std::vector<std::size_t> sel;
  for (std::size_t n = 0; n < stop.max_iters; ++n) {
    const Vector folded = sc.fold(ValueField(phi, IndexSpace::split)).values;
    const double nu_f = s.integrate(folded);
    bellman_min_into(base, folded, 0.0, smin, sel);
    std::vector<std::size_t> split_sel(nz, 0);
    for (std::size_t x = 0; x < nb; ++x) {
      const auto i = static_cast<Eigen::Index>(x);
      split_sel[x] = sel[x];
      if (s.contains(x))
        next[i] = -beta + smin[i] / (1.0 - delta) - delta / (1.0 - delta) * nu_f;
      else
        next[i] = -beta + smin[i];
    }
    for (std::size_t z = nb; z < nz; ++z) next[static_cast<Eigen::Index>(z)] = -beta + nu_f;

    const Vector diff = next - phi;
    IterationRecord r;
    r.n = n;
    r.span = span(diff);
    r.residual = diff.cwiseAbs().maxCoeff();
    r.selector = StationaryPolicy::deterministic(std::move(split_sel));
    t.records.push_back(std::move(r));
    maybe_snapshot(t, stop, n, phi);
    guard(next, stop, "split value iteration");
    phi.swap(next);
    if (t.records.back().span < stop.span_tol) {
      if (t.records.back().residual > kDriftTolerance)
        throw DivergenceError("split value iteration drifts: beta likely incorrect");
      t.converged = true;
      break;
    }
  }
  maybe_snapshot(t, stop, t.records.size(), phi);
  t.final_field = ValueField(phi, IndexSpace::split);
  return t;
}

double OffsetRule::operator()(const Vector& v) const {
  switch (kind) {
    case OffsetKind::nu: {
      double acc = 0.0;
      for (std::size_t i = 0; i < nu.size(); ++i)
        if (nu[i] != 0.0) acc += nu[i] * v[static_cast<Eigen::Index>(i)];
      return acc;
    }
    case OffsetKind::min:
      return v.minCoeff();
    case OffsetKind::anchor:
      return v[static_cast<Eigen::Index>(anchor)];
  }
  return 0.0;
}

IterationTrace relative_value_iteration(const FiniteMdp& m, const OffsetRule& rule,
                                        const ValueField& v0, const StopRule& stop) {
  require_valid(m);
  check_field(m, v0);
  if (rule.kind == OffsetKind::nu) {
    if (rule.nu.size() != m.n_states()) throw ModelError("offset measure has the wrong length");
    double total = 0.0;
    for (double w : rule.nu) {
      if (w < 0.0 || !std::isfinite(w)) throw ModelError("offset measure has a negative entry");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-10) throw ModelError("offset measure does not sum to 1");
  }
  if (rule.kind == OffsetKind::anchor && rule.anchor >= m.n_states())
    throw ModelError("anchor state out of range");

  IterationTrace t;
  Vector v = v0.values;
  Vector next;
  std::vector<std::size_t> sel;
  for (std::size_t n = 0; n < stop.max_iters; ++n) {
    const double o = rule(v);
    bellman_min_into(m, v, o, next, sel);
    const Vector diff = next - v;
    IterationRecord r;
    r.n = n;
    r.offset = o;
    r.span = span(diff);
    r.residual = diff.cwiseAbs().maxCoeff();
    r.selector = StationaryPolicy::deterministic(sel);
    t.records.push_back(std::move(r));
    maybe_snapshot(t, stop, n, v);
    guard(next, stop, "relative value iteration");
    v.swap(next);
    if (t.records.back().span < stop.span_tol && t.records.back().residual < stop.span_tol) {
      t.converged = true;
      break;
    }
  }
  maybe_snapshot(t, stop, t.records.size(), v);
  t.final_field = ValueField(v);
  return t;
}

IterationTrace rvi_nu(const FiniteMdp& m, const std::vector<double>& nu, const ValueField& v0,
                      const StopRule& stop) {
  OffsetRule rule;
  rule.kind = OffsetKind::nu;
  rule.nu = nu;
  return relative_value_iteration(m, rule, v0, stop);
}

IterationTrace rvi_min(const FiniteMdp& m, const ValueField& v0, const StopRule& stop) {
  return relative_value_iteration(m, OffsetRule{OffsetKind::min, {}, 0}, v0, stop);
}

IterationTrace rvi_anchor(const FiniteMdp& m, const SmallSetSpec& s, std::size_t xhat,
                          const ValueField& v0, const StopRule& stop) {
  if (!s.contains(xhat))
    throw ModelError("anchor state " + std::to_string(xhat) + " is not in the small set");
  return relative_value_iteration(m, OffsetRule{OffsetKind::anchor, {}, xhat}, v0, stop);
}

double acoe_residual(const FiniteMdp& m, const ValueField& v, double beta) {
  Vector out;
  std::vector<std::size_t> sel;
  bellman_min_into(m, v.values, beta, out, sel);
  return (v.values - out).cwiseAbs().maxCoeff();
}

std::optional<H2Certificate> validate_h2(const FiniteMdp& m, const ValueField& vstar,
                                         double theta1, double theta2) {
  if (!(theta1 > 0.0 && theta1 < 1.0)) return std::nullopt;
  H2Certificate c;
  c.theta1 = theta1;
  c.theta2 = theta2;
  c.rho = 1.0 - theta1;
  c.slack.resize(static_cast<Eigen::Index>(m.n_states()));
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    double cmin = m.cost(x, 0);
    for (std::size_t k = 1; k < m.n_actions(x); ++k) cmin = std::min(cmin, m.cost(x, k));
    const double sl = cmin - theta1 * vstar[x] + theta2;
    if (!(sl >= 0.0)) return std::nullopt;
    c.slack[static_cast<Eigen::Index>(x)] = sl;
  }
  return c;
}

const std::vector<double>& h2_theta_grid() {
  static const std::vector<double> grid{0.999, 0.99, 0.9, 0.75, 0.5, 0.25, 0.1,
                                        1e-2,  1e-3, 1e-4, 1e-5, 1e-6};
  return grid;
}

H2Certificate check_h2(const FiniteMdp& m, const ValueField& vstar) {
  if (vstar.size() != m.n_states()) throw ModelError("V* has the wrong length");
  for (double theta1 : h2_theta_grid()) {
    double theta2 = 0.0;
    for (std::size_t x = 0; x < m.n_states(); ++x) {
      double cmin = m.cost(x, 0);
      for (std::size_t k = 1; k < m.n_actions(x); ++k) cmin = std::min(cmin, m.cost(x, k));
      theta2 = std::max(theta2, theta1 * vstar[x] - cmin);
    }
    if (auto c = validate_h2(m, vstar, theta1, theta2)) return *c;
  }
  throw SolverError("H2 fit degenerate: theta1 floor reached");
}

EnvelopeFit fit_envelope(const IterationTrace& trace, const ValueField& vstar,
                         const H2Certificate& cert) {
  EnvelopeFit fit;
  std::vector<std::pair<std::size_t, const Vector*>> fields;
  for (const auto& [n, f] : trace.snapshots)
    if (n >= 1) fields.emplace_back(n, &f.values);
  if (fields.empty() || fields.back().first != trace.records.size())
    fields.emplace_back(trace.records.size(), &trace.final_field.values);
  if (fields.empty() || fields.front().first == 0) {
    fit.note = "no iterates with n >= 1";
    return fit;
  }

  // Limit constant: Phi_N - V* at the last recorded iterate.
  const Vector limit = *fields.back().second - vstar.values;
  const double k = limit.mean();
  std::vector<double> xs, ys;
  for (const auto& [n, f] : fields) {
    const Vector err = (*f - vstar.values).cwiseAbs();
    const double rn = std::pow(cert.rho, static_cast<double>(n));
    for (Eigen::Index x = 0; x < err.size(); ++x) {
      const double w = 1.0 + rn * vstar.values[x];
      if (!(w > 0.0)) {
        fit.note = "envelope weight 1 + rho^n V* not positive";
        return fit;
      }
      fit.c0 = std::max(fit.c0, err[x] / w);
    }
    fit.checked.push_back(n);
    const double d = (*f - vstar.values - Vector::Constant(err.size(), k)).cwiseAbs().maxCoeff();
    if (d > 1e-14) {
      xs.push_back(static_cast<double>(n));
      ys.push_back(std::log(d));
    }
  }
  if (xs.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx > 0) fit.decay_rate = std::exp(sxy / sxx);
  }

  fit.holds = true;
  for (const auto& [n, f] : fields) {
    const double rn = std::pow(cert.rho, static_cast<double>(n));
    for (Eigen::Index x = 0; x < f->size(); ++x)
      if (std::abs((*f)[x] - vstar.values[x]) > fit.c0 * (1.0 + rn * vstar.values[x]) * (1 + 1e-12) + 1e-15)
        fit.holds = false;
  }
  return fit;
}

}  // namespace avgcost
