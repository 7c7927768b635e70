#include "avgcost/split_chain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "avgcost/linalg.hpp"

namespace avgcost {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

void require_small_set(const FiniteMdp& m, const SmallSetSpec& s) {
  const auto problems = validate_small_set(m, s);
  if (problems.empty()) return;
  std::string msg = "invalid small set:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ModelError(msg);
}

}  // namespace

bool SmallSetSpec::contains(std::size_t x) const {
  return std::binary_search(B.begin(), B.end(), x);
}

double SmallSetSpec::integrate(const Vector& f) const {
  double acc = 0.0;
  for (std::size_t b : B) acc += nu[b] * f[static_cast<Eigen::Index>(b)];
  return acc;
}

std::vector<std::string> validate_small_set(const FiniteMdp& m, const SmallSetSpec& s) {
  std::vector<std::string> out;
  const std::size_t n = m.n_states();
  if (s.B.empty()) out.push_back("B is empty");
  if (!std::is_sorted(s.B.begin(), s.B.end()) ||
      std::adjacent_find(s.B.begin(), s.B.end()) != s.B.end())
    out.push_back("B must be sorted without duplicates");
  for (std::size_t b : s.B)
    if (b >= n) out.push_back("B contains out-of-range state " + std::to_string(b));
  if (s.nu.size() != n) {
    out.push_back("nu has length " + std::to_string(s.nu.size()) + ", expected " +
                  std::to_string(n));
    return out;
  }
  if (!(s.delta > 0.0 && s.delta < 1.0)) out.push_back("delta " + num(s.delta) + " not in (0,1)");
  if (!out.empty()) return out;

  double total = 0.0;
  for (std::size_t y = 0; y < n; ++y) {
    if (s.nu[y] < 0.0) out.push_back("nu(" + std::to_string(y) + ") negative");
    if (s.nu[y] != 0.0 && !s.contains(y))
      out.push_back("nu charges state " + std::to_string(y) + " outside B");
    total += s.nu[y];
  }
  if (std::abs(total - 1.0) > kRowSumTolerance) out.push_back("nu sums to " + num(total));

  for (std::size_t x : s.B) {
    for (std::size_t k = 0; k < m.n_actions(x); ++k) {
      for (std::size_t y = 0; y < n; ++y) {
        const double p = m.prob(x, k, y);
        if (p - s.delta * s.nu[y] < -kClampBand) {
          out.push_back("minorization violated at (x=" + std::to_string(x) + ", u=" +
                        m.action_labels(x)[k] + ", y=" + std::to_string(y) + "): P=" + num(p) +
                        " < delta*nu=" + num(s.delta * s.nu[y]));
        }
      }
    }
  }
  return out;
}

double min_mass_into(const FiniteMdp& m, const std::vector<std::size_t>& B) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t x : B) {
    for (std::size_t k = 0; k < m.n_actions(x); ++k) {
      double mass = 0.0;
      for (std::size_t b : B) mass += m.prob(x, k, b);
      best = std::min(best, mass);
    }
  }
  return best;
}

double auto_delta(const FiniteMdp& m, const std::vector<std::size_t>& B,
                  const std::vector<double>& nu) {
  double ratio = std::numeric_limits<double>::infinity();
  for (std::size_t x : B)
    for (std::size_t k = 0; k < m.n_actions(x); ++k)
      for (std::size_t y = 0; y < m.n_states(); ++y)
        if (nu[y] > 0.0) ratio = std::min(ratio, m.prob(x, k, y) / nu[y]);
  if (!(ratio > 0.0) || !std::isfinite(ratio))
    throw ModelError("no positive delta satisfies the minorization for this B and nu");
  double delta = 0.9 * ratio;
  // min_y P(y)/nu(y) <= P(B)/nu(B), so this only bites through rounding.
  const double cap = min_mass_into(m, B);
  if (delta >= cap) delta = 0.9 * cap;
  return std::min(delta, 0.9);
}

SmallSetSpec auto_small_set(const FiniteMdp& m) {
  require_valid(m);
  std::size_t best = npos;
  double best_mass = 0.0;
  for (std::size_t b = 0; b < m.n_states(); ++b) {
    const double mass = min_mass_into(m, {b});
    if (mass > best_mass) {
      best_mass = mass;
      best = b;
    }
  }
  if (best == npos)
    throw ModelError("no singleton small set: every state has an action leaving it surely");
  SmallSetSpec s;
  s.B = {best};
  s.nu.assign(m.n_states(), 0.0);
  s.nu[best] = 1.0;
  s.delta = auto_delta(m, s.B, s.nu);
  return s;
}

double delta_circ(const FiniteMdp& m, const SmallSetSpec& s) {
  require_small_set(m, s);
  const double gap = min_mass_into(m, s.B) - s.delta;
  if (!(gap > 0.0)) throw ModelError("delta too large for finite delta_circ");
  return (1.0 - s.delta) / s.delta / gap;
}

SplitChainModel::SplitChainModel(FiniteMdp base, SmallSetSpec s, FiniteMdp lifted,
                                 std::optional<double> dc)
    : base_(std::move(base)), small_set_(std::move(s)), lifted_(std::move(lifted)),
      delta_circ_(dc), atom_of_(base_.n_states(), npos) {
  for (std::size_t j = 0; j < small_set_.B.size(); ++j)
    atom_of_[small_set_.B[j]] = base_.n_states() + j;
}

std::size_t SplitChainModel::base_state(std::size_t z) const {
  return is_atom(z) ? small_set_.B.at(z - n_base()) : z;
}

std::size_t SplitChainModel::atom_index(std::size_t x) const {
  if (x >= atom_of_.size() || atom_of_[x] == npos)
    throw ModelError("state " + std::to_string(x) + " is not in B");
  return atom_of_[x];
}

std::string SplitChainModel::label(std::size_t z) const {
  return std::to_string(base_state(z)) + (is_atom(z) ? ":1" : ":0");
}

StationaryPolicy SplitChainModel::lift(const StationaryPolicy& v) const {
  require_admissible(base_, v);
  if (v.is_deterministic()) {
    std::vector<std::size_t> choice(n_split());
    for (std::size_t z = 0; z < n_split(); ++z) choice[z] = v.action(base_state(z));
    return StationaryPolicy::deterministic(std::move(choice));
  }
  std::vector<std::vector<double>> w(n_split());
  for (std::size_t z = 0; z < n_split(); ++z) {
    const std::size_t x = base_state(z);
    for (std::size_t k = 0; k < base_.n_actions(x); ++k) w[z].push_back(v.weight(x, k));
  }
  return StationaryPolicy::randomized(std::move(w));
}

ValueField SplitChainModel::fold(const ValueField& g) const {
  if (g.size() != n_split()) throw ModelError("fold expects a split-indexed field");
  const double d = small_set_.delta;
  Vector out(static_cast<Eigen::Index>(n_base()));
  for (std::size_t x = 0; x < n_base(); ++x) {
    const auto i = static_cast<Eigen::Index>(x);
    out[i] = small_set_.contains(x)
                 ? (1.0 - d) * g.values[i] + d * g.values[static_cast<Eigen::Index>(atom_index(x))]
                 : g.values[i];
  }
  return ValueField(std::move(out), IndexSpace::base);
}

SplitChainModel build_split_chain(const FiniteMdp& m, const SmallSetSpec& s) {
  require_valid(m);
  require_small_set(m, s);
  const std::size_t n = m.n_states();
  const std::size_t ns = n + s.B.size();
  const double d = s.delta;

  std::vector<std::size_t> atom(n, npos);
  for (std::size_t j = 0; j < s.B.size(); ++j) atom[s.B[j]] = n + j;

  std::vector<std::vector<std::string>> labels(ns);
  std::vector<std::vector<std::vector<double>>> kernel(ns);
  std::vector<std::vector<double>> cost(ns);

  auto finish_row = [&](std::vector<double>& row, std::size_t x, std::size_t k) {
    double total = 0.0;
    bool clamped = false;
    for (double& q : row) {
      if (q < 0.0) {
        if (q < -kClampBand)
          throw ModelError("split kernel entry " + num(q) + " at (" + std::to_string(x) + "," +
                           m.action_labels(x)[k] + ") is not rounding noise");
        q = 0.0;
        clamped = true;
      }
      total += q;
    }
    if (clamped)
      for (double& q : row) q /= total;
  };

  for (std::size_t x = 0; x < n; ++x) {
    const bool in_b = s.contains(x);
    labels[x] = m.action_labels(x);
    for (std::size_t k = 0; k < m.n_actions(x); ++k) {
      std::vector<double> row(ns, 0.0);
      for (std::size_t y = 0; y < n; ++y) {
        const double p = m.prob(x, k, y);
        const bool y_in_b = atom[y] != npos;
        if (in_b) {
          if (y_in_b) {
            row[y] = p - d * s.nu[y];
            row[atom[y]] = d / (1.0 - d) * (p - d * s.nu[y]);
          } else {
            row[y] = p / (1.0 - d);
          }
        } else {
          if (y_in_b) {
            row[y] = (1.0 - d) * p;
            row[atom[y]] = d * p;
          } else {
            row[y] = p;
          }
        }
      }
      finish_row(row, x, k);
      kernel[x].push_back(std::move(row));
      cost[x].push_back(in_b ? m.cost(x, k) / (1.0 - d) : m.cost(x, k));
    }
  }
  for (std::size_t b : s.B) {
    const std::size_t z = atom[b];
    labels[z] = m.action_labels(b);
    std::vector<double> row(ns, 0.0);
    for (std::size_t y : s.B) {
      row[y] = (1.0 - d) * s.nu[y];
      row[atom[y]] = d * s.nu[y];
    }
    for (std::size_t k = 0; k < m.n_actions(b); ++k) {
      kernel[z].push_back(row);
      cost[z].push_back(0.0);
    }
  }

  std::optional<double> dc;
  if (min_mass_into(m, s.B) - d > 0.0) dc = delta_circ(m, s);
  FiniteMdp lifted(std::move(labels), std::move(kernel), std::move(cost),
                   std::min(0.0, m.cost_floor()));
  return SplitChainModel(m, s, std::move(lifted), dc);
}

Vector split_measure(const Vector& mu, const SmallSetSpec& s) {
  const auto n = static_cast<std::size_t>(mu.size());
  Vector out = Vector::Zero(static_cast<Eigen::Index>(n + s.B.size()));
  out.head(mu.size()) = mu;
  for (std::size_t j = 0; j < s.B.size(); ++j) {
    const auto b = static_cast<Eigen::Index>(s.B[j]);
    out[b] = (1.0 - s.delta) * mu[b];
    out[static_cast<Eigen::Index>(n + j)] = s.delta * mu[b];
  }
  return out;
}

Vector marginalize(const Vector& split_mu, const SmallSetSpec& s, std::size_t n_base) {
  if (static_cast<std::size_t>(split_mu.size()) != n_base + s.B.size())
    throw ModelError("split measure has the wrong length");
  Vector out = split_mu.head(static_cast<Eigen::Index>(n_base));
  for (std::size_t j = 0; j < s.B.size(); ++j)
    out[static_cast<Eigen::Index>(s.B[j])] += split_mu[static_cast<Eigen::Index>(n_base + j)];
  return out;
}

namespace {

// Solves h = f + Q_v h with transitions into the atom absorbed.
Vector solve_stopped(const SplitChainModel& sc, const StationaryPolicy& v, const Vector& f) {
  const Matrix q = policy_kernel(sc.lifted(), sc.lift(v));
  const std::size_t ns = sc.n_split();
  std::vector<bool> target(ns, false);
  for (std::size_t z = sc.n_base(); z < ns; ++z) target[z] = true;

  Matrix stopped = q;
  for (std::size_t z = sc.n_base(); z < ns; ++z) stopped.col(static_cast<Eigen::Index>(z)).setZero();

  // Leaving the atom goes through level-0 states, so those decide reachability.
  const auto ok = reaches(q, target);
  for (std::size_t z = 0; z < sc.n_base(); ++z)
    if (!ok[z])
      throw SolverError("atom unreachable under the policy from split state " + sc.label(z));

  const auto nsi = static_cast<Eigen::Index>(ns);
  const Matrix a = Matrix::Identity(nsi, nsi) - stopped;
  return solve_lu(a, f);
}

}  // namespace

ValueField expected_visits_before_atom(const SplitChainModel& sc, const StationaryPolicy& v) {
  Vector f = Vector::Zero(static_cast<Eigen::Index>(sc.n_split()));
  for (std::size_t b : sc.small_set().B) f[static_cast<Eigen::Index>(b)] = 1.0;
  return ValueField(solve_stopped(sc, v, f), IndexSpace::split);
}

ValueField first_return_cost(const SplitChainModel& sc, const StationaryPolicy& v, double beta) {
  Vector f = policy_cost(sc.lifted(), sc.lift(v));
  f.array() -= beta;
  return ValueField(solve_stopped(sc, v, f), IndexSpace::split);
}

}  // namespace avgcost
