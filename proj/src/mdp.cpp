#include "avgcost/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace avgcost {

namespace {

std::string fmt_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

std::string pair_location(const FiniteMdp& m, std::size_t x, std::size_t k) {
  return "(" + std::to_string(x) + "," + m.action_labels(x)[k] + ")";
}

}  // namespace

FiniteMdp::FiniteMdp(std::vector<std::vector<std::string>> action_labels,
                     std::vector<std::vector<std::vector<double>>> kernel,
                     std::vector<std::vector<double>> cost, double cost_floor)
    : labels_(std::move(action_labels)), cost_floor_(cost_floor) {
  const std::size_t n = labels_.size();
  if (n == 0) throw ModelError("model has no states");
  if (kernel.size() != n || cost.size() != n)
    throw ModelError("kernel/cost must have one entry per state");
  offsets_.reserve(n);
  for (std::size_t x = 0; x < n; ++x) {
    if (kernel[x].size() != labels_[x].size() || cost[x].size() != labels_[x].size())
      throw ModelError("state " + std::to_string(x) +
                       ": kernel/cost entries do not match its action set");
    offsets_.push_back(rows_.size());
    for (std::size_t k = 0; k < labels_[x].size(); ++k) {
      if (kernel[x][k].size() != n)
        throw ModelError("kernel row " + std::to_string(x) + "," + labels_[x][k] +
                         " has length " + std::to_string(kernel[x][k].size()) +
                         ", expected " + std::to_string(n));
      SparseRow s;
      for (std::size_t y = 0; y < n; ++y) {
        if (kernel[x][k][y] != 0.0) {
          s.targets.push_back(y);
          s.probs.push_back(kernel[x][k][y]);
        }
      }
      rows_.push_back(std::move(kernel[x][k]));
      sparse_.push_back(std::move(s));
      costs_.push_back(cost[x][k]);
    }
  }
}

double FiniteMdp::expect(std::size_t x, std::size_t k, const Vector& f) const {
  const SparseRow& r = sparse_[pair(x, k)];
  double acc = 0.0;
  for (std::size_t i = 0; i < r.targets.size(); ++i)
    acc += r.probs[i] * f[static_cast<Eigen::Index>(r.targets[i])];
  return acc;
}

std::size_t FiniteMdp::action_index(std::size_t x, const std::string& label) const {
  const auto& l = labels_.at(x);
  auto it = std::find(l.begin(), l.end(), label);
  if (it == l.end())
    throw ModelError("state " + std::to_string(x) + " has no action '" + label + "'");
  return static_cast<std::size_t>(it - l.begin());
}

FiniteMdp FiniteMdp::with_cost_floor(double floor) const {
  FiniteMdp copy = *this;
  copy.cost_floor_ = floor;
  return copy;
}

StationaryPolicy StationaryPolicy::deterministic(std::vector<std::size_t> choice) {
  StationaryPolicy p;
  p.deterministic_ = true;
  p.choice_ = std::move(choice);
  return p;
}

StationaryPolicy StationaryPolicy::randomized(std::vector<std::vector<double>> weights) {
  StationaryPolicy p;
  p.deterministic_ = false;
  p.weights_ = std::move(weights);
  return p;
}

std::size_t StationaryPolicy::action(std::size_t x) const {
  if (!deterministic_) throw ModelError("randomized policy has no single action");
  return choice_.at(x);
}

const std::vector<std::size_t>& StationaryPolicy::actions() const {
  if (!deterministic_) throw ModelError("randomized policy has no single action");
  return choice_;
}

double StationaryPolicy::weight(std::size_t x, std::size_t k) const {
  if (deterministic_) return choice_.at(x) == k ? 1.0 : 0.0;
  return weights_.at(x).at(k);
}

std::vector<std::string> StationaryPolicy::check(const FiniteMdp& m) const {
  std::vector<std::string> out;
  if (n_states() != m.n_states()) {
    out.push_back("policy covers " + std::to_string(n_states()) + " states, model has " +
                  std::to_string(m.n_states()));
    return out;
  }
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    if (deterministic_) {
      if (choice_[x] >= m.n_actions(x))
        out.push_back("state " + std::to_string(x) + ": action index " +
                      std::to_string(choice_[x]) + " not admissible");
      continue;
    }
    const auto& w = weights_[x];
    if (w.size() != m.n_actions(x)) {
      out.push_back("state " + std::to_string(x) + ": weight vector has wrong length");
      continue;
    }
    double total = 0.0;
    for (double p : w) {
      if (!(p >= 0.0)) out.push_back("state " + std::to_string(x) + ": negative weight");
      total += p;
    }
    if (std::abs(total - 1.0) > kRowSumTolerance)
      out.push_back("state " + std::to_string(x) + ": weights sum to " + fmt_num(total));
  }
  return out;
}

std::vector<Violation> validate_mdp(const FiniteMdp& m) {
  std::vector<Violation> out;
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    if (m.n_actions(x) == 0) {
      out.push_back({"state " + std::to_string(x), "empty action set"});
      continue;
    }
    for (std::size_t k = 0; k < m.n_actions(x); ++k) {
      const auto loc = pair_location(m, x, k);
      const auto r = m.row(x, k);
      double total = 0.0;
      bool finite = true;
      for (std::size_t y = 0; y < r.size(); ++y) {
        if (!std::isfinite(r[y])) finite = false;
        if (r[y] < 0.0)
          out.push_back({loc, "negative entry " + fmt_num(r[y]) + " at " + std::to_string(y)});
        total += r[y];
      }
      if (!finite) out.push_back({loc, "non-finite probability"});
      else if (std::abs(total - 1.0) > kRowSumTolerance)
        out.push_back({loc, "row sum " + fmt_num(total)});
      const double c = m.cost(x, k);
      if (!std::isfinite(c)) out.push_back({loc, "non-finite cost"});
      else if (c < m.cost_floor())
        out.push_back({loc, "cost below floor: " + fmt_num(c) + " < " + fmt_num(m.cost_floor())});
    }
  }
  return out;
}

void require_valid(const FiniteMdp& m) {
  const auto v = validate_mdp(m);
  if (v.empty()) return;
  std::ostringstream msg;
  msg << "invalid model:";
  for (const auto& e : v) msg << "\n  " << e.location << ": " << e.message;
  throw ModelError(msg.str());
}

void require_admissible(const FiniteMdp& m, const StationaryPolicy& v) {
  const auto problems = v.check(m);
  if (problems.empty()) return;
  std::string msg = "inadmissible policy:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ModelError(msg);
}

ValueField apply_kernel(const FiniteMdp& m, const StationaryPolicy& v, const ValueField& f) {
  if (f.size() != m.n_states())
    throw ModelError("field has length " + std::to_string(f.size()) + ", model has " +
                     std::to_string(m.n_states()) + " states");
  require_admissible(m, v);
  Vector out(f.values.size());
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    double acc = 0.0;
    if (v.is_deterministic()) {
      acc = m.expect(x, v.action(x), f.values);
    } else {
      for (std::size_t k = 0; k < m.n_actions(x); ++k) {
        const double w = v.weight(x, k);
        if (w != 0.0) acc += w * m.expect(x, k, f.values);
      }
    }
    out[static_cast<Eigen::Index>(x)] = acc;
  }
  return ValueField(std::move(out), f.space);
}

Matrix policy_kernel(const FiniteMdp& m, const StationaryPolicy& v) {
  require_admissible(m, v);
  const auto n = static_cast<Eigen::Index>(m.n_states());
  Matrix p = Matrix::Zero(n, n);
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    for (std::size_t k = 0; k < m.n_actions(x); ++k) {
      const double w = v.weight(x, k);
      if (w == 0.0) continue;
      const SparseRow& r = m.sparse_row(x, k);
      for (std::size_t i = 0; i < r.targets.size(); ++i)
        p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(r.targets[i])) += w * r.probs[i];
    }
  }
  return p;
}

Vector policy_cost(const FiniteMdp& m, const StationaryPolicy& v) {
  require_admissible(m, v);
  Vector c(static_cast<Eigen::Index>(m.n_states()));
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    double acc = 0.0;
    for (std::size_t k = 0; k < m.n_actions(x); ++k) {
      const double w = v.weight(x, k);
      if (w != 0.0) acc += w * m.cost(x, k);
    }
    c[static_cast<Eigen::Index>(x)] = acc;
  }
  return c;
}

void bellman_min_into(const FiniteMdp& m, const Vector& f, double beta, Vector& out,
                      std::vector<std::size_t>& selector) {
  const std::size_t n = m.n_states();
  out.resize(static_cast<Eigen::Index>(n));
  selector.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < m.n_actions(x); ++k) {
      const double q = m.cost(x, k) - beta + m.expect(x, k, f);
      if (k == 0 || q < best - kArgminTolerance) {
        best = q;
        arg = k;
      }
    }
    out[static_cast<Eigen::Index>(x)] = best;
    selector[x] = arg;
  }
}

BellmanResult bellman_min(const FiniteMdp& m, const ValueField& f, double beta) {
  if (f.size() != m.n_states())
    throw ModelError("field has length " + std::to_string(f.size()) + ", model has " +
                     std::to_string(m.n_states()) + " states");
  for (std::size_t x = 0; x < m.n_states(); ++x)
    if (m.n_actions(x) == 0) throw ModelError("state " + std::to_string(x) + " has no actions");
  Vector out;
  std::vector<std::size_t> sel;
  bellman_min_into(m, f.values, beta, out, sel);
  return {ValueField(std::move(out), f.space), StationaryPolicy::deterministic(std::move(sel))};
}

double span(const Vector& f) {
  if (f.size() == 0) return 0.0;
  return f.maxCoeff() - f.minCoeff();
}

}  // namespace avgcost
