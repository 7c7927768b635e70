#pragma once

#include <random>
#include <string>
#include <vector>

#include "avgcost/mdp.hpp"
#include "avgcost/serialization.hpp"
#include "avgcost/split_chain.hpp"

namespace testing_support {

using namespace avgcost;

inline FiniteMdp m2() {
  return FiniteMdp({{"a", "b"}, {"a", "b"}},
                   {{{0.9, 0.1}, {0.5, 0.5}}, {{0.8, 0.2}, {0.2, 0.8}}},
                   {{1.0, 2.0}, {4.0, 3.0}});
}

inline SmallSetSpec m2_smallset() { return SmallSetSpec{{0}, {1.0, 0.0}, 0.4}; }

inline std::vector<std::string> bundled_names() { return {"m2", "queue4", "machine3", "garnet5"}; }

inline std::string model_path(const std::string& name) {
  return std::string(AVGCOST_MODEL_DIR) + "/" + name + ".json";
}
inline std::string smallset_path(const std::string& name) {
  return std::string(AVGCOST_MODEL_DIR) + "/" + name + "_smallset.json";
}

/// Random model whose kernel puts at least alpha on state 0 from every pair,
/// so every stationary policy is unichain and aperiodic.
inline FiniteMdp random_unichain(std::mt19937_64& rng, std::size_t n_states, std::size_t max_actions,
                                 double alpha = 0.2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> na(1, max_actions);
  std::vector<std::vector<std::string>> labels(n_states);
  std::vector<std::vector<std::vector<double>>> kernel(n_states);
  std::vector<std::vector<double>> cost(n_states);
  for (std::size_t x = 0; x < n_states; ++x) {
    const std::size_t k = na(rng);
    for (std::size_t a = 0; a < k; ++a) {
      labels[x].push_back("u" + std::to_string(a));
      std::vector<double> w(n_states);
      double total = 0.0;
      for (auto& v : w) total += (v = u(rng) * (u(rng) < 0.3 ? 0.0 : 1.0));
      if (total == 0.0) w[x] = total = 1.0;
      std::vector<double> row(n_states);
      double s = 0.0;
      for (std::size_t y = 1; y < n_states; ++y) s += (row[y] = (1.0 - alpha) * w[y] / total);
      row[0] = 1.0 - s;
      kernel[x].push_back(row);
      cost[x].push_back(1.0 + 9.0 * u(rng));
    }
  }
  return FiniteMdp(std::move(labels), std::move(kernel), std::move(cost));
}

/// Invariant law by averaging the iterates of mu <- mu P (independent of the
/// library's linear solves); accurate for aperiodic chains.
inline Vector power_stationary(const Matrix& p, int steps = 20000) {
  Vector mu = Vector::Constant(p.rows(), 1.0 / static_cast<double>(p.rows()));
  for (int i = 0; i < steps; ++i) mu = (mu.transpose() * p).transpose();
  return mu;
}

}  // namespace testing_support
