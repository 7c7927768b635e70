#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "avgcost/mdp.hpp"
#include "avgcost/split_chain.hpp"

namespace avgcost {

/// Sensor query q: observation Y = gamma (C_q X + F_q W), lost with
/// probability lambda, queried at cost c(q).
struct SensorQuery {
  Matrix C;
  Matrix F;
  double lambda = 0.0;
  double cost = 0.0;
  std::string label;
};

/// X' = A X + B U + D W with quadratic plant cost x'Rx + u'Mu.
struct LqgModel {
  Matrix A, B, D, R, M;
  std::vector<SensorQuery> queries;

  Eigen::Index dim() const { return A.rows(); }
};

/// Invariant violations (empty when usable). A loss rate of exactly 1 is
/// accepted: it models a query that never delivers.
std::vector<std::string> validate_lqg(const LqgModel& lqg);
void require_lqg(const LqgModel& lqg);

/// Stabilizability of (A, B) by the PBH rank test on eigenvalues with |z| >= 1.
bool stabilizable(const Matrix& a, const Matrix& b, double tol = 1e-8);

struct RiccatiSolution {
  Matrix pi_star;
  Matrix pi_tilde;  // R - Pi* + A' Pi* A
  Matrix k_star;    // (M + B' Pi* B)^-1 B' Pi* A
  double rho_star_offset = 0.0;  // trace(Pi* D D')
  double residual = 0.0;
  double closed_loop_radius = 0.0;  // spectral radius of A - B K*
  std::size_t iterations = 0;
};

/// Fixed-point iteration from Pi_0 = R until successive iterates differ by
/// less than 1e-13 in sup norm. Throws SolverError "Riccati iteration stalled"
/// after max_iters.
RiccatiSolution solve_riccati(const LqgModel& lqg, std::size_t max_iters = 100'000);

/// Symmetrizes and clips eigenvalues in [-1e-10, 0) to zero; throws ModelError
/// on anything more negative.
Matrix psd_project(const Matrix& s);

Matrix xi(const LqgModel& lqg, const Matrix& sigma);
Matrix kalman_gain(const LqgModel& lqg, std::size_t q, int gamma, const Matrix& sigma);
Matrix t_q(const LqgModel& lqg, std::size_t q, const Matrix& sigma);
double query_cost(const LqgModel& lqg, const RiccatiSolution& ric, std::size_t q,
                  const Matrix& sigma);

/// Scalar conveniences (d = 1).
double xi(const LqgModel& lqg, double sigma);
double t_q(const LqgModel& lqg, std::size_t q, double sigma);

struct VarianceGridSpec {
  double sigma_max = 5.0;
  std::size_t n_points = 101;
};

struct VarianceGridMdp {
  FiniteMdp mdp;
  SmallSetSpec small_set;
  std::vector<double> points;
  std::vector<std::string> warnings;

  double spacing() const { return points.size() > 1 ? points[1] - points[0] : 0.0; }
  std::size_t nearest(double sigma) const;
};

/// Scalar covariance chain on a uniform grid over [0, sigma_max]: query q
/// moves sigma to the nearest grid point of T_q(sigma) with probability
/// 1 - lambda(q) and of min(Xi(sigma), sigma_max) with probability lambda(q),
/// at cost c(q) + Pi~* sigma. The small set is the grid point nearest the
/// attracting covariance of the cheapest query.
VarianceGridMdp build_variance_grid_mdp(const LqgModel& lqg, const RiccatiSolution& ric,
                                        const VarianceGridSpec& grid);

/// Maps the current error covariance to a query index.
using QueryScheduler = std::function<std::size_t(const Matrix& sigma)>;

/// Nearest-grid lookup of a deterministic grid policy.
QueryScheduler grid_scheduler(const VarianceGridMdp& grid, const StationaryPolicy& policy);

struct SimulationOptions {
  std::size_t horizon = 1'000'000;
  std::uint64_t seed = 1;
  std::size_t batches = 100;
  bool keep_trace = false;
  double blowup = 1e9;
};

struct SimulationStep {
  std::size_t query = 0;
  int gamma = 1;
  double plant_cost = 0.0;
  double query_cost = 0.0;
  double running_avg = 0.0;
};

struct SimulationResult {
  double mean = 0.0;
  double std_error = 0.0;  // batch means
  std::vector<double> running_avg;
  std::vector<SimulationStep> steps;  // only with keep_trace
};

/// Closed loop with U = -K* Xhat, the Kalman filter driven by the received
/// observations and the query picked from the exact covariance recursion.
/// Starts at X_0 = Xhat_0 = 0 with zero covariance. Throws SolverError when
/// |X| exceeds options.blowup.
SimulationResult simulate_closed_loop(const LqgModel& lqg, const RiccatiSolution& ric,
                                      const QueryScheduler& schedule,
                                      const SimulationOptions& options);

/// a = b = 1, R = M = 1, C = 1, noise W in R^2 with D = [1 0], F = [0 1].
LqgModel scalar_demo(double query_cost = 0.1, double lambda = 0.0);

}  // namespace avgcost
