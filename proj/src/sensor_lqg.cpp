#include "avgcost/sensor_lqg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>

namespace avgcost {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

bool symmetric_pd(const Matrix& s, double tol) {
  if (s.rows() != s.cols() || (s - s.transpose()).cwiseAbs().maxCoeff() > tol) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
  return es.eigenvalues().minCoeff() > 0.0;
}

Matrix symmetrize(const Matrix& s) { return 0.5 * (s + s.transpose()); }

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

bool stabilizable(const Matrix& a, const Matrix& b, double tol) {
  using CMatrix = Eigen::MatrixXcd;
  const auto d = a.rows();
  Eigen::EigenSolver<Matrix> es(a);
  for (Eigen::Index i = 0; i < d; ++i) {
    const std::complex<double> z = es.eigenvalues()[i];
    if (std::abs(z) < 1.0) continue;
    CMatrix pbh(d, d + b.cols());
    pbh.leftCols(d) = a.cast<std::complex<double>>() - z * CMatrix::Identity(d, d);
    pbh.rightCols(b.cols()) = b.cast<std::complex<double>>();
    Eigen::JacobiSVD<CMatrix> svd(pbh);
    if (svd.singularValues()[d - 1] < tol) return false;
  }
  return true;
}

std::vector<std::string> validate_lqg(const LqgModel& g) {
  std::vector<std::string> out;
  const auto d = g.A.rows();
  if (d == 0 || g.A.cols() != d) {
    out.push_back("A must be square and nonempty, got " + dims(g.A));
    return out;
  }
  if (g.B.rows() != d || g.B.cols() == 0) out.push_back("B has shape " + dims(g.B));
  if (g.D.rows() != d || g.D.cols() == 0) out.push_back("D has shape " + dims(g.D));
  if (g.R.rows() != d || g.R.cols() != d) out.push_back("R has shape " + dims(g.R));
  if (g.M.rows() != g.B.cols() || g.M.cols() != g.B.cols()) out.push_back("M has shape " + dims(g.M));
  if (!out.empty()) return out;
  if (!symmetric_pd(g.R, 1e-10)) out.push_back("R is not symmetric positive definite");
  if (!symmetric_pd(g.M, 1e-10)) out.push_back("M is not symmetric positive definite");
  if (!stabilizable(g.A, g.B)) out.push_back("(A, B) is not stabilizable");
  if (g.queries.empty()) out.push_back("no sensor queries");
  for (std::size_t q = 0; q < g.queries.size(); ++q) {
    const auto& s = g.queries[q];
    const std::string at = "query " + std::to_string(q) + ": ";
    if (s.C.cols() != d || s.F.rows() != s.C.rows() || s.F.cols() != g.D.cols()) {
      out.push_back(at + "C is " + dims(s.C) + ", F is " + dims(s.F));
      continue;
    }
    const Matrix ff = s.F * s.F.transpose();
    Eigen::JacobiSVD<Matrix> svd(ff);
    const auto& sv = svd.singularValues();
    if (sv.size() > 0 && !(sv[sv.size() - 1] > 1e-12 * std::max(1.0, sv[0])))
      out.push_back(at + "F F' is singular");
    if ((g.D * s.F.transpose()).cwiseAbs().maxCoeff() > 1e-10) out.push_back(at + "D F' is not zero");
    if (!(s.lambda >= 0.0 && s.lambda <= 1.0)) out.push_back(at + "loss rate outside [0, 1]");
    if (!(s.cost > 0.0)) out.push_back(at + "query cost must be positive");
  }
  return out;
}

void require_lqg(const LqgModel& g) {
  const auto v = validate_lqg(g);
  if (v.empty()) return;
  std::string msg = "invalid LQG model:";
  for (const auto& s : v) msg += "\n  " + s;
  throw ModelError(msg);
}

RiccatiSolution solve_riccati(const LqgModel& g, std::size_t max_iters) {
  require_lqg(g);
  const Matrix& a = g.A;
  const Matrix& b = g.B;
  auto step = [&](const Matrix& p) {
    const Matrix pb = p * b;
    const Matrix inner = g.M + b.transpose() * pb;
    return symmetrize(g.R + a.transpose() * p * a -
                      a.transpose() * pb * inner.ldlt().solve(pb.transpose() * a));
  };
  RiccatiSolution sol;
  Matrix p = g.R;
  double diff = 0.0;
  for (std::size_t k = 0; k < max_iters; ++k) {
    Matrix next = step(p);
    diff = (next - p).cwiseAbs().maxCoeff();
    p = std::move(next);
    sol.iterations = k + 1;
    if (!p.allFinite()) break;
    if (diff < 1e-13) {
      sol.pi_star = p;
      sol.residual = (p - step(p)).cwiseAbs().maxCoeff();
      sol.pi_tilde = symmetrize(g.R - p + a.transpose() * p * a);
      sol.k_star = (g.M + b.transpose() * p * b).ldlt().solve(b.transpose() * p * a);
      sol.rho_star_offset = (p * g.D * g.D.transpose()).trace();
      Eigen::EigenSolver<Matrix> es(a - b * sol.k_star);
      sol.closed_loop_radius = es.eigenvalues().cwiseAbs().maxCoeff();
      return sol;
    }
  }
  std::ostringstream os;
  os << "Riccati iteration stalled (last difference " << diff << ")";
  throw SolverError(os.str());
}

Matrix psd_project(const Matrix& s) {
  Matrix sym = symmetrize(s);
  if (sym.rows() == 1) {
    if (sym(0, 0) < -1e-10) throw ModelError("covariance is not positive semidefinite");
    sym(0, 0) = std::max(0.0, sym(0, 0));
    return sym;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const double lo = es.eigenvalues().minCoeff();
  if (lo >= 0.0) return sym;
  if (lo < -1e-10) throw ModelError("covariance is not positive semidefinite");
  const Vector clipped = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose());
}

Matrix xi(const LqgModel& g, const Matrix& sigma) {
  return symmetrize(g.D * g.D.transpose() + g.A * sigma * g.A.transpose());
}

Matrix kalman_gain(const LqgModel& g, std::size_t q, int gamma, const Matrix& sigma) {
  const auto& s = g.queries.at(q);
  if (gamma == 0) return Matrix::Zero(g.dim(), s.C.rows());
  const Matrix x = xi(g, sigma);
  const double gm = static_cast<double>(gamma);
  const Matrix inner = gm * gm * s.C * x * s.C.transpose() + s.F * s.F.transpose();
  Eigen::FullPivLU<Matrix> lu(inner);
  if (!lu.isInvertible()) throw SolverError("innovation covariance is singular");
  // inner and Xi are symmetric, so K' = inner^-1 (gamma C Xi).
  return lu.solve(gm * s.C * x).transpose();
}

Matrix t_q(const LqgModel& g, std::size_t q, const Matrix& sigma) {
  const Matrix x = xi(g, sigma);
  return psd_project(x - kalman_gain(g, q, 1, sigma) * g.queries.at(q).C * x);
}

double query_cost(const LqgModel& g, const RiccatiSolution& ric, std::size_t q, const Matrix& sigma) {
  return g.queries.at(q).cost + (ric.pi_tilde * sigma).trace();
}

double xi(const LqgModel& g, double sigma) { return xi(g, scalar(sigma))(0, 0); }
double t_q(const LqgModel& g, std::size_t q, double sigma) { return t_q(g, q, scalar(sigma))(0, 0); }

std::size_t VarianceGridMdp::nearest(double sigma) const {
  const double h = spacing();
  if (h <= 0.0 || sigma <= 0.0) return 0;
  const double pos = std::round(sigma / h);
  return std::min(points.size() - 1, static_cast<std::size_t>(pos));
}

VarianceGridMdp build_variance_grid_mdp(const LqgModel& g, const RiccatiSolution& ric,
                                        const VarianceGridSpec& layout) {
  require_lqg(g);
  if (g.dim() != 1) throw ModelError("variance grid needs a scalar plant");
  if (layout.n_points < 2 || !(layout.sigma_max > 0.0)) throw ModelError("grid needs sigma_max > 0 and at least 2 points");
  const double a = g.A(0, 0);
  const bool all_lossy = std::all_of(g.queries.begin(), g.queries.end(),
                                     [](const SensorQuery& s) { return s.lambda >= 1.0; });
  if (all_lossy && std::abs(a) > 1.0) throw ModelError("unstable plant with queries that never deliver");

  VarianceGridMdp out;
  const std::size_t n = layout.n_points;
  const double h = layout.sigma_max / static_cast<double>(n - 1);
  out.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.points[i] = h * static_cast<double>(i);
  out.points[n - 1] = layout.sigma_max;

  for (std::size_t q = 0; q < g.queries.size(); ++q)
    if (g.queries[q].lambda >= 1.0)
      out.warnings.push_back("query " + std::to_string(q) + " has loss rate 1");
  const double dd = (g.D * g.D.transpose())(0, 0);
  if (std::abs(a) < 1.0) {
    const double fixed = dd / (1.0 - a * a);
    if (fixed > layout.sigma_max)
      out.warnings.push_back("sigma_max is below the no-observation fixed point; saturating");
  } else {
    out.warnings.push_back("no-observation map has no fixed point; saturating at sigma_max");
  }

  const std::size_t nq = g.queries.size();
  std::vector<std::vector<std::string>> labels(n);
  std::vector<std::vector<std::vector<double>>> kernel(n);
  std::vector<std::vector<double>> cost(n);
  bool coarse = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = out.points[i];
    const double x = std::min(xi(g, s), layout.sigma_max);
    const std::size_t to_x = out.nearest(x);
    bool merged_everywhere = i > 0 && i + 1 < n;
    bool any_mixing = false;
    for (std::size_t q = 0; q < nq; ++q) {
      const auto& qs = g.queries[q];
      labels[i].push_back(qs.label.empty() ? "q" + std::to_string(q) : qs.label);
      const double t = std::min(t_q(g, q, s), layout.sigma_max);
      const std::size_t to_t = out.nearest(t);
      std::vector<double> row(n, 0.0);
      row[to_t] += 1.0 - qs.lambda;
      row[to_x] += qs.lambda;
      kernel[i].push_back(std::move(row));
      cost[i].push_back(qs.cost + ric.pi_tilde(0, 0) * s);
      if (qs.lambda > 0.0 && qs.lambda < 1.0) {
        any_mixing = true;
        if (to_t != to_x || std::abs(t - x) < 1e-12) merged_everywhere = false;
      }
    }
    if (merged_everywhere && any_mixing) coarse = true;
  }
  if (coarse) out.warnings.push_back("grid too coarse: observed and lost successors share a grid point");

  double floor = 0.0;
  for (const auto& row : cost)
    for (double c : row) floor = std::min(floor, c);
  out.mdp = FiniteMdp(std::move(labels), std::move(kernel), std::move(cost), floor);

  // Attracting covariance of the cheapest query.
  std::size_t best = 0;
  for (std::size_t q = 1; q < nq; ++q)
    if (g.queries[q].cost < g.queries[best].cost) best = q;
  double sigma = 0.0;
  for (int k = 0; k < 100'000; ++k) {
    const double next = g.queries[best].lambda < 1.0 ? std::min(t_q(g, best, sigma), layout.sigma_max)
                                                     : std::min(xi(g, sigma), layout.sigma_max);
    const bool done = std::abs(next - sigma) < 1e-15;
    sigma = next;
    if (done) break;
  }
  const std::size_t anchor = out.nearest(sigma);
  SmallSetSpec s;
  s.B = {anchor};
  s.nu.assign(n, 0.0);
  s.nu[anchor] = 1.0;
  try {
    s.delta = auto_delta(out.mdp, s.B, s.nu);
    out.small_set = std::move(s);
  } catch (const ModelError&) {
    try {
      out.small_set = auto_small_set(out.mdp);
      out.warnings.push_back("small set moved away from the filtering fixed point");
    } catch (const ModelError&) {
      throw ModelError("no grid point admits a minorization; use a denser grid or a larger small set");
    }
  }
  return out;
}

QueryScheduler grid_scheduler(const VarianceGridMdp& grid, const StationaryPolicy& policy) {
  std::vector<std::size_t> choice(grid.points.size());
  for (std::size_t i = 0; i < choice.size(); ++i) choice[i] = policy.action(i);
  const double h = grid.spacing();
  const std::size_t last = grid.points.size() - 1;
  return [choice, h, last](const Matrix& sigma) {
    const double s = sigma(0, 0);
    const std::size_t i = s <= 0.0 ? 0 : std::min(last, static_cast<std::size_t>(std::round(s / h)));
    return choice[i];
  };
}

SimulationResult simulate_closed_loop(const LqgModel& g, const RiccatiSolution& ric,
                                      const QueryScheduler& schedule, const SimulationOptions& opt) {
  require_lqg(g);
  if (opt.horizon == 0 || opt.batches == 0 || opt.horizon < opt.batches)
    throw ModelError("horizon must be at least the number of batches");
  const auto d = g.dim();
  const auto dw = g.D.cols();
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&] {
    Vector w(dw);
    for (Eigen::Index i = 0; i < dw; ++i) w[i] = normal(rng);
    return w;
  };

  Vector x = Vector::Zero(d);
  Vector xhat = Vector::Zero(d);
  Matrix sigma = Matrix::Zero(d, d);
  Vector w_cur = draw();

  SimulationResult res;
  res.running_avg.reserve(opt.horizon);
  if (opt.keep_trace) res.steps.reserve(opt.horizon);
  const std::size_t batch_len = opt.horizon / opt.batches;
  std::vector<double> batch_sum(opt.batches, 0.0);
  double total = 0.0;

  for (std::size_t t = 0; t < opt.horizon; ++t) {
    const std::size_t q = schedule(sigma);
    const auto& qs = g.queries.at(q);
    const Vector u = -ric.k_star * xhat;
    const double plant = x.dot(g.R * x) + u.dot(g.M * u);
    const double step_cost = plant + qs.cost;
    total += step_cost;
    const std::size_t b = t / batch_len;
    if (b < opt.batches) batch_sum[b] += step_cost;
    res.running_avg.push_back(total / static_cast<double>(t + 1));

    const Vector w_next = draw();
    x = g.A * x + g.B * u + g.D * w_cur;
    const int gamma = unif(rng) < qs.lambda ? 0 : 1;
    const Vector pred = g.A * xhat + g.B * u;
    const Matrix k = kalman_gain(g, q, gamma, sigma);
    if (gamma == 1) {
      const Vector y = qs.C * x + qs.F * w_next;
      xhat = pred + k * (y - qs.C * pred);
    } else {
      xhat = pred;
    }
    const Matrix x_cov = xi(g, sigma);
    sigma = psd_project(x_cov - k * qs.C * x_cov);
    w_cur = w_next;

    if (opt.keep_trace) res.steps.push_back({q, gamma, plant, qs.cost, res.running_avg.back()});
    if (!x.allFinite() || x.norm() > opt.blowup) {
      std::ostringstream os;
      os << "closed loop unstable at step " << t + 1 << ": schedule is not stabilizing";
      throw SolverError(os.str());
    }
  }

  res.mean = total / static_cast<double>(opt.horizon);
  double mb = 0.0;
  for (double s : batch_sum) mb += s / static_cast<double>(batch_len);
  mb /= static_cast<double>(opt.batches);
  double var = 0.0;
  for (double s : batch_sum) {
    const double e = s / static_cast<double>(batch_len) - mb;
    var += e * e;
  }
  var /= static_cast<double>(opt.batches - 1 > 0 ? opt.batches - 1 : 1);
  res.std_error = std::sqrt(var / static_cast<double>(opt.batches));
  return res;
}

LqgModel scalar_demo(double query_cost_value, double lambda) {
  LqgModel g;
  g.A = Matrix::Constant(1, 1, 1.0);
  g.B = Matrix::Constant(1, 1, 1.0);
  g.D = Matrix(1, 2);
  g.D << 1.0, 0.0;
  g.R = Matrix::Constant(1, 1, 1.0);
  g.M = Matrix::Constant(1, 1, 1.0);
  SensorQuery q;
  q.C = Matrix::Constant(1, 1, 1.0);
  q.F = Matrix(1, 2);
  q.F << 0.0, 1.0;
  q.lambda = lambda;
  q.cost = query_cost_value;
  q.label = "q0";
  g.queries.push_back(std::move(q));
  return g;
}

}  // namespace avgcost
