#include "avgcost/linalg.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>

namespace avgcost {

Vector solve_lu(const Matrix& a, const Vector& b, double rcond_min) {
  Eigen::PartialPivLU<Matrix> lu(a);
  const double rc = lu.rcond();
  if (!(rc >= rcond_min)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "singular linear system (rcond %.3g)", rc);
    throw SolverError(buf);
  }
  return lu.solve(b);
}

std::size_t numerical_rank(const Matrix& a, double tol) {
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(tol);
  return static_cast<std::size_t>(qr.rank());
}

namespace {

std::vector<std::vector<bool>> reachability(const Matrix& p) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    std::deque<std::size_t> q{s};
    r[s][s] = true;
    while (!q.empty()) {
      const std::size_t x = q.front();
      q.pop_front();
      for (std::size_t y = 0; y < n; ++y) {
        if (p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) > 0.0 && !r[s][y]) {
          r[s][y] = true;
          q.push_back(y);
        }
      }
    }
  }
  return r;
}

}  // namespace

std::vector<std::vector<std::size_t>> recurrent_classes(const Matrix& p) {
  const auto n = static_cast<std::size_t>(p.rows());
  const auto r = reachability(p);
  std::vector<bool> assigned(n, false);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t x = 0; x < n; ++x) {
    if (assigned[x]) continue;
    // x is recurrent iff everything it reaches reaches back.
    bool closed = true;
    for (std::size_t y = 0; y < n && closed; ++y)
      if (r[x][y] && !r[y][x]) closed = false;
    if (!closed) continue;
    std::vector<std::size_t> cls;
    for (std::size_t y = 0; y < n; ++y)
      if (r[x][y]) {
        cls.push_back(y);
        assigned[y] = true;
      }
    out.push_back(std::move(cls));
  }
  return out;
}

std::vector<bool> reaches(const Matrix& p, const std::vector<bool>& target) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::vector<bool> ok = target;
  std::deque<std::size_t> q;
  for (std::size_t y = 0; y < n; ++y)
    if (target[y]) q.push_back(y);
  while (!q.empty()) {
    const std::size_t y = q.front();
    q.pop_front();
    for (std::size_t x = 0; x < n; ++x) {
      if (!ok[x] && p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) > 0.0) {
        ok[x] = true;
        q.push_back(x);
      }
    }
  }
  return ok;
}

}  // namespace avgcost
