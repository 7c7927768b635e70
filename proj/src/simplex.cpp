#include "avgcost/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace avgcost {

namespace {

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class TableauSolver {
 public:
  TableauSolver(Tableau t, std::vector<std::size_t> basis, std::size_t n_cols,
                const LpOptions& opt)
      : t_(std::move(t)), basis_(std::move(basis)), n_cols_(n_cols), opt_(opt) {}

  // Runs Bland pivots over columns [0, allowed). Objective row is the last row.
  LpStatus run(std::size_t allowed) {
    const auto m = static_cast<Eigen::Index>(basis_.size());
    const Eigen::Index rhs = t_.cols() - 1;
    while (true) {
      Eigen::Index enter = -1;
      for (std::size_t j = 0; j < allowed; ++j) {
        if (t_(m, static_cast<Eigen::Index>(j)) < -opt_.eps) {
          enter = static_cast<Eigen::Index>(j);
          break;
        }
      }
      if (enter < 0) return LpStatus::optimal;

      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m; ++i) {
        const double a = t_(i, enter);
        if (a > opt_.eps) best = std::min(best, t_(i, rhs) / a);
      }
      Eigen::Index leave = -1;
      for (Eigen::Index i = 0; i < m && best < std::numeric_limits<double>::infinity(); ++i) {
        const double a = t_(i, enter);
        if (a <= opt_.eps || t_(i, rhs) / a > best + opt_.eps) continue;
        if (leave < 0 || basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])
          leave = i;
      }
      if (leave < 0) return LpStatus::unbounded;
      if (++pivots_ > opt_.max_pivots) return LpStatus::pivot_limit;
      pivot(leave, enter);
    }
  }

  void pivot(Eigen::Index r, Eigen::Index col) {
    if (opt_.tableau_dump)
      *opt_.tableau_dump << "pivot " << pivots_ << ": enter " << col << " leave "
                         << basis_[static_cast<std::size_t>(r)] << " (row " << r << ")\n";
    t_.row(r) /= t_(r, col);
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = static_cast<std::size_t>(col);
  }

  Tableau& tableau() { return t_; }
  std::vector<std::size_t>& basis() { return basis_; }
  std::size_t pivots() const { return pivots_; }
  std::size_t n_cols() const { return n_cols_; }

 private:
  Tableau t_;
  std::vector<std::size_t> basis_;
  std::size_t n_cols_;
  const LpOptions& opt_;
  std::size_t pivots_ = 0;
};

}  // namespace

LpResult simplex_standard_form(const Matrix& a, const Vector& b, const Vector& c,
                               const LpOptions& opt) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  const Eigen::Index width = n + m + 1;
  const Eigen::Index rhs = width - 1;

  // Columns: originals [0,n), artificials [n, n+m), right-hand side.
  Tableau t = Tableau::Zero(m + 1, width);
  std::vector<std::size_t> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sign = b[i] < 0.0 ? -1.0 : 1.0;
    t.row(i).head(n) = sign * a.row(i);
    t(i, n + i) = 1.0;
    t(i, rhs) = sign * b[i];
    basis[static_cast<std::size_t>(i)] = static_cast<std::size_t>(n + i);
  }
  // Phase one: minimize the sum of artificials.
  for (Eigen::Index i = 0; i < m; ++i) {
    t.row(m).head(n) -= t.row(i).head(n);
    t(m, rhs) -= t(i, rhs);
  }

  TableauSolver solver(std::move(t), std::move(basis), static_cast<std::size_t>(n), opt);
  LpResult result;
  auto status = solver.run(static_cast<std::size_t>(n));
  Tableau& tab = solver.tableau();
  if (status == LpStatus::pivot_limit) {
    result.status = status;
    return result;
  }
  if (-tab(m, rhs) > opt.feasibility_tol) {
    result.status = LpStatus::infeasible;
    result.pivots = solver.pivots();
    return result;
  }

  // Drive zero-level artificials out where an original column can replace them.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (solver.basis()[static_cast<std::size_t>(i)] < static_cast<std::size_t>(n)) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(tab(i, j)) > opt.eps) {
        solver.pivot(i, j);
        break;
      }
    }
  }

  // Phase two objective row: reduced costs c_j - c_B' B^-1 A_j.
  tab.row(m).setZero();
  tab.row(m).head(n) = c.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t bj = solver.basis()[static_cast<std::size_t>(i)];
    const double cb = bj < static_cast<std::size_t>(n) ? c[static_cast<Eigen::Index>(bj)] : 0.0;
    if (cb != 0.0) tab.row(m) -= cb * tab.row(i);
  }
  status = solver.run(static_cast<std::size_t>(n));

  result.status = status;
  result.pivots = solver.pivots();
  result.basis = solver.basis();
  result.x = Vector::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t bj = result.basis[static_cast<std::size_t>(i)];
    if (bj < static_cast<std::size_t>(n)) result.x[static_cast<Eigen::Index>(bj)] = tab(i, rhs);
  }
  result.objective = c.dot(result.x);
  if (opt.tableau_dump) {
    *opt.tableau_dump << "final tableau (" << tab.rows() << "x" << tab.cols() << ")\n";
    for (Eigen::Index i = 0; i < tab.rows(); ++i) {
      for (Eigen::Index j = 0; j < tab.cols(); ++j) *opt.tableau_dump << (j ? " " : "") << tab(i, j);
      *opt.tableau_dump << "\n";
    }
  }
  return result;
}

}  // namespace avgcost
