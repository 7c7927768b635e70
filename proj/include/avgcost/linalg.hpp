#pragma once

#include <cstddef>
#include <vector>

#include "avgcost/mdp.hpp"

namespace avgcost {

/// Reciprocal condition threshold below which a stopped system counts as singular.
inline constexpr double kSingularRcond = 1e-13;
/// Relative threshold of the rank-revealing QR used for unichain detection.
inline constexpr double kRankTolerance = 1e-10;

/// Dense LU with partial pivoting. Throws SolverError when the reciprocal
/// condition estimate falls below rcond_min.
Vector solve_lu(const Matrix& a, const Vector& b, double rcond_min = kSingularRcond);

/// Rank of a from a column-pivoting Householder QR.
std::size_t numerical_rank(const Matrix& a, double tol = kRankTolerance);

/// Closed communicating classes of the stochastic matrix p (entries > 0 are edges),
/// each sorted, ordered by smallest member.
std::vector<std::vector<std::size_t>> recurrent_classes(const Matrix& p);

/// reach[x] is true when some path of positive-probability steps leads from x
/// into the target set (targets reach themselves trivially).
std::vector<bool> reaches(const Matrix& p, const std::vector<bool>& target);

}  // namespace avgcost
