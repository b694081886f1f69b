#pragma once

#include <Eigen/Dense>

#include <vector>

#include "cnmt/error.hpp"

namespace cnmt {

/// Ordinary least squares solution of X * b ~ y via column-pivoted QR.
/// Throws DegenerateDesign when X has fewer rows than columns or is rank
/// deficient.
template <typename DerivedX, typename DerivedY>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, 1> least_squares(
    const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (X.rows() < X.cols()) {
    throw DegenerateDesign("least squares: fewer observations than coefficients");
  }
  Eigen::ColPivHouseholderQR<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> qr(X);
  if (qr.rank() < X.cols()) {
    throw DegenerateDesign("least squares: design matrix columns are collinear");
  }
  return qr.solve(y.template cast<Scalar>());
}

/// Least squares with every coefficient constrained to be non-negative.
/// Coefficients that come out negative are pinned to zero and the remaining
/// free columns are refit, until no free coefficient is negative. The full
/// design must have full column rank.
template <typename DerivedX, typename DerivedY>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, 1> clamped_least_squares(
    const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector coef = least_squares(X, y);
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < X.cols(); ++j) free.push_back(j);

  while ((coef.array() < Scalar(0)).any()) {
    std::vector<Eigen::Index> kept;
    for (Eigen::Index j : free) {
      if (coef(j) >= Scalar(0)) kept.push_back(j);
    }
    coef.setZero();
    free = std::move(kept);
    if (free.empty()) break;

    Matrix sub(X.rows(), static_cast<Eigen::Index>(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) sub.col(k) = X.col(free[k]);
    const Vector partial = least_squares(sub, y);
    for (std::size_t k = 0; k < free.size(); ++k) coef(free[k]) = partial(k);
  }
  return coef;
}

}  // namespace cnmt
