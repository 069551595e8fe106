#pragma once

#include <nscov/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <string>

namespace nscov {

// Cholesky factor of a symmetric matrix plus the diagonal jitter that was
// needed to obtain it.
struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  Eigen::Index size() const { return llt.matrixL().rows(); }

  double log_det() const {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
};

// Factorize A, escalating a diagonal jitter of 1e-10 * mean(diag) by factors of
// ten up to 1e-6 * mean(diag) on failure. Throws NumericalError with basic
// conditioning diagnostics when every attempt fails.
inline JitteredCholesky factorize_with_jitter(const Eigen::MatrixXd &a,
                                              const std::string &what = "matrix") {
  if (a.rows() != a.cols())
    throw ArgumentError(what + ": not square");
  JitteredCholesky out;
  out.llt.compute(a);
  if (out.llt.info() == Eigen::Success)
    return out;

  const double mean_diag = a.diagonal().mean();
  const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
  for (double rel = 1e-10; rel <= 1e-6 * 1.0000001; rel *= 10.0) {
    Eigen::MatrixXd b = a;
    b.diagonal().array() += rel * scale;
    out.llt.compute(b);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = rel * scale;
      return out;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  std::ostringstream msg;
  msg << what << ": Cholesky failed after maximum jitter (n=" << a.rows()
      << ", mean diag=" << mean_diag;
  if (eig.info() == Eigen::Success)
    msg << ", min eigenvalue=" << eig.eigenvalues().minCoeff()
        << ", max eigenvalue=" << eig.eigenvalues().maxCoeff();
  msg << ")";
  throw NumericalError(msg.str());
}

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd &a) {
  return 0.5 * (a + a.transpose());
}

// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
inline Eigen::MatrixXd spd_inverse(const JitteredCholesky &chol) {
  const Eigen::Index n = chol.size();
  return symmetrize(chol.llt.solve(Eigen::MatrixXd::Identity(n, n)));
}

} // namespace nscov
