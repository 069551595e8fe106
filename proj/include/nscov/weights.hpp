#pragma once

// Covariate-to-weight maps for the process mixture.
//
//  * MultinomialLogistic: w_j(x)^2 = softmax_j(x' alpha), alpha_1 = 0.
//    Squared weights sum to one.
//  * SimpleLogit (M = 2): w_2 = logistic(x' alpha), w_1 = 1 - w_2. Weights sum
//    to one. Only used for the one-dimensional illustration curves.
//  * Partition: piecewise-constant weights a(j, cell) over axis-aligned cells
//    of covariate space. Entries may be negative.

#include <nscov/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace nscov {

enum class WeightKind { MultinomialLogistic, SimpleLogit, Partition };

class WeightScheme {
public:
  // alphas is M x p; row 0 must be zero unless anchored is false (used when
  // relabeling components, since the softmax is shift invariant).
  static WeightScheme multinomial_logistic(Eigen::MatrixXd alphas,
                                           bool anchored = true) {
    if (alphas.rows() < 1)
      throw ArgumentError("WeightScheme: need at least one component");
    if (anchored && !alphas.row(0).isZero(0.0))
      throw ArgumentError("WeightScheme: alpha_1 must be the zero vector");
    WeightScheme s(WeightKind::MultinomialLogistic);
    s.coef_ = std::move(alphas);
    return s;
  }

  // One component with w = 1 for covariates of dimension p.
  static WeightScheme stationary(Eigen::Index p) {
    return multinomial_logistic(Eigen::MatrixXd::Zero(1, p));
  }

  static WeightScheme simple_logit(const Eigen::VectorXd &alpha) {
    WeightScheme s(WeightKind::SimpleLogit);
    s.coef_ = alpha.transpose();
    return s;
  }

  // edges[k] are the sorted cell boundaries along covariate k (at least two).
  // Cells are [e_0, e_1), ..., [e_{n-1}, e_n]; cell index is mixed radix with
  // covariate 0 varying fastest. a is M x (number of cells).
  static WeightScheme partition(std::vector<std::vector<double>> edges,
                                Eigen::MatrixXd a) {
    Eigen::Index cells = 1;
    for (const auto &e : edges) {
      if (e.size() < 2)
        throw ArgumentError("WeightScheme: each covariate needs >= 2 edges");
      for (std::size_t i = 1; i < e.size(); ++i)
        if (!(e[i] > e[i - 1]))
          throw ArgumentError("WeightScheme: edges must be strictly increasing");
      cells *= static_cast<Eigen::Index>(e.size() - 1);
    }
    if (edges.empty() || a.rows() < 1 || a.cols() != cells)
      throw ArgumentError("WeightScheme: partition matrix must be M x cells");
    WeightScheme s(WeightKind::Partition);
    s.edges_ = std::move(edges);
    s.coef_ = std::move(a);
    return s;
  }

  WeightKind kind() const { return kind_; }

  Eigen::Index components() const {
    return kind_ == WeightKind::SimpleLogit ? 2 : coef_.rows();
  }

  Eigen::Index dim() const {
    return kind_ == WeightKind::Partition
               ? static_cast<Eigen::Index>(edges_.size())
               : coef_.cols();
  }

  // M x p for MultinomialLogistic, 1 x p for SimpleLogit, M x cells for Partition.
  const Eigen::MatrixXd &coefficients() const { return coef_; }

  Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    check_dim(x);
    switch (kind_) {
    case WeightKind::MultinomialLogistic:
      return softmax(coef_ * x).cwiseSqrt();
    case WeightKind::SimpleLogit: {
      const double w2 = logistic(coef_.row(0).dot(x));
      Eigen::VectorXd w(2);
      w << logistic(-coef_.row(0).dot(x)), w2;
      return w;
    }
    case WeightKind::Partition:
      return coef_.col(cell_of(x));
    }
    return {};
  }

  // Squared weights; for MultinomialLogistic this is the softmax itself and
  // avoids a sqrt/square round trip.
  Eigen::VectorXd squared(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    if (kind_ == WeightKind::MultinomialLogistic) {
      check_dim(x);
      return softmax(coef_ * x);
    }
    return (*this)(x).array().square();
  }

  // M x p matrix of dw_j / dx_k.
  Eigen::MatrixXd gradient(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    check_dim(x);
    switch (kind_) {
    case WeightKind::MultinomialLogistic: {
      const Eigen::VectorXd s = softmax(coef_ * x);
      const Eigen::RowVectorXd mean_alpha = s.transpose() * coef_;
      Eigen::MatrixXd g = coef_.rowwise() - mean_alpha;
      // dw_j/dx = w_j (alpha_j - sum_l s_l alpha_l) / 2
      g.array().colwise() *= s.cwiseSqrt().array() * 0.5;
      return g;
    }
    case WeightKind::SimpleLogit: {
      const double w2 = logistic(coef_.row(0).dot(x));
      Eigen::MatrixXd g(2, coef_.cols());
      g.row(1) = w2 * (1.0 - w2) * coef_.row(0);
      g.row(0) = -g.row(1);
      return g;
    }
    case WeightKind::Partition:
      throw UnsupportedError("weight_gradient: partition weights are piecewise constant");
    }
    return {};
  }

  Eigen::Index cell_of(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    Eigen::Index cell = 0, stride = 1;
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const auto &e = edges_[k];
      const double v = x(static_cast<Eigen::Index>(k));
      if (!(v >= e.front() && v <= e.back()))
        throw DomainError("WeightScheme: covariate " + std::to_string(k) +
                          " outside the partition");
      Eigen::Index i = 0;
      while (i + 2 < static_cast<Eigen::Index>(e.size()) && v >= e[i + 1])
        ++i;
      cell += i * stride;
      stride *= static_cast<Eigen::Index>(e.size() - 1);
    }
    return cell;
  }

  static Eigen::VectorXd softmax(const Eigen::VectorXd &z) {
    const double m = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - m).exp();
    e /= e.sum();
    // keep every component strictly positive when the logits spread past
    // the exp underflow range
    return e.cwiseMax(std::numeric_limits<double>::min());
  }

  static double logistic(double z) {
    if (z >= 0.0)
      return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

private:
  explicit WeightScheme(WeightKind kind) : kind_(kind) {}

  void check_dim(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    if (x.size() != dim())
      throw ArgumentError("WeightScheme: covariate dimension " +
                          std::to_string(x.size()) + " != " +
                          std::to_string(dim()));
  }

  WeightKind kind_;
  Eigen::MatrixXd coef_;
  std::vector<std::vector<double>> edges_;
};

inline Eigen::VectorXd eval_weights(const WeightScheme &scheme,
                                    const Eigen::Ref<const Eigen::VectorXd> &x) {
  return scheme(x);
}

inline Eigen::MatrixXd weight_gradient(const WeightScheme &scheme,
                                       const Eigen::Ref<const Eigen::VectorXd> &x) {
  return scheme.gradient(x);
}

} // namespace nscov
