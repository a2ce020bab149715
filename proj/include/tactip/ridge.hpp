#pragma once

// Closed-form ridge regression with an unpenalised intercept.

#include <Eigen/Dense>

#include "tactip/error.hpp"

namespace tactip {

struct RidgeSolution {
    Eigen::MatrixXd weights;  // features × outputs
    Eigen::VectorXd bias;     // outputs
};

/// Minimise ||Y - XW - 1b'||^2 + alpha ||W||^2 exactly. Solves whichever of
/// the primal (d×d) or dual (n×n) normal equations is smaller.
inline RidgeSolution fit_ridge(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double alpha) {
    if (X.rows() == 0 || X.rows() != Y.rows()) throw DataError("fit_ridge: need matching, non-empty X and Y rows");
    if (!(alpha > 0.0)) throw ParameterError("fit_ridge: alpha must be > 0");
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const Eigen::RowVectorXd y_mean = Y.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const Eigen::MatrixXd Yc = Y.rowwise() - y_mean;

    RidgeSolution sol;
    if (X.cols() <= X.rows()) {
        Eigen::MatrixXd gram = Xc.transpose() * Xc;
        gram.diagonal().array() += alpha;
        sol.weights = gram.llt().solve(Xc.transpose() * Yc);
    } else {
        Eigen::MatrixXd kernel = Xc * Xc.transpose();
        kernel.diagonal().array() += alpha;
        sol.weights = Xc.transpose() * kernel.llt().solve(Yc);
    }
    sol.bias = (y_mean - x_mean * sol.weights).transpose();
    return sol;
}

} // namespace tactip
