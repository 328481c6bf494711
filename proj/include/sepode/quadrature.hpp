#pragma once

#include "sepode/types.hpp"

namespace sepode {

inline void check_grid(const VectorXd& grid) {
    if (grid.size() < 2) throw ContractError("quadrature: grid needs at least 2 points");
    for (Eigen::Index i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw ContractError("quadrature: grid must be strictly increasing");
}

/// Cumulative trapezoid integral per column; row i holds the integral from
/// grid[0] to grid[i], so row 0 is zero.
inline MatrixXd cumtrapz(const VectorXd& grid, const MatrixXd& values) {
    check_grid(grid);
    if (values.rows() != grid.size())
        throw ContractError("cumtrapz: values row count must match grid");
    MatrixXd out(values.rows(), values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        const double* v = values.col(j).data();
        double* o = out.col(j).data();
        o[0] = 0.0;
        for (Eigen::Index i = 1; i < grid.size(); ++i)
            o[i] = o[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (v[i] + v[i - 1]);
    }
    return out;
}

/// Composite trapezoid weights: trapz(f) == weights.dot(f on grid).
inline VectorXd trapz_weights(const VectorXd& grid) {
    check_grid(grid);
    VectorXd w = VectorXd::Zero(grid.size());
    for (Eigen::Index i = 1; i < grid.size(); ++i) {
        const double half_dt = 0.5 * (grid[i] - grid[i - 1]);
        w[i - 1] += half_dt;
        w[i] += half_dt;
    }
    return w;
}

inline double trapz(const VectorXd& grid, const VectorXd& values) {
    check_grid(grid);
    if (values.size() != grid.size())
        throw ContractError("trapz: values size must match grid");
    double acc = 0.0;
    for (Eigen::Index i = 1; i < grid.size(); ++i)
        acc += 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
    return acc;
}

inline VectorXd linspace(double lo, double hi, Eigen::Index count) {
    return VectorXd::LinSpaced(count, lo, hi);
}

}  // namespace sepode
