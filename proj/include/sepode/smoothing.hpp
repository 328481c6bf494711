#pragma once

#include "sepode/quadrature.hpp"
#include "sepode/spline.hpp"
#include "sepode/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace sepode {

/// Nonparametric state estimate x-hat evaluated on a dense uniform grid
/// spanning [0, T]. Immutable and shareable across workers.
struct SmootherFit {
    VectorXd grid;      ///< m points, grid[0] = 0, grid[m-1] = T
    MatrixXd values;    ///< m x d
    VectorXd lambda;    ///< chosen smoothing parameter per state
    std::string method = "cubic_smoothing_spline";
    VectorXd lambda_grid;   ///< candidate lambdas
    MatrixXd gcv_scores;    ///< lambda_grid.size() x d
    std::vector<NaturalCubicSpline> splines;  ///< per state, for exact re-evaluation
    double horizon = 0.0;

    Eigen::Index m() const { return grid.size(); }
    Eigen::Index d() const { return values.cols(); }
};

/// 25 log-spaced candidates around the natural smoothing scale
/// R = (T/n)^3 * n.
inline VectorXd default_lambda_grid(double T, Eigen::Index n, int count = 25) {
    const double R = std::pow(T / static_cast<double>(n), 3) * static_cast<double>(n);
    const double lo = std::log10(1e-6 * R), hi = std::log10(1e2 * R);
    VectorXd grid(count);
    for (int i = 0; i < count; ++i)
        grid[i] = std::pow(10.0, lo + (hi - lo) * i / (count - 1));
    return grid;
}

/// Per-coordinate cubic smoothing spline with the smoothing level chosen by
/// generalized cross-validation over lambda_grid; the winning fit is
/// evaluated on a dense uniform grid of max(201, 10n+1) points (override
/// with grid_size).
inline SmootherFit fit_smoother(const ObservationSet& obs, double T,
                                const VectorXd& lambda_grid, Eigen::Index grid_size = 0) {
    validate(obs);
    if (lambda_grid.size() == 0) throw ContractError("fit_smoother: empty lambda grid");
    for (Eigen::Index k = 0; k < lambda_grid.size(); ++k)
        if (!(lambda_grid[k] > 0.0))
            throw ContractError("fit_smoother: lambdas must be positive");
    if (!(T > 0.0) || obs.times[obs.times.size() - 1] > T || obs.times[0] < 0.0)
        throw ContractError("fit_smoother: times must lie within [0, T]");

    const Eigen::Index n = obs.times.size();
    const Eigen::Index d = obs.Y.cols();
    const Eigen::Index m =
        grid_size > 0 ? grid_size : std::max<Eigen::Index>(201, 10 * n + 1);

    SmootherFit fit;
    fit.grid = linspace(0.0, T, m);
    fit.values.resize(m, d);
    fit.lambda.resize(d);
    fit.lambda_grid = lambda_grid;
    fit.gcv_scores.resize(lambda_grid.size(), d);
    fit.splines.resize(d);
    fit.horizon = T;

    for (Eigen::Index j = 0; j < d; ++j) {
        const VectorXd y = obs.Y.col(j);
        Eigen::Index best = 0;
        double best_score = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < lambda_grid.size(); ++k) {
            const auto trial = detail::fit_smoothing_spline(obs.times, y, lambda_grid[k]);
            const double score = detail::gcv_score(trial, n);
            fit.gcv_scores(k, j) = score;
            if (score < best_score) {
                best_score = score;
                best = k;
            }
        }
        const auto winner = detail::fit_smoothing_spline(obs.times, y, lambda_grid[best]);
        fit.lambda[j] = lambda_grid[best];
        fit.splines[j] = winner.spline;
        for (Eigen::Index i = 0; i < m; ++i) fit.values(i, j) = winner.spline(fit.grid[i]);
    }
    return fit;
}

/// Linear interpolation between adjacent grid values.
inline VectorXd eval_smoother(const SmootherFit& fit, double t) {
    const Eigen::Index m = fit.grid.size();
    if (t < fit.grid[0] || t > fit.grid[m - 1])
        throw std::range_error("eval_smoother: t outside [0, T]");
    Eigen::Index lo = 0, hi = m - 1;
    while (hi - lo > 1) {
        const Eigen::Index mid = (lo + hi) / 2;
        (fit.grid[mid] <= t ? lo : hi) = mid;
    }
    const double span = fit.grid[hi] - fit.grid[lo];
    const double w = (t - fit.grid[lo]) / span;
    return ((1.0 - w) * fit.values.row(lo) + w * fit.values.row(hi)).transpose();
}

/// Wrap precomputed grid values as a SmootherFit (synthetic fits in tests,
/// exact-trajectory studies).
inline SmootherFit smoother_from_values(const VectorXd& grid, const MatrixXd& values) {
    check_grid(grid);
    if (values.rows() != grid.size())
        throw ContractError("smoother_from_values: row count must match grid");
    SmootherFit fit;
    fit.grid = grid;
    fit.values = values;
    fit.lambda = VectorXd::Zero(values.cols());
    fit.method = "external";
    fit.horizon = grid[grid.size() - 1];
    return fit;
}

}  // namespace sepode
