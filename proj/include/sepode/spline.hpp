#pragma once

#include "sepode/types.hpp"

#include <cmath>

namespace sepode {

/// Natural cubic spline given values and second derivatives at the knots.
/// Evaluation outside the knot range extrapolates linearly with the
/// boundary slope, consistent with the natural boundary conditions.
struct NaturalCubicSpline {
    VectorXd knots;   ///< strictly increasing
    VectorXd values;  ///< f(knots)
    VectorXd second;  ///< f''(knots); zero at both ends

    double operator()(double t) const {
        const Eigen::Index n = knots.size();
        if (t <= knots[0]) {
            const double h = knots[1] - knots[0];
            const double slope = (values[1] - values[0]) / h - h * second[1] / 6.0;
            return values[0] + slope * (t - knots[0]);
        }
        if (t >= knots[n - 1]) {
            const double h = knots[n - 1] - knots[n - 2];
            const double slope = (values[n - 1] - values[n - 2]) / h + h * second[n - 2] / 6.0;
            return values[n - 1] + slope * (t - knots[n - 1]);
        }
        // binary search for the interval containing t
        Eigen::Index lo = 0, hi = n - 1;
        while (hi - lo > 1) {
            const Eigen::Index mid = (lo + hi) / 2;
            (knots[mid] <= t ? lo : hi) = mid;
        }
        const double h = knots[hi] - knots[lo];
        const double a = (knots[hi] - t) / h;
        const double b = (t - knots[lo]) / h;
        return a * values[lo] + b * values[hi] +
               ((a * a * a - a) * second[lo] + (b * b * b - b) * second[hi]) * h * h / 6.0;
    }
};

namespace detail {

/// One-coordinate smoothing-spline fit: minimizes
///   sum_i (y_i - f(t_i))^2 + lambda * integral f''^2
/// over natural cubic splines with knots at the data points (Reinsch's
/// banded formulation). edf is the trace of the hat matrix, needed for GCV.
struct SmoothingFit {
    NaturalCubicSpline spline;
    double rss = 0.0;
    double edf = 0.0;
    double roughness = 0.0;  ///< integral of f''^2 at the solution
};

inline SmoothingFit fit_smoothing_spline(const VectorXd& t, const VectorXd& y, double lambda) {
    const Eigen::Index n = t.size();
    if (n < 4) throw ContractError("smoothing spline: need at least 4 points");
    if (y.size() != n) throw ContractError("smoothing spline: y size mismatch");
    if (!(lambda > 0.0)) throw ContractError("smoothing spline: lambda must be positive");
    for (Eigen::Index i = 1; i < n; ++i)
        if (!(t[i] > t[i - 1]))
            throw ContractError("smoothing spline: times must be strictly increasing");

    const Eigen::Index N = n - 2;  // interior knots
    VectorXd h(n - 1);
    for (Eigen::Index i = 0; i + 1 < n; ++i) h[i] = t[i + 1] - t[i];

    // Pentadiagonal M = R + lambda * Q^T Q, stored by bands.
    // Q is the n x (n-2) second-difference matrix, R the (n-2) x (n-2)
    // tridiagonal roughness Gram matrix.
    VectorXd m0(N), m1(N), m2(N);  // diagonal, first and second superdiagonal
    m1.setZero();
    m2.setZero();
    auto q0 = [&](Eigen::Index c) { return 1.0 / h[c]; };
    auto q1 = [&](Eigen::Index c) { return -1.0 / h[c] - 1.0 / h[c + 1]; };
    auto q2 = [&](Eigen::Index c) { return 1.0 / h[c + 1]; };
    for (Eigen::Index c = 0; c < N; ++c) {
        const double a = q0(c), b = q1(c), d = q2(c);
        m0[c] = (h[c] + h[c + 1]) / 3.0 + lambda * (a * a + b * b + d * d);
        if (c + 1 < N)
            m1[c] = h[c + 1] / 6.0 + lambda * (b * q0(c + 1) + d * q1(c + 1));
        if (c + 2 < N) m2[c] = lambda * (d * q0(c + 2));
    }

    // rhs = Q^T y (second divided differences)
    VectorXd rhs(N);
    for (Eigen::Index c = 0; c < N; ++c)
        rhs[c] = (y[c + 2] - y[c + 1]) / h[c + 1] - (y[c + 1] - y[c]) / h[c];

    // LDL^T of the pentadiagonal SPD matrix
    VectorXd dd(N), l1 = VectorXd::Zero(N), l2 = VectorXd::Zero(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        double di = m0[i];
        if (i >= 1) di -= l1[i - 1] * l1[i - 1] * dd[i - 1];
        if (i >= 2) di -= l2[i - 2] * l2[i - 2] * dd[i - 2];
        if (!(di > 0.0))
            throw ContractError("smoothing spline: factorization failed (degenerate times?)");
        dd[i] = di;
        if (i + 1 < N) {
            double v = m1[i];
            if (i >= 1) v -= l1[i - 1] * l2[i - 1] * dd[i - 1];
            l1[i] = v / di;
        }
        if (i + 2 < N) l2[i] = m2[i] / di;
    }

    // gamma = M^{-1} rhs: forward substitution, diagonal scale, back substitution
    VectorXd gamma = rhs;
    for (Eigen::Index i = 0; i < N; ++i) {
        if (i >= 1) gamma[i] -= l1[i - 1] * gamma[i - 1];
        if (i >= 2) gamma[i] -= l2[i - 2] * gamma[i - 2];
    }
    gamma.array() /= dd.array();
    for (Eigen::Index i = N - 1; i >= 0; --i) {
        if (i + 1 < N) gamma[i] -= l1[i] * gamma[i + 1];
        if (i + 2 < N) gamma[i] -= l2[i] * gamma[i + 2];
    }

    // fitted values g = y - lambda * Q gamma
    VectorXd qg = VectorXd::Zero(n);
    for (Eigen::Index c = 0; c < N; ++c) {
        qg[c] += q0(c) * gamma[c];
        qg[c + 1] += q1(c) * gamma[c];
        qg[c + 2] += q2(c) * gamma[c];
    }
    VectorXd fitted = y - lambda * qg;

    // Central bands of M^{-1} (Takahashi recursion on the LDL^T factors);
    // exact for a banded matrix and gives tr(A) = n - lambda*tr(M^{-1} Q^T Q)
    // in O(n).
    VectorXd u0(N), u1 = VectorXd::Zero(N), u2 = VectorXd::Zero(N);
    for (Eigen::Index i = N - 1; i >= 0; --i) {
        const double a1 = (i + 1 < N) ? l1[i] : 0.0;
        const double a2 = (i + 2 < N) ? l2[i] : 0.0;
        const double u1_next = (i + 1 < N) ? u1[i + 1] : 0.0;   // U[i+1][i+2]
        const double u0_n1 = (i + 1 < N) ? u0[i + 1] : 0.0;     // U[i+1][i+1]
        const double u0_n2 = (i + 2 < N) ? u0[i + 2] : 0.0;     // U[i+2][i+2]
        if (i + 2 < N) u2[i] = -(a1 * u1_next + a2 * u0_n2);    // U[i][i+2]
        if (i + 1 < N) u1[i] = -(a1 * u0_n1 + a2 * u1_next);    // U[i][i+1]
        u0[i] = 1.0 / dd[i] - (a1 * u1[i] + a2 * u2[i]);        // U[i][i]
    }

    double trace_inv_qtq = 0.0;
    for (Eigen::Index c = 0; c < N; ++c) {
        const double a = q0(c), b = q1(c), d = q2(c);
        trace_inv_qtq += u0[c] * (a * a + b * b + d * d);
        if (c + 1 < N)
            trace_inv_qtq += 2.0 * u1[c] * (b * q0(c + 1) + d * q1(c + 1));
        if (c + 2 < N) trace_inv_qtq += 2.0 * u2[c] * (d * q0(c + 2));
    }

    SmoothingFit fit;
    fit.spline.knots = t;
    fit.spline.values = fitted;
    fit.spline.second = VectorXd::Zero(n);
    fit.spline.second.segment(1, N) = gamma;
    fit.rss = (lambda * qg).squaredNorm();
    fit.edf = static_cast<double>(n) - lambda * trace_inv_qtq;
    // roughness = gamma^T R gamma
    double rough = 0.0;
    for (Eigen::Index c = 0; c < N; ++c) {
        rough += gamma[c] * gamma[c] * (h[c] + h[c + 1]) / 3.0;
        if (c + 1 < N) rough += 2.0 * gamma[c] * gamma[c + 1] * h[c + 1] / 6.0;
    }
    fit.roughness = rough;
    return fit;
}

/// Generalized cross-validation score, n*RSS / (n - tr A)^2.
inline double gcv_score(const SmoothingFit& fit, Eigen::Index n) {
    const double denom = static_cast<double>(n) - fit.edf;
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    return static_cast<double>(n) * fit.rss / (denom * denom);
}

}  // namespace detail

}  // namespace sepode
