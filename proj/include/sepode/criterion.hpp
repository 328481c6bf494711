#pragma once

#include "sepode/quadrature.hpp"
#include "sepode/smoothing.hpp"
#include "sepode/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace sepode {

inline constexpr double kRidgeCondThreshold = 1e12;
inline constexpr double kRidgeScale = 1e-10;

/// Cumulative integrals of g and h along the smoother grid plus the Gram
/// integrals of the linear block. Column s*p_l + j of G_cols is the
/// cumulative integral of g(s, j) along the grid.
struct DesignMatrices {
    VectorXd grid;
    MatrixXd G_cols;  ///< m x (d * p_l)
    MatrixXd H_grid;  ///< m x d
    MatrixXd A_hat;   ///< d x p_l, integral of G over [0, T]
    MatrixXd B_hat;   ///< p_l x p_l, integral of G^T G
};

/// Closed-form minimizer of the criterion over (xi, theta_L) at fixed
/// theta_NL, along with the design it was computed from.
struct LinearSolveResult {
    VectorXd xi_hat;
    VectorXd theta_l_hat;
    DesignMatrices design;
    double cond_B = 1.0;
    bool ridge_used = false;
};

namespace detail {

/// Raw g and h values along the grid, states clipped at the model's floor.
/// Throws FieldEvalError on any non-finite entry.
struct FieldGrid {
    MatrixXd g_vals;  ///< m x (d * p_l)
    MatrixXd h_vals;  ///< m x d
};

inline FieldGrid eval_field_grid(const SeparableModel& model, const SmootherFit& fit,
                                 const VectorXd& theta_nl) {
    if (theta_nl.size() != model.p_nl)
        throw ContractError("eval_field_grid: theta_nl size mismatch for " + model.name);
    if (fit.values.cols() != model.d)
        throw ContractError("eval_field_grid: smoother dimension mismatch for " + model.name);
    const Eigen::Index m = fit.grid.size();
    FieldGrid out;
    out.g_vals.resize(m, model.d * model.p_l);
    out.h_vals.resize(m, model.d);
    MatrixXd g(model.d, model.p_l);
    VectorXd h(model.d), x(model.d);
    for (Eigen::Index i = 0; i < m; ++i) {
        x = fit.values.row(i).cwiseMax(model.state_floor).transpose();
        model.g_eval(fit.grid[i], x, theta_nl, g);
        model.h_eval(fit.grid[i], x, theta_nl, h);
        if (!g.allFinite() || !h.allFinite())
            throw FieldEvalError("non-finite field evaluation at t=" +
                                     std::to_string(fit.grid[i]) + " for " + model.name,
                                 theta_nl);
        for (Eigen::Index s = 0; s < model.d; ++s)
            out.g_vals.row(i).segment(s * model.p_l, model.p_l) = g.row(s);
        out.h_vals.row(i) = h.transpose();
    }
    return out;
}

inline DesignMatrices design_from_field(const SeparableModel& model, const SmootherFit& fit,
                                        const FieldGrid& field) {
    DesignMatrices design;
    design.grid = fit.grid;
    design.G_cols = cumtrapz(fit.grid, field.g_vals);
    design.H_grid = cumtrapz(fit.grid, field.h_vals);
    const VectorXd w = trapz_weights(fit.grid);
    design.A_hat.resize(model.d, model.p_l);
    design.B_hat = MatrixXd::Zero(model.p_l, model.p_l);
    for (Eigen::Index s = 0; s < model.d; ++s)
        for (Eigen::Index j = 0; j < model.p_l; ++j)
            design.A_hat(s, j) = w.dot(design.G_cols.col(s * model.p_l + j));
    for (Eigen::Index j = 0; j < model.p_l; ++j)
        for (Eigen::Index k = j; k < model.p_l; ++k) {
            double acc = 0.0;
            for (Eigen::Index s = 0; s < model.d; ++s)
                acc += w.dot(design.G_cols.col(s * model.p_l + j)
                                 .cwiseProduct(design.G_cols.col(s * model.p_l + k)));
            design.B_hat(j, k) = acc;
            design.B_hat(k, j) = acc;
        }
    return design;
}

}  // namespace detail

/// Cumulative design integrals for the given theta_NL on the smoother grid.
inline DesignMatrices build_design(const SeparableModel& model, const SmootherFit& fit,
                                   const VectorXd& theta_nl) {
    return detail::design_from_field(model, fit,
                                     detail::eval_field_grid(model, fit, theta_nl));
}

/// Closed-form (xi-hat, theta_L-hat) minimizing the discretized criterion at
/// fixed theta_NL. Linear systems are solved by factorization, never by
/// explicit inversion; near-singular B gets a small diagnostic ridge.
inline LinearSolveResult solve_linear(DesignMatrices design, const SmootherFit& fit,
                                      const SeparableModel* model = nullptr) {
    if (design.grid.size() != fit.grid.size() ||
        (design.grid - fit.grid).cwiseAbs().maxCoeff() != 0.0)
        throw ContractError("solve_linear: design grid must match smoother grid");
    const Eigen::Index d = design.H_grid.cols();
    const Eigen::Index p_l = design.B_hat.rows();
    const VectorXd w = trapz_weights(design.grid);
    const double T = design.grid[design.grid.size() - 1] - design.grid[0];

    LinearSolveResult result;

    // condition estimate from the symmetric eigenvalues of B
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(design.B_hat, Eigen::EigenvaluesOnly);
    const VectorXd ev = eig.eigenvalues();
    const double ev_max = ev.size() ? ev[ev.size() - 1] : 0.0;
    const double ev_min = ev.size() ? ev[0] : 0.0;
    result.cond_B = (ev_min > 0.0 && ev_max > 0.0)
                        ? ev_max / ev_min
                        : std::numeric_limits<double>::infinity();
    if (result.cond_B < 1.0) result.cond_B = 1.0;

    MatrixXd B = design.B_hat;
    if (!(result.cond_B <= kRidgeCondThreshold)) {
        const double ridge = kRidgeScale * B.trace() / static_cast<double>(p_l);
        B.diagonal().array() += ridge;
        result.ridge_used = true;
    }

    Eigen::LDLT<MatrixXd> B_fact(B);
    const auto name_columns = [&]() {
        std::vector<std::string> cols;
        const double scale = design.B_hat.diagonal().maxCoeff();
        for (Eigen::Index j = 0; j < p_l; ++j)
            if (!(design.B_hat(j, j) > 1e-14 * scale) || !(scale > 0.0))
                cols.push_back(model && j < static_cast<Eigen::Index>(
                                               model->param_names_l.size())
                                   ? model->param_names_l[j]
                                   : "theta_l[" + std::to_string(j) + "]");
        if (cols.empty()) cols.push_back("<none identified>");
        return cols;
    };
    const VectorXd pivots = B_fact.vectorD();
    const double pivot_max = pivots.size() ? pivots.cwiseAbs().maxCoeff() : 0.0;
    if (B_fact.info() != Eigen::Success || !(pivot_max > 0.0) ||
        pivots.minCoeff() <= 1e-14 * pivot_max)
        throw SingularDesignError("B-hat singular after ridge", name_columns());

    // z(t) = x-hat(t) - H-hat(t): the offset-corrected data
    MatrixXd z = fit.values - design.H_grid;

    VectorXd int_z(d);          // integral of z
    VectorXd int_Gz(p_l);       // integral of G^T z
    for (Eigen::Index s = 0; s < d; ++s) int_z[s] = w.dot(z.col(s));
    for (Eigen::Index j = 0; j < p_l; ++j) {
        double acc = 0.0;
        for (Eigen::Index s = 0; s < d; ++s)
            acc += w.dot(design.G_cols.col(s * p_l + j).cwiseProduct(z.col(s)));
        int_Gz[j] = acc;
    }

    // xi-hat = (T I - A B^{-1} A^T)^{-1} (int z - A B^{-1} int G^T z)
    const MatrixXd BinvAt = B_fact.solve(design.A_hat.transpose());  // p_l x d
    MatrixXd schur = -design.A_hat * BinvAt;
    schur.diagonal().array() += T;
    const VectorXd rhs = int_z - design.A_hat * B_fact.solve(int_Gz);
    Eigen::LDLT<MatrixXd> schur_fact(schur);
    if (schur_fact.info() != Eigen::Success)
        throw SingularDesignError("initial-value system singular", name_columns());
    result.xi_hat = schur_fact.solve(rhs);

    // theta_L-hat = B^{-1} integral G^T (z - xi)
    result.theta_l_hat =
        B_fact.solve(int_Gz - design.A_hat.transpose() * result.xi_hat);

    if (!result.xi_hat.allFinite() || !result.theta_l_hat.allFinite())
        throw SingularDesignError("linear solve produced non-finite estimates",
                                  name_columns());
    result.design = std::move(design);
    return result;
}

struct ReducedValue {
    double value = 0.0;
    LinearSolveResult lin;
};

/// Reduced criterion M(theta_NL): the criterion with (xi, theta_L) profiled
/// out in closed form. Propagates design/solve errors; optimizers treat
/// those theta_NL as infeasible.
inline ReducedValue reduced_criterion(const SeparableModel& model, const SmootherFit& fit,
                                      const VectorXd& theta_nl) {
    ReducedValue out;
    out.lin = solve_linear(build_design(model, fit, theta_nl), fit, &model);
    const VectorXd w = trapz_weights(fit.grid);
    double value = 0.0;
    for (Eigen::Index s = 0; s < model.d; ++s) {
        VectorXd resid = fit.values.col(s) - out.lin.design.H_grid.col(s);
        resid.array() -= out.lin.xi_hat[s];
        for (Eigen::Index j = 0; j < model.p_l; ++j)
            resid -= out.lin.theta_l_hat[j] * out.lin.design.G_cols.col(s * model.p_l + j);
        value += w.dot(resid.cwiseAbs2());
    }
    out.value = value;
    return out;
}

/// Full integral criterion at explicit (xi, theta_NL, theta_L). Non-finite
/// field evaluations yield the +inf sentinel rather than an exception.
inline double full_criterion(const SeparableModel& model, const SmootherFit& fit,
                             const ParamSplit& params) {
    check_dims(model, params);
    detail::FieldGrid field;
    try {
        field = detail::eval_field_grid(model, fit, params.theta_nl);
    } catch (const FieldEvalError&) {
        return std::numeric_limits<double>::infinity();
    }
    const Eigen::Index m = fit.grid.size();
    MatrixXd F(m, model.d);
    for (Eigen::Index s = 0; s < model.d; ++s)
        F.col(s) = field.g_vals.middleCols(s * model.p_l, model.p_l) * params.theta_l +
                   field.h_vals.col(s);
    const MatrixXd F_int = cumtrapz(fit.grid, F);
    const VectorXd w = trapz_weights(fit.grid);
    double value = 0.0;
    for (Eigen::Index s = 0; s < model.d; ++s) {
        VectorXd resid = fit.values.col(s) - F_int.col(s);
        resid.array() -= params.xi[s];
        value += w.dot(resid.cwiseAbs2());
    }
    return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
}

}  // namespace sepode
