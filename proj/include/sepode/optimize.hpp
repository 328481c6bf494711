#pragma once

#include "sepode/criterion.hpp"
#include "sepode/models.hpp"
#include "sepode/smoothing.hpp"
#include "sepode/types.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace sepode {

enum class Algorithm {
    BoundedQuasiNewton,  ///< projected BFGS, central finite differences
    Simplex,             ///< Nelder-Mead with bound clamping
};

struct OptimizerConfig {
    /// Default: derivative-free simplex, applied identically to both
    /// drivers. The projected quasi-Newton path is available for
    /// polish-type studies.
    Algorithm algorithm = Algorithm::Simplex;
    int max_iters = 500;
    double tol = 1e-8;      ///< relative criterion-change tolerance
    double fd_step = 1e-6;  ///< relative finite-difference step (quasi-Newton)
    int restarts = 1;       ///< total starts (1 = just the supplied init)
};

namespace detail {

using BoxObjective = std::function<double(const VectorXd&)>;

struct BoxResult {
    VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::string reason = "none";
};

inline VectorXd clamp_box(VectorXd x, const VectorXd& lo, const VectorXd& hi) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] = std::min(std::max(x[i], lo[i]), hi[i]);
    return x;
}

/// Central finite-difference gradient; falls back to one-sided differences
/// at bounds or next to infeasible points, and to zero when both sides are
/// infeasible.
inline VectorXd fd_gradient(const BoxObjective& obj, const VectorXd& x, double f,
                            const VectorXd& lo, const VectorXd& hi, double rel_step) {
    const Eigen::Index dim = x.size();
    VectorXd grad = VectorXd::Zero(dim);
    VectorXd probe = x;
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double h = rel_step * std::max(std::abs(x[i]), 1.0);
        const double up = std::min(x[i] + h, hi[i]);
        const double dn = std::max(x[i] - h, lo[i]);
        double f_up = std::numeric_limits<double>::infinity();
        double f_dn = std::numeric_limits<double>::infinity();
        if (up > x[i]) {
            probe[i] = up;
            f_up = obj(probe);
        }
        if (dn < x[i]) {
            probe[i] = dn;
            f_dn = obj(probe);
        }
        probe[i] = x[i];
        if (std::isfinite(f_up) && std::isfinite(f_dn))
            grad[i] = (f_up - f_dn) / (up - dn);
        else if (std::isfinite(f_up) && std::isfinite(f))
            grad[i] = (f_up - f) / (up - x[i]);
        else if (std::isfinite(f_dn) && std::isfinite(f))
            grad[i] = (f - f_dn) / (x[i] - dn);
        else
            grad[i] = 0.0;
    }
    return grad;
}

/// Nelder-Mead on the clamped box; used directly for Algorithm::Simplex and
/// as the fallback when quasi-Newton line searches stall.
inline BoxResult nelder_mead(const BoxObjective& obj, const VectorXd& x0, const VectorXd& lo,
                             const VectorXd& hi, double tol, int budget) {
    const Eigen::Index dim = x0.size();
    BoxResult result;
    std::vector<VectorXd> pts;
    std::vector<double> fs;
    pts.push_back(clamp_box(x0, lo, hi));
    fs.push_back(obj(pts[0]));
    for (Eigen::Index i = 0; i < dim; ++i) {
        VectorXd v = pts[0];
        double step = 0.05 * std::max(std::abs(v[i]), 1.0);
        if (v[i] + step > hi[i]) step = -step;
        v[i] += step;
        pts.push_back(clamp_box(v, lo, hi));
        fs.push_back(obj(pts.back()));
    }
    const auto order = [&]() {
        for (size_t a = 0; a < pts.size(); ++a)
            for (size_t b = a + 1; b < pts.size(); ++b)
                if (fs[b] < fs[a]) {
                    std::swap(fs[a], fs[b]);
                    std::swap(pts[a], pts[b]);
                }
    };
    order();

    int iter = 0;
    while (iter < budget) {
        ++iter;
        const size_t worst = pts.size() - 1;
        if (std::isfinite(fs[0]) &&
            (fs[worst] - fs[0]) <= tol * (std::abs(fs[0]) + tol)) {
            result.converged = true;
            result.reason = "simplex_ftol";
            break;
        }
        VectorXd centroid = VectorXd::Zero(dim);
        for (size_t a = 0; a < worst; ++a) centroid += pts[a];
        centroid /= static_cast<double>(worst);

        const VectorXd refl = clamp_box(centroid + (centroid - pts[worst]), lo, hi);
        const double f_refl = obj(refl);
        if (f_refl < fs[0]) {
            const VectorXd expa = clamp_box(centroid + 2.0 * (centroid - pts[worst]), lo, hi);
            const double f_expa = obj(expa);
            if (f_expa < f_refl) {
                pts[worst] = expa;
                fs[worst] = f_expa;
            } else {
                pts[worst] = refl;
                fs[worst] = f_refl;
            }
        } else if (f_refl < fs[worst - 1]) {
            pts[worst] = refl;
            fs[worst] = f_refl;
        } else {
            const VectorXd contr =
                clamp_box(centroid + 0.5 * (pts[worst] - centroid), lo, hi);
            const double f_contr = obj(contr);
            if (f_contr < fs[worst]) {
                pts[worst] = contr;
                fs[worst] = f_contr;
            } else {
                for (size_t a = 1; a < pts.size(); ++a) {
                    pts[a] = clamp_box(pts[0] + 0.5 * (pts[a] - pts[0]), lo, hi);
                    fs[a] = obj(pts[a]);
                }
            }
        }
        order();
    }
    result.iterations = iter;
    result.x = pts[0];
    result.f = fs[0];
    if (!result.converged) result.reason = iter >= budget ? "maxiter" : result.reason;
    if (!std::isfinite(result.f)) {
        result.converged = false;
        result.reason = "infeasible";
    }
    return result;
}

/// Projected BFGS with backtracking line search along the clamped path;
/// after two stalled line searches the remaining budget goes to the
/// simplex fallback.
inline BoxResult minimize_box(const BoxObjective& obj, const VectorXd& x0, const VectorXd& lo,
                              const VectorXd& hi, const OptimizerConfig& cfg) {
    const Eigen::Index dim = x0.size();
    if (dim == 0) {
        BoxResult r;
        r.x = x0;
        r.f = obj(x0);
        r.converged = true;
        r.reason = "closed_form";
        return r;
    }
    if (cfg.algorithm == Algorithm::Simplex)
        return nelder_mead(obj, x0, lo, hi, cfg.tol, cfg.max_iters);

    BoxResult result;
    VectorXd x = clamp_box(x0, lo, hi);
    double f = obj(x);
    if (!std::isfinite(f)) {
        // infeasible start: let the simplex try to crawl out
        BoxResult nm = nelder_mead(obj, x, lo, hi, cfg.tol, cfg.max_iters);
        if (!std::isfinite(nm.f)) nm.reason = "infeasible_start";
        return nm;
    }

    MatrixXd H = MatrixXd::Identity(dim, dim);
    VectorXd grad = fd_gradient(obj, x, f, lo, hi, cfg.fd_step);
    H *= 1.0 / (1.0 + grad.norm());
    bool scaled = false;
    int ls_failures = 0;
    int iter = 0;

    while (iter < cfg.max_iters) {
        ++iter;

        VectorXd dir = -(H * grad);
        for (Eigen::Index i = 0; i < dim; ++i) {
            const bool at_lo = x[i] <= lo[i] && grad[i] > 0.0;
            const bool at_hi = x[i] >= hi[i] && grad[i] < 0.0;
            if (at_lo || at_hi) dir[i] = 0.0;
        }
        double slope = grad.dot(dir);
        if (slope > 0.0) {  // not a descent direction; restart from steepest
            H = MatrixXd::Identity(dim, dim) / (1.0 + grad.norm());
            scaled = false;
            dir = -(H * grad);
            for (Eigen::Index i = 0; i < dim; ++i) {
                const bool at_lo = x[i] <= lo[i] && grad[i] > 0.0;
                const bool at_hi = x[i] >= hi[i] && grad[i] < 0.0;
                if (at_lo || at_hi) dir[i] = 0.0;
            }
            slope = grad.dot(dir);
        }
        if (-slope <= cfg.tol * (std::abs(f) + cfg.tol)) {
            result.converged = true;
            result.reason = "gtol";
            break;
        }

        // backtracking Armijo along the projected path
        double alpha = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        VectorXd x_new = x;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            x_new = clamp_box(x + alpha * dir, lo, hi);
            f_new = obj(x_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted && std::isfinite(f_new) && f_new < f) accepted = true;  // weak decrease

        if (!accepted) {
            ++ls_failures;
            if (ls_failures >= 2) {
                BoxResult nm =
                    nelder_mead(obj, x, lo, hi, cfg.tol, cfg.max_iters - iter);
                nm.iterations += iter;
                if (nm.f > f) {  // keep the quasi-Newton point if it was better
                    nm.x = x;
                    nm.f = f;
                }
                return nm;
            }
            H = MatrixXd::Identity(dim, dim) / (1.0 + grad.norm());
            scaled = false;
            continue;
        }

        const VectorXd grad_new = fd_gradient(obj, x_new, f_new, lo, hi, cfg.fd_step);
        const VectorXd s = x_new - x;
        const VectorXd yv = grad_new - grad;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            if (!scaled) {
                H = MatrixXd::Identity(dim, dim) * (sy / yv.squaredNorm());
                scaled = true;
            }
            const VectorXd Hy = H * yv;
            const double yHy = yv.dot(Hy);
            // BFGS inverse update
            H += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) -
                 (Hy * s.transpose() + s * Hy.transpose()) / sy;
        }

        const double drop = f - f_new;
        x = x_new;
        const double f_prev = f;
        f = f_new;
        grad = grad_new;
        if (drop <= cfg.tol * (std::abs(f_prev) + cfg.tol)) {
            result.converged = true;
            result.reason = "ftol";
            break;
        }
    }

    result.x = x;
    result.f = f;
    result.iterations = iter;
    if (!result.converged) result.reason = "maxiter";
    return result;
}

/// Deterministic extra starts for the restarts knob: a Kronecker
/// (golden-ratio) low-discrepancy sequence inside the box, ignoring
/// unbounded coordinates.
inline VectorXd restart_point(const VectorXd& base, const VectorXd& lo, const VectorXd& hi,
                              int k) {
    VectorXd x = base;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(lo[i]) || !std::isfinite(hi[i])) continue;
        const double alpha = std::pow(0.6180339887498949, static_cast<double>(i + 1));
        const double frac = std::fmod(0.5 + k * alpha, 1.0);
        x[i] = lo[i] + frac * (hi[i] - lo[i]);
    }
    return x;
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

/// SLS driver: fit the smoother, then minimize the reduced criterion over
/// theta_NL within its bounds. Initial guesses for xi or theta_L are never
/// taken - they are profiled out exactly. When p_nl = 0 the whole problem
/// is the closed-form solve.
inline EstimationResult fit_sls(const SeparableModel& model, const ObservationSet& obs,
                                const VectorXd& theta_nl_init,
                                const OptimizerConfig& cfg = {}) {
    validate(model);
    validate(obs);
    if (theta_nl_init.size() != model.p_nl)
        throw ContractError("fit_sls: theta_nl_init size mismatch");
    for (int i = 0; i < model.p_nl; ++i)
        if (theta_nl_init[i] < model.bounds_nl[i].lo ||
            theta_nl_init[i] > model.bounds_nl[i].hi)
            throw ContractError("fit_sls: theta_nl_init outside bounds_nl");

    const SmootherFit fit =
        fit_smoother(obs, model.horizon, default_lambda_grid(model.horizon, obs.times.size()));

    EstimationResult result;
    result.method = Method::SLS;
    const auto t0 = std::chrono::steady_clock::now();

    if (model.p_nl == 0) {
        try {
            const ReducedValue red = reduced_criterion(model, fit, VectorXd(0));
            result.estimate = {VectorXd(0), red.lin.theta_l_hat, red.lin.xi_hat};
            result.loss = red.value;
            result.converged = true;
            result.termination = "closed_form";
            result.cond_B = red.lin.cond_B;
            result.ridge_used = red.lin.ridge_used;
        } catch (const SingularDesignError& err) {
            result.estimate = {VectorXd(0), VectorXd::Constant(model.p_l, NAN),
                               VectorXd::Constant(model.d, NAN)};
            result.loss = std::numeric_limits<double>::infinity();
            result.converged = false;
            result.termination = std::string("singular: ") + err.what();
        }
        result.wall_time = detail::elapsed_seconds(t0);
        return result;
    }

    const auto objective = [&](const VectorXd& theta_nl) -> double {
        try {
            return reduced_criterion(model, fit, theta_nl).value;
        } catch (const FieldEvalError&) {
            return std::numeric_limits<double>::infinity();
        } catch (const SingularDesignError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    VectorXd lo(model.p_nl), hi(model.p_nl);
    for (int i = 0; i < model.p_nl; ++i) {
        lo[i] = model.bounds_nl[i].lo;
        hi[i] = model.bounds_nl[i].hi;
    }

    detail::BoxResult best;
    int total_iters = 0;
    for (int k = 0; k < std::max(1, cfg.restarts); ++k) {
        const VectorXd start =
            k == 0 ? theta_nl_init : detail::restart_point(theta_nl_init, lo, hi, k);
        detail::BoxResult run = detail::minimize_box(objective, start, lo, hi, cfg);
        total_iters += run.iterations;
        if (k == 0 || run.f < best.f) best = run;
    }
    result.iterations = total_iters;

    if (!std::isfinite(best.f)) {
        result.estimate = {best.x.size() ? best.x : theta_nl_init,
                           VectorXd::Constant(model.p_l, NAN),
                           VectorXd::Constant(model.d, NAN)};
        result.loss = std::numeric_limits<double>::infinity();
        result.converged = false;
        result.termination = "infeasible";
        result.wall_time = detail::elapsed_seconds(t0);
        return result;
    }

    const ReducedValue red = reduced_criterion(model, fit, best.x);
    result.estimate = {best.x, red.lin.theta_l_hat, red.lin.xi_hat};
    result.loss = red.value;
    result.converged = best.converged;
    result.termination = best.reason;
    result.cond_B = red.lin.cond_B;
    result.ridge_used = red.lin.ridge_used;
    result.wall_time = detail::elapsed_seconds(t0);
    return result;
}

namespace detail {

/// Full-criterion evaluator with the design cached per theta_NL: probes that
/// move only (xi, theta_L) reuse the cumulative integrals, which is where
/// nearly all the evaluation cost lives.
class NlsObjective {
public:
    NlsObjective(const SeparableModel& model, const SmootherFit& fit)
        : model_(model), fit_(fit), w_(trapz_weights(fit.grid)) {}

    double operator()(const VectorXd& x) {
        const Eigen::Index d = model_.d, p_nl = model_.p_nl, p_l = model_.p_l;
        const VectorXd xi = x.head(d);
        const VectorXd theta_nl = x.segment(d, p_nl);
        const VectorXd theta_l = x.tail(p_l);
        const bool same_theta_nl =
            cached_ && theta_nl.size() == cached_theta_nl_.size() &&
            (theta_nl.size() == 0 ||
             (theta_nl - cached_theta_nl_).cwiseAbs().maxCoeff() == 0.0);
        if (!same_theta_nl) {
            try {
                const auto field = eval_field_grid(model_, fit_, theta_nl);
                G_ = cumtrapz(fit_.grid, field.g_vals);
                H_ = cumtrapz(fit_.grid, field.h_vals);
            } catch (const FieldEvalError&) {
                cached_ = false;
                return std::numeric_limits<double>::infinity();
            }
            cached_theta_nl_ = theta_nl;
            cached_ = true;
        }
        double value = 0.0;
        for (Eigen::Index s = 0; s < d; ++s) {
            VectorXd resid = fit_.values.col(s) - H_.col(s);
            resid.array() -= xi[s];
            for (Eigen::Index j = 0; j < p_l; ++j)
                resid -= theta_l[j] * G_.col(s * p_l + j);
            value += w_.dot(resid.cwiseAbs2());
        }
        return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
    }

private:
    const SeparableModel& model_;
    const SmootherFit& fit_;
    VectorXd w_;
    bool cached_ = false;
    VectorXd cached_theta_nl_;
    MatrixXd G_, H_;
};

}  // namespace detail

/// NLS driver: fit the smoother, then minimize the full criterion jointly
/// over (xi, theta_NL, theta_L). theta_NL is box-constrained; linear
/// parameters flagged non-negative are constrained at zero from below.
/// When init.xi is empty it is initialized from the smoother at t = 0.
inline EstimationResult fit_nls(const SeparableModel& model, const ObservationSet& obs,
                                const ParamSplit& init, const OptimizerConfig& cfg = {}) {
    validate(model);
    validate(obs);
    check_dims(model, init, /*require_xi=*/false);
    if (init.xi.size() != 0 && init.xi.size() != model.d)
        throw ContractError("fit_nls: init.xi size mismatch");
    for (int i = 0; i < model.p_nl; ++i)
        if (init.theta_nl[i] < model.bounds_nl[i].lo ||
            init.theta_nl[i] > model.bounds_nl[i].hi)
            throw ContractError("fit_nls: theta_nl init outside bounds_nl");

    const SmootherFit fit =
        fit_smoother(obs, model.horizon, default_lambda_grid(model.horizon, obs.times.size()));

    const Eigen::Index dim = model.d + model.p_nl + model.p_l;
    VectorXd x0(dim), lo(dim), hi(dim);
    const double inf = std::numeric_limits<double>::infinity();
    x0.head(model.d) =
        init.xi.size() == model.d ? init.xi : VectorXd(fit.values.row(0).transpose());
    x0.segment(model.d, model.p_nl) = init.theta_nl;
    x0.tail(model.p_l) = init.theta_l;
    lo.head(model.d).setConstant(-inf);
    hi.head(model.d).setConstant(inf);
    for (int i = 0; i < model.p_nl; ++i) {
        lo[model.d + i] = model.bounds_nl[i].lo;
        hi[model.d + i] = model.bounds_nl[i].hi;
    }
    for (int j = 0; j < model.p_l; ++j) {
        lo[model.d + model.p_nl + j] = model.positivity_l[j] ? 0.0 : -inf;
        hi[model.d + model.p_nl + j] = inf;
    }

    EstimationResult result;
    result.method = Method::NLS;
    const auto t0 = std::chrono::steady_clock::now();

    detail::NlsObjective objective(model, fit);
    auto obj_fn = [&objective](const VectorXd& x) { return objective(x); };

    detail::BoxResult best;
    int total_iters = 0;
    for (int k = 0; k < std::max(1, cfg.restarts); ++k) {
        const VectorXd start = k == 0 ? x0 : detail::restart_point(x0, lo, hi, k);
        detail::BoxResult run = detail::minimize_box(obj_fn, start, lo, hi, cfg);
        total_iters += run.iterations;
        if (k == 0 || run.f < best.f) best = run;
    }
    result.iterations = total_iters;

    if (!best.x.size() || !std::isfinite(best.f)) {
        result.estimate = {init.theta_nl, VectorXd::Constant(model.p_l, NAN),
                           VectorXd::Constant(model.d, NAN)};
        result.loss = std::numeric_limits<double>::infinity();
        result.converged = false;
        result.termination = "infeasible";
        result.wall_time = detail::elapsed_seconds(t0);
        return result;
    }

    result.estimate = {best.x.segment(model.d, model.p_nl), best.x.tail(model.p_l),
                       best.x.head(model.d)};
    result.loss = full_criterion(model, fit, result.estimate);
    result.converged = best.converged;
    result.termination = best.reason;
    try {
        const auto design = build_design(model, fit, result.estimate.theta_nl);
        const LinearSolveResult lin = solve_linear(design, fit, &model);
        result.cond_B = lin.cond_B;
        result.ridge_used = lin.ridge_used;
    } catch (const std::exception&) {
        result.cond_B = std::numeric_limits<double>::infinity();
    }
    result.wall_time = detail::elapsed_seconds(t0);
    return result;
}

}  // namespace sepode
