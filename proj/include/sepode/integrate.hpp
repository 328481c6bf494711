#pragma once

#include "sepode/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace sepode {

struct IntegratorOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    long max_steps = 5'000'000;
};

namespace detail {

/// Adaptive Dormand-Prince 5(4) pair. Steps are clamped to land exactly on
/// each requested output time, so no interpolation error enters the output.
template <typename Field>
MatrixXd integrate_dopri5(Field&& f, const VectorXd& x0, const VectorXd& times,
                          const IntegratorOptions& opt) {
    const Eigen::Index d = x0.size();
    const Eigen::Index n = times.size();
    MatrixXd out(n, d);

    // Butcher tableau
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // y5 - y4 error coefficients
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    double t = 0.0;
    VectorXd y = x0;
    VectorXd k1 = f(t, y), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d);
    VectorXd ytmp(d), ynew(d), yerr(d);

    Eigen::Index next_out = 0;
    while (next_out < n && times[next_out] <= t) out.row(next_out++) = y.transpose();
    if (next_out >= n) return out;

    // initial step: conservative fraction of the first output gap
    double h = (times[next_out] - t) / 16.0;
    const double t_end = times[n - 1];

    long steps = 0;
    while (next_out < n) {
        if (++steps > opt.max_steps)
            throw IntegrationError("integration exceeded step budget at t=" +
                                       std::to_string(t),
                                   t);
        if (!(h > 1e-14 * std::max(1.0, std::abs(t))))
            throw IntegrationError(
                "step size underflow at t=" + std::to_string(t), t);
        bool hit_output = false;
        if (t + h >= times[next_out]) {
            h = times[next_out] - t;
            hit_output = true;
        }

        ytmp = y + h * (a21 * k1);
        k2 = f(t + c2 * h, ytmp);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        k3 = f(t + c3 * h, ytmp);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        k4 = f(t + c4 * h, ytmp);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        k5 = f(t + c5 * h, ytmp);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        k6 = f(t + h, ytmp);
        ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        k7 = f(t + h, ynew);
        yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double err = 0.0;
        bool finite = ynew.allFinite();
        if (finite) {
            for (Eigen::Index i = 0; i < d; ++i) {
                const double scale =
                    opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                const double r = yerr[i] / scale;
                err += r * r;
            }
            err = std::sqrt(err / static_cast<double>(d));
        } else {
            err = std::numeric_limits<double>::infinity();
        }

        if (err <= 1.0) {
            t += h;
            y = ynew;
            k1 = k7;  // FSAL
            if (hit_output) {
                t = times[next_out];  // kill accumulated rounding
                out.row(next_out++) = y.transpose();
            }
            const double grow =
                err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h = std::min(h * grow, t_end - t + 1e-30);
        } else {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
        }
    }
    return out;
}

}  // namespace detail

/// Trajectory of the model at the requested times (increasing, within
/// [0, T]), starting from x(0) = params.xi at t = 0.
inline MatrixXd integrate(const SeparableModel& model, const ParamSplit& params,
                          const VectorXd& times, const IntegratorOptions& opt = {}) {
    check_dims(model, params);
    if (times.size() < 1) throw ContractError("integrate: need at least one time");
    if (times[0] < 0.0) throw ContractError("integrate: times must be non-negative");
    for (Eigen::Index i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw ContractError("integrate: times must be strictly increasing");
    if (!params.xi.allFinite() || !params.theta_nl.allFinite() ||
        !params.theta_l.allFinite())
        throw ContractError("integrate: parameters must be finite");

    MatrixXd g(model.d, model.p_l);
    VectorXd h(model.d);
    auto field = [&](double t, const VectorXd& x) -> VectorXd {
        model.g_eval(t, x, params.theta_nl, g);
        model.h_eval(t, x, params.theta_nl, h);
        return g * params.theta_l + h;
    };
    return detail::integrate_dopri5(field, params.xi, times, opt);
}

}  // namespace sepode
