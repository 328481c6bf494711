#pragma once

#include "sepode/integrate.hpp"
#include "sepode/rng.hpp"
#include "sepode/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace sepode {

/// Age-group/seasonal SIR (proportions of susceptible and infected per age
/// group a and season y):
///   S'_{a,y} = -S_{a,y} kappa_y sum_j beta_{a,j} I_{j,y}
///   I'_{a,y} =  S_{a,y} kappa_y sum_j beta_{a,j} I_{j,y} - gamma I_{a,y}
/// theta_L = (vec beta row-major, gamma); theta_NL = (kappa_2..kappa_L) with
/// kappa_1 fixed at 1 (empty when L = 1). States ordered
/// (S_{1,1}, I_{1,1}, S_{2,1}, I_{2,1}, ...), age fastest.
inline SeparableModel make_sir(int M = 1, int L = 1, double horizon = 18.0) {
    if (M < 1 || L < 1) throw ContractError("make_sir: M and L must be >= 1");
    SeparableModel model;
    model.name = "sir";
    model.d = 2 * M * L;
    model.p_l = M * M + 1;
    model.p_nl = L - 1;
    model.horizon = horizon;
    for (int y = 0; y < L; ++y)
        for (int a = 0; a < M; ++a) {
            const std::string suffix =
                (M == 1 && L == 1) ? "" : "_" + std::to_string(a + 1) + "_" + std::to_string(y + 1);
            model.state_names.push_back("S" + suffix);
            model.state_names.push_back("I" + suffix);
        }
    for (int a = 0; a < M; ++a)
        for (int j = 0; j < M; ++j)
            model.param_names_l.push_back(
                M == 1 ? "beta" : "beta_" + std::to_string(a + 1) + "_" + std::to_string(j + 1));
    model.param_names_l.push_back("gamma");
    for (int y = 2; y <= L; ++y) {
        model.param_names_nl.push_back("kappa_" + std::to_string(y));
        model.bounds_nl.push_back({0.1, 10.0});
    }
    model.positivity_l.assign(model.p_l, false);

    auto state_index = [M](int a, int y) { return 2 * (y * M + a); };
    model.g_eval = [M, L, state_index](double, const VectorXd& x, const VectorXd& theta_nl,
                                       Eigen::Ref<MatrixXd> g) {
        g.setZero();
        const int gamma_col = M * M;
        for (int y = 0; y < L; ++y) {
            const double kappa = (y == 0) ? 1.0 : theta_nl[y - 1];
            for (int a = 0; a < M; ++a) {
                const int sa = state_index(a, y);
                for (int j = 0; j < M; ++j) {
                    const double force = x[sa] * kappa * x[state_index(j, y) + 1];
                    g(sa, a * M + j) = -force;
                    g(sa + 1, a * M + j) = force;
                }
                g(sa + 1, gamma_col) = -x[sa + 1];
            }
        }
    };
    model.h_eval = [](double, const VectorXd&, const VectorXd&, Eigen::Ref<VectorXd> h) {
        h.setZero();
    };
    return model;
}

/// Lotka-Volterra with sinusoidal seasonal forcing of the predation rate,
/// s(t) = 1 + eps*sin(2*pi*(t/T + omega)):
///   x1' = alpha x1 - beta  s(t) x1 x2
///   x2' = delta s(t) x1 x2 - gamma x2
/// theta_L = (alpha, beta, delta, gamma); theta_NL = (eps, omega).
inline SeparableModel make_lv_forced(double horizon = 25.0) {
    if (!(horizon > 0.0)) throw ContractError("make_lv_forced: horizon must be positive");
    SeparableModel model;
    model.name = "lv";
    model.d = 2;
    model.p_l = 4;
    model.p_nl = 2;
    model.horizon = horizon;
    model.state_names = {"x1", "x2"};
    model.param_names_l = {"alpha", "beta", "delta", "gamma"};
    model.param_names_nl = {"eps", "omega"};
    model.bounds_nl = {{0.0, 1.0}, {0.0, 1.0}};
    model.positivity_l.assign(4, false);
    const double period = horizon;
    model.g_eval = [period](double t, const VectorXd& x, const VectorXd& theta_nl,
                            Eigen::Ref<MatrixXd> g) {
        const double s =
            1.0 + theta_nl[0] * std::sin(2.0 * M_PI * (t / period + theta_nl[1]));
        const double prod = x[0] * x[1];
        g.setZero();
        g(0, 0) = x[0];
        g(0, 1) = -s * prod;
        g(1, 2) = s * prod;
        g(1, 3) = -x[1];
    };
    model.h_eval = [](double, const VectorXd&, const VectorXd&, Eigen::Ref<VectorXd> h) {
        h.setZero();
    };
    return model;
}

/// Three-variable generalized mass action (GMA) metabolic system:
///   x1' = g11 x2^f121 x3^f131 - g12 x1^f112 x2^f122 - g13 x1^f113 x3^f133
///   x2' = g12 x1^f112 x2^f122 - g22 x2^f222
///   x3' = g13 x1^f113 x3^f133 - g32 x3^f332
/// theta_L = rate constants (g11, g12, g13, g22, g32); theta_NL = kinetic
/// orders (f121, f131, f112, f122, f113, f133, f222, f332), each in [-2, 2].
/// Fractional powers of non-positive states are infeasible; inside the
/// criterion, smoothed states are clipped below at 1e-8 first.
inline SeparableModel make_gma(double horizon = 4.0) {
    SeparableModel model;
    model.name = "gma";
    model.d = 3;
    model.p_l = 5;
    model.p_nl = 8;
    model.horizon = horizon;
    model.state_names = {"x1", "x2", "x3"};
    model.param_names_l = {"g11", "g12", "g13", "g22", "g32"};
    model.param_names_nl = {"f121", "f131", "f112", "f122", "f113", "f133", "f222", "f332"};
    model.bounds_nl.assign(8, {-2.0, 2.0});
    model.positivity_l.assign(5, false);
    model.state_floor = 1e-8;
    model.g_eval = [](double, const VectorXd& x, const VectorXd& f, Eigen::Ref<MatrixXd> g) {
        const double influx1 = std::pow(x[1], f[0]) * std::pow(x[2], f[1]);
        const double x1_to_x2 = std::pow(x[0], f[2]) * std::pow(x[1], f[3]);
        const double x1_to_x3 = std::pow(x[0], f[4]) * std::pow(x[2], f[5]);
        const double efflux2 = std::pow(x[1], f[6]);
        const double efflux3 = std::pow(x[2], f[7]);
        g.setZero();
        g(0, 0) = influx1;
        g(0, 1) = -x1_to_x2;
        g(0, 2) = -x1_to_x3;
        g(1, 1) = x1_to_x2;
        g(1, 3) = -efflux2;
        g(2, 2) = x1_to_x3;
        g(2, 4) = -efflux3;
    };
    model.h_eval = [](double, const VectorXd&, const VectorXd&, Eigen::Ref<VectorXd> h) {
        h.setZero();
    };
    return model;
}

/// FitzHugh-Nagumo spike-potential system:
///   x1' = c (x1 - x1^3/3 + x2)
///   x2' = -(1/c)(x1 - a + b x2)
/// theta_L = (a, b) with positivity flags; theta_NL = (c) in [0.1, 10].
/// Terms carrying no linear parameter live in the offset h.
inline SeparableModel make_fhn(double horizon = 20.0) {
    SeparableModel model;
    model.name = "fhn";
    model.d = 2;
    model.p_l = 2;
    model.p_nl = 1;
    model.horizon = horizon;
    model.state_names = {"x1", "x2"};
    model.param_names_l = {"a", "b"};
    model.param_names_nl = {"c"};
    model.bounds_nl = {{0.1, 10.0}};
    model.positivity_l = {true, true};
    model.g_eval = [](double, const VectorXd& x, const VectorXd& theta_nl,
                      Eigen::Ref<MatrixXd> g) {
        const double c = theta_nl[0];
        g.setZero();
        g(1, 0) = 1.0 / c;
        g(1, 1) = -x[1] / c;
    };
    model.h_eval = [](double, const VectorXd& x, const VectorXd& theta_nl,
                      Eigen::Ref<VectorXd> h) {
        const double c = theta_nl[0];
        h[0] = c * (x[0] - x[0] * x[0] * x[0] / 3.0 + x[1]);
        h[1] = -x[0] / c;
    };
    return model;
}

/// Noisy observations: per coordinate, sigma_j = sample std of the column
/// divided by snr_divisor (10 for low noise, 5 for high), then independent
/// N(0, sigma_j^2) noise. A constant column gets sigma_j = 0 and is
/// returned unchanged.
inline ObservationSet generate_observations(const VectorXd& times, const MatrixXd& traj,
                                            double snr_divisor, Rng& rng) {
    if (traj.rows() < 2) throw ContractError("generate_observations: need n >= 2");
    if (times.size() != traj.rows())
        throw ContractError("generate_observations: times/trajectory mismatch");
    if (!(snr_divisor > 0.0))
        throw ContractError("generate_observations: snr_divisor must be positive");
    const Eigen::Index n = traj.rows(), d = traj.cols();
    VectorXd sigma(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double mean = traj.col(j).mean();
        const double ss = (traj.col(j).array() - mean).square().sum();
        sigma[j] = std::sqrt(ss / static_cast<double>(n - 1)) / snr_divisor;
    }
    ObservationSet obs;
    obs.times = times;
    obs.Y = traj;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            if (sigma[j] > 0.0) obs.Y(i, j) += rng.normal(0.0, sigma[j]);
    obs.snr_sigma = sigma;
    return obs;
}

/// Noise-free observations straight from a trajectory.
inline ObservationSet observations_from_trajectory(const VectorXd& times,
                                                   const MatrixXd& traj) {
    ObservationSet obs;
    obs.times = times;
    obs.Y = traj;
    obs.snr_sigma = VectorXd::Zero(traj.cols());
    return obs;
}

/// One benchmark's full experimental setup: the model, the true parameters,
/// and the sweep axes. prior_cvs are ordered high -> medium -> low quality,
/// i.e. strictly increasing coefficients of variation.
struct BenchmarkSpec {
    SeparableModel model;
    ParamSplit theta_true;
    std::vector<int> sample_sizes;
    std::vector<double> snr_divisors;
    std::vector<double> prior_cvs;
    int mc_reps = 500;
};

inline BenchmarkSpec benchmark_sir() {
    BenchmarkSpec spec;
    spec.model = make_sir(1, 1);
    spec.theta_true.theta_nl = VectorXd(0);
    spec.theta_true.theta_l = (VectorXd(2) << 6.0, 2.3).finished();
    spec.theta_true.xi = (VectorXd(2) << 0.56, 1e-4).finished();
    spec.sample_sizes = {18, 36};
    spec.snr_divisors = {10.0, 5.0};
    spec.prior_cvs = {0.1, 0.2, 0.3};
    return spec;
}

inline BenchmarkSpec benchmark_lv() {
    BenchmarkSpec spec;
    spec.model = make_lv_forced(25.0);
    spec.theta_true.theta_nl = (VectorXd(2) << 0.2, 0.5).finished();
    spec.theta_true.theta_l = (VectorXd(4) << 2.0 / 3.0, 4.0 / 3.0, 1.0, 1.0).finished();
    spec.theta_true.xi = (VectorXd(2) << 0.9, 0.9).finished();
    spec.sample_sizes = {100, 200};
    spec.snr_divisors = {10.0, 5.0};
    spec.prior_cvs = {0.05, 0.1, 0.2};
    return spec;
}

inline BenchmarkSpec benchmark_gma() {
    BenchmarkSpec spec;
    spec.model = make_gma(4.0);
    spec.theta_true.theta_nl =
        (VectorXd(8) << -1.0, -1.0, 0.5, -0.1, 0.75, -0.2, 0.5, 0.5).finished();
    spec.theta_true.theta_l = (VectorXd(5) << 0.4, 3.0, 2.0, 1.5, 5.0).finished();
    spec.theta_true.xi = (VectorXd(3) << 0.5, 0.5, 1.0).finished();
    spec.sample_sizes = {100, 200};
    spec.snr_divisors = {10.0, 5.0};
    spec.prior_cvs = {0.1, 0.3, 0.5};
    return spec;
}

inline BenchmarkSpec benchmark_fhn() {
    BenchmarkSpec spec;
    spec.model = make_fhn(20.0);
    spec.theta_true.theta_nl = (VectorXd(1) << 3.0).finished();
    spec.theta_true.theta_l = (VectorXd(2) << 0.2, 0.2).finished();
    spec.theta_true.xi = (VectorXd(2) << -1.0, 1.0).finished();
    spec.sample_sizes = {20, 40};
    spec.snr_divisors = {10.0, 5.0};
    spec.prior_cvs = {0.5, 1.0, 3.0};
    return spec;
}

inline BenchmarkSpec benchmark_by_name(const std::string& name) {
    if (name == "sir") return benchmark_sir();
    if (name == "lv") return benchmark_lv();
    if (name == "gma") return benchmark_gma();
    if (name == "fhn") return benchmark_fhn();
    throw ContractError("unknown benchmark: " + name);
}

inline const std::vector<std::string>& benchmark_names() {
    static const std::vector<std::string> names = {"sir", "lv", "gma", "fhn"};
    return names;
}

/// Stable per-benchmark id used in seed derivation.
inline std::uint64_t benchmark_id(const std::string& name) {
    if (name == "sir") return 1;
    if (name == "lv") return 2;
    if (name == "gma") return 3;
    if (name == "fhn") return 4;
    throw ContractError("unknown benchmark: " + name);
}

}  // namespace sepode
