#include "sepode/integrate.hpp"
#include "sepode/models.hpp"
#include "sepode/quadrature.hpp"
#include "sepode/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace sepode;

TEST_CASE("single-group SIR slopes at the reference point", "[models]") {
    const SeparableModel model = make_sir(1, 1);
    REQUIRE(model.p_nl == 0);
    REQUIRE(model.p_l == 2);
    ParamSplit params{VectorXd(0), (VectorXd(2) << 6.0, 2.3).finished(), VectorXd(0)};
    const VectorXd x = (VectorXd(2) << 0.56, 1e-4).finished();
    const VectorXd f = eval_full_field(model, 0.0, x, params);
    REQUIRE(f[0] == Catch::Approx(-3.36e-4).epsilon(1e-12));
    REQUIRE(f[1] == Catch::Approx(1.06e-4).epsilon(1e-12));

    params.theta_l[0] = 0.0;  // beta = 0: S' = 0 and I' = -gamma I
    const VectorXd f0 = eval_full_field(model, 0.0, x, params);
    REQUIRE(f0[0] == 0.0);
    REQUIRE(f0[1] == Catch::Approx(-2.3e-4).epsilon(1e-12));
}

TEST_CASE("multi-group SIR matches its hand-coded field", "[models]") {
    const int M = 2, L = 2;
    const SeparableModel model = make_sir(M, L);
    REQUIRE(model.d == 8);
    REQUIRE(model.p_l == 5);
    REQUIRE(model.p_nl == 1);

    Rng rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        VectorXd x(8);
        for (int i = 0; i < 8; ++i) x[i] = rng.uniform(0.0, 0.5);
        VectorXd beta(4), theta_l(5), kappa(1);
        for (int i = 0; i < 4; ++i) beta[i] = rng.uniform(0.0, 8.0);
        const double gamma = rng.uniform(0.1, 4.0);
        theta_l << beta, gamma;
        kappa << rng.uniform(0.1, 10.0);
        const VectorXd f =
            eval_full_field(model, 0.0, x, ParamSplit{kappa, theta_l, VectorXd(0)});

        // states: (S_{a,y}, I_{a,y}) with a fastest, y = 1 then y = 2
        for (int y = 0; y < L; ++y) {
            const double k = y == 0 ? 1.0 : kappa[0];
            for (int a = 0; a < M; ++a) {
                const int s = 2 * (y * M + a);
                double force = 0.0;
                for (int j = 0; j < M; ++j)
                    force += beta[a * M + j] * x[2 * (y * M + j) + 1];
                force *= x[s] * k;
                REQUIRE(f[s] == Catch::Approx(-force).margin(1e-12));
                REQUIRE(f[s + 1] ==
                        Catch::Approx(force - gamma * x[s + 1]).margin(1e-12));
            }
        }
    }
}

TEST_CASE("forced LV reduces to classic LV at eps = 0 and is T-periodic", "[models]") {
    const SeparableModel model = make_lv_forced(25.0);
    const VectorXd theta_l = (VectorXd(4) << 2.0 / 3.0, 4.0 / 3.0, 1.0, 1.0).finished();

    SECTION("eps = 0") {
        const ParamSplit params{(VectorXd(2) << 0.0, 0.37).finished(), theta_l, VectorXd(0)};
        const VectorXd x = (VectorXd(2) << 1.1, 0.8).finished();
        for (double t : {0.0, 3.7, 12.2}) {
            const VectorXd f = eval_full_field(model, t, x, params);
            REQUIRE(f[0] == Catch::Approx(theta_l[0] * 1.1 - theta_l[1] * 1.1 * 0.8)
                                .epsilon(1e-14));
            REQUIRE(f[1] == Catch::Approx(theta_l[2] * 1.1 * 0.8 - theta_l[3] * 0.8)
                                .epsilon(1e-14));
        }
    }

    SECTION("reference slope at t = 0") {
        const ParamSplit params{(VectorXd(2) << 0.2, 0.5).finished(), theta_l, VectorXd(0)};
        const VectorXd x = (VectorXd(2) << 0.9, 0.9).finished();
        const VectorXd f = eval_full_field(model, 0.0, x, params);
        // s(0) = 1 + 0.2 sin(pi) = 1
        REQUIRE(f[0] == Catch::Approx(-0.48).margin(1e-12));
    }

    SECTION("periodic forcing") {
        Rng rng(4);
        const ParamSplit params{(VectorXd(2) << 0.7, 0.23).finished(), theta_l, VectorXd(0)};
        for (int trial = 0; trial < 50; ++trial) {
            const double t = rng.uniform(0.0, 25.0);
            VectorXd x(2);
            x << rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0);
            const VectorXd f1 = eval_full_field(model, t, x, params);
            const VectorXd f2 = eval_full_field(model, t + 25.0, x, params);
            REQUIRE((f1 - f2).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("GMA slopes and structure", "[models]") {
    const SeparableModel model = make_gma();
    const VectorXd f_true =
        (VectorXd(8) << -1.0, -1.0, 0.5, -0.1, 0.75, -0.2, 0.5, 0.5).finished();
    const VectorXd g_true = (VectorXd(5) << 0.4, 3.0, 2.0, 1.5, 5.0).finished();
    const VectorXd x = (VectorXd(3) << 0.5, 0.5, 1.0).finished();

    SECTION("x2' at the initial state") {
        const VectorXd f =
            eval_full_field(model, 0.0, x, ParamSplit{f_true, g_true, VectorXd(0)});
        // 3*(0.5^0.5)*(0.5^-0.1) - 1.5*(0.5^0.5), evaluated in double precision
        const double expected = 3.0 * std::pow(0.5, 0.5) * std::pow(0.5, -0.1) -
                                1.5 * std::pow(0.5, 0.5);
        REQUIRE(expected == Catch::Approx(1.2129147).margin(1e-7));
        REQUIRE(f[1] == Catch::Approx(expected).epsilon(1e-14));
    }

    SECTION("zero kinetic orders reduce to bare rate constants") {
        const VectorXd f = eval_full_field(
            model, 0.0, x, ParamSplit{VectorXd::Zero(8), g_true, VectorXd(0)});
        REQUIRE(f[0] == Catch::Approx(g_true[0] - g_true[1] - g_true[2]).epsilon(1e-14));
        REQUIRE(f[1] == Catch::Approx(g_true[1] - g_true[3]).epsilon(1e-14));
        REQUIRE(f[2] == Catch::Approx(g_true[2] - g_true[4]).epsilon(1e-14));
    }

    SECTION("g has exactly 7 structurally nonzero entries") {
        MatrixXd g(3, 5);
        model.g_eval(0.0, x, f_true, g);
        int nonzero = 0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 5; ++c)
                if (g(r, c) != 0.0) ++nonzero;
        REQUIRE(nonzero == 7);
    }
}

TEST_CASE("FHN offset carries everything without a linear parameter", "[models]") {
    const SeparableModel model = make_fhn();
    const VectorXd c = (VectorXd(1) << 3.0).finished();
    const VectorXd x = (VectorXd(2) << -1.0, 1.0).finished();

    const VectorXd f = eval_full_field(
        model, 0.0, x, ParamSplit{c, (VectorXd(2) << 0.2, 0.2).finished(), VectorXd(0)});
    REQUIRE(f[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(f[1] == Catch::Approx(1.0 / 3.0).margin(1e-12));

    // a = b = 0: x2' = -x1/c exactly
    const VectorXd f0 =
        eval_full_field(model, 0.0, x, ParamSplit{c, VectorXd::Zero(2), VectorXd(0)});
    REQUIRE(f0[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-14));

    // h never reacts to theta_L
    VectorXd h1(2);
    model.h_eval(0.0, x, c, h1);
    REQUIRE(h1[0] == Catch::Approx(3.0 * (-1.0 + 1.0 / 3.0 + 1.0)).epsilon(1e-14));
    REQUIRE(h1[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("integrator reproduces exponential growth and linear drift", "[models]") {
    SeparableModel model;
    model.name = "exp";
    model.d = 1;
    model.p_nl = 0;
    model.p_l = 1;
    model.horizon = 2.0;
    model.state_names = {"x"};
    model.param_names_l = {"theta"};
    model.positivity_l = {false};
    model.g_eval = [](double, const VectorXd& x, const VectorXd&, Eigen::Ref<MatrixXd> g) {
        g(0, 0) = x[0];
    };
    model.h_eval = [](double, const VectorXd&, const VectorXd&, Eigen::Ref<VectorXd> h) {
        h.setZero();
    };

    // x' = x, x(0) = 1, x(1) = e
    const MatrixXd traj = integrate(
        model,
        ParamSplit{VectorXd(0), (VectorXd(1) << 1.0).finished(),
                   (VectorXd(1) << 1.0).finished()},
        (VectorXd(2) << 0.0, 1.0).finished());
    REQUIRE(traj(1, 0) == Catch::Approx(2.718282).margin(1e-6));

    // x' = 2, x(0) = 3, x(2) = 7
    SeparableModel drift = model;
    drift.g_eval = [](double, const VectorXd&, const VectorXd&, Eigen::Ref<MatrixXd> g) {
        g(0, 0) = 1.0;
    };
    const MatrixXd traj2 = integrate(
        drift,
        ParamSplit{VectorXd(0), (VectorXd(1) << 2.0).finished(),
                   (VectorXd(1) << 3.0).finished()},
        (VectorXd(2) << 0.0, 2.0).finished());
    REQUIRE(traj2(1, 0) == Catch::Approx(7.0).margin(1e-8));
}

TEST_CASE("FHN trajectory stays inside the known envelope", "[models]") {
    const BenchmarkSpec spec = benchmark_fhn();
    const VectorXd times = linspace(0.0, 20.0, 401);
    const MatrixXd traj = integrate(spec.model, spec.theta_true, times);
    REQUIRE(traj.col(0).cwiseAbs().maxCoeff() <= 2.5);

    // self-contained oracle: a much tighter tolerance must agree
    IntegratorOptions tight;
    tight.rtol = 1e-12;
    tight.atol = 1e-14;
    const MatrixXd ref = integrate(spec.model, spec.theta_true, times, tight);
    REQUIRE((traj - ref).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("trajectories satisfy the ODE in finite differences", "[models]") {
    for (const auto& name : benchmark_names()) {
        const BenchmarkSpec spec = benchmark_by_name(name);
        const double T = spec.model.horizon;
        const int m = 4001;
        const VectorXd times = linspace(0.0, T, m);
        const MatrixXd traj = integrate(spec.model, spec.theta_true, times);
        const double dt = times[1] - times[0];
        double worst = 0.0, scale = 0.0;
        for (int i = 1; i + 1 < m; i += 50) {
            const VectorXd slope =
                (traj.row(i + 1) - traj.row(i - 1)).transpose() / (2 * dt);
            const VectorXd field = eval_full_field(spec.model, times[i],
                                                   traj.row(i).transpose(), spec.theta_true);
            worst = std::max(worst, (slope - field).cwiseAbs().maxCoeff());
            scale = std::max(scale, field.cwiseAbs().maxCoeff());
        }
        // central differences are O(dt^2); allow a generous constant
        REQUIRE(worst <= 100.0 * dt * dt * std::max(scale, 1.0) + 1e-8);
    }
}

TEST_CASE("step-size underflow raises an integration error", "[models]") {
    SeparableModel model;
    model.name = "blowup";
    model.d = 1;
    model.p_nl = 0;
    model.p_l = 1;
    model.horizon = 10.0;
    model.state_names = {"x"};
    model.param_names_l = {"theta"};
    model.positivity_l = {false};
    model.g_eval = [](double, const VectorXd& x, const VectorXd&, Eigen::Ref<MatrixXd> g) {
        g(0, 0) = x[0] * x[0];  // x' = x^2 blows up at t = 1/x0
    };
    model.h_eval = [](double, const VectorXd&, const VectorXd&, Eigen::Ref<VectorXd> h) {
        h.setZero();
    };
    const ParamSplit params{VectorXd(0), (VectorXd(1) << 1.0).finished(),
                            (VectorXd(1) << 1.0).finished()};
    try {
        integrate(model, params, (VectorXd(2) << 0.0, 2.0).finished());
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& err) {
        REQUIRE(err.t_fail() > 0.9);
        REQUIRE(err.t_fail() < 1.1);
    }
}

TEST_CASE("noise sigma follows the per-column sample std", "[models]") {
    SECTION("constant column is untouched") {
        const VectorXd times = linspace(0.0, 1.0, 10);
        MatrixXd traj = MatrixXd::Constant(10, 1, 4.2);
        Rng rng(1);
        const ObservationSet obs = generate_observations(times, traj, 10.0, rng);
        REQUIRE((obs.Y.array() == 4.2).all());
        REQUIRE((*obs.snr_sigma)[0] == 0.0);
    }

    SECTION("stds (1, 4) with divisor 5 give sigma (0.2, 0.8)") {
        const int n = 101;
        const VectorXd times = linspace(0.0, 1.0, n);
        MatrixXd traj(n, 2);
        for (int i = 0; i < n; ++i) {
            traj(i, 0) = times[i];
            traj(i, 1) = 4.0 * times[i];
        }
        const double base_std = std::sqrt(
            (traj.col(0).array() - traj.col(0).mean()).square().sum() / (n - 1));
        traj.col(0) /= base_std;  // unit sample std
        traj.col(1) /= base_std;  // sample std 4
        Rng rng(2);
        const ObservationSet obs = generate_observations(times, traj, 5.0, rng);
        REQUIRE((*obs.snr_sigma)[0] == Catch::Approx(0.2).epsilon(1e-12));
        REQUIRE((*obs.snr_sigma)[1] == Catch::Approx(0.8).epsilon(1e-12));
    }

    SECTION("empirical noise std calibrates to sigma_x / divisor") {
        const int n = 100, reps = 100;  // 1e4 draws
        const VectorXd times = linspace(0.0, 1.0, n);
        MatrixXd traj(n, 1);
        for (int i = 0; i < n; ++i) traj(i, 0) = times[i];
        const double sd = std::sqrt(
            (traj.col(0).array() - traj.col(0).mean()).square().sum() / (n - 1));
        traj /= sd;  // unit sample std
        Rng rng(3);
        double sq = 0.0;
        for (int r = 0; r < reps; ++r) {
            const ObservationSet obs = generate_observations(times, traj, 10.0, rng);
            sq += (obs.Y - traj).col(0).squaredNorm();
        }
        const double noise_std = std::sqrt(sq / (n * reps));
        REQUIRE(noise_std == Catch::Approx(0.1).margin(0.003));
    }
}

TEST_CASE("noise is independent across coordinates", "[models]") {
    const int n = 1000, reps = 100;  // 1e5 draw pairs
    const VectorXd times = linspace(0.0, 1.0, n);
    MatrixXd traj(n, 2);
    for (int i = 0; i < n; ++i) {
        traj(i, 0) = std::sin(times[i] * 6.0);
        traj(i, 1) = std::cos(times[i] * 6.0);
    }
    Rng rng(8);
    double sum_xy = 0.0, sum_xx = 0.0, sum_yy = 0.0;
    for (int r = 0; r < reps; ++r) {
        const ObservationSet obs = generate_observations(times, traj, 10.0, rng);
        const MatrixXd noise = obs.Y - traj;
        sum_xy += noise.col(0).dot(noise.col(1));
        sum_xx += noise.col(0).squaredNorm();
        sum_yy += noise.col(1).squaredNorm();
    }
    const double corr = sum_xy / std::sqrt(sum_xx * sum_yy);
    REQUIRE(std::abs(corr) < 0.02);
}
