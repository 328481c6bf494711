#include "sepode/harness.hpp"
#include "sepode/optimize.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstring>

using namespace sepode;

namespace {

// x' = theta: g == 1, h == 0
SeparableModel constant_rate_model() {
    SeparableModel model;
    model.name = "rate";
    model.d = 1;
    model.p_nl = 0;
    model.p_l = 1;
    model.horizon = 1.0;
    model.state_names = {"x"};
    model.param_names_l = {"theta"};
    model.positivity_l = {false};
    model.g_eval = [](double, const VectorXd&, const VectorXd&, Eigen::Ref<MatrixXd> g) {
        g(0, 0) = 1.0;
    };
    model.h_eval = [](double, const VectorXd&, const VectorXd&, Eigen::Ref<VectorXd> h) {
        h.setZero();
    };
    return model;
}

ObservationSet noiseless_benchmark_obs(const BenchmarkSpec& spec, int n) {
    const VectorXd times = linspace(0.0, spec.model.horizon, n);
    return observations_from_trajectory(times, integrate(spec.model, spec.theta_true, times));
}

ObservationSet noisy_benchmark_obs(const BenchmarkSpec& spec, int n, double snr,
                                   std::uint64_t seed) {
    const VectorXd times = linspace(0.0, spec.model.horizon, n);
    const MatrixXd traj = integrate(spec.model, spec.theta_true, times);
    Rng rng = make_stream(seed, 0, StreamTag::noise);
    return generate_observations(times, traj, snr, rng);
}

bool same_bits(const VectorXd& a, const VectorXd& b) {
    if (a.size() != b.size()) return false;
    return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_CASE("NLS solves the convex line-fit problem", "[optimize]") {
    const SeparableModel model = constant_rate_model();
    const VectorXd times = linspace(0.0, 1.0, 40);
    ObservationSet obs;
    obs.times = times;
    obs.Y = times;  // x(t) = t exactly
    ParamSplit init{VectorXd(0), (VectorXd(1) << 0.5).finished(),
                    (VectorXd(1) << 0.5).finished()};
    for (const Algorithm alg : {Algorithm::Simplex, Algorithm::BoundedQuasiNewton}) {
        OptimizerConfig cfg;
        cfg.algorithm = alg;
        const EstimationResult r = fit_nls(model, obs, init, cfg);
        REQUIRE(r.converged);
        REQUIRE(r.estimate.xi[0] == Catch::Approx(0.0).margin(1e-4));
        REQUIRE(r.estimate.theta_l[0] == Catch::Approx(1.0).margin(1e-4));
    }
}

TEST_CASE("FHN noiseless: NLS from the truth lands on the SLS optimum",
          "[optimize]") {
    // At n = 40 the spline reconstruction of the spiky FHN trajectory is the
    // accuracy floor (about 0.3 max error at the fast transitions), so both
    // methods share a criterion minimum near, not at, the truth. The binding
    // checks: they agree with each other, and NLS cannot beat the exact
    // profile by more than optimizer noise.
    const BenchmarkSpec spec = benchmark_fhn();
    const ObservationSet obs = noiseless_benchmark_obs(spec, 40);
    const EstimationResult sls = fit_sls(spec.model, obs, spec.theta_true.theta_nl, {});
    const EstimationResult nls = fit_nls(
        spec.model, obs,
        ParamSplit{spec.theta_true.theta_nl, spec.theta_true.theta_l, VectorXd(0)}, {});
    REQUIRE(sls.converged);
    REQUIRE(nls.converged);
    REQUIRE(std::abs(nls.loss - sls.loss) <= 1e-4 * (1.0 + sls.loss));
    REQUIRE(nls.loss >= sls.loss - 1e-5 * (1.0 + sls.loss));
}

TEST_CASE("quasi-Newton SLS from a stationary start terminates immediately",
          "[optimize]") {
    const BenchmarkSpec spec = benchmark_fhn();
    const ObservationSet obs = noisy_benchmark_obs(spec, 40, 10.0, 99);
    OptimizerConfig qn;
    qn.algorithm = Algorithm::BoundedQuasiNewton;
    const EstimationResult first =
        fit_sls(spec.model, obs, (VectorXd(1) << 2.0).finished(), qn);
    REQUIRE(first.converged);
    const EstimationResult again = fit_sls(spec.model, obs, first.estimate.theta_nl, qn);
    REQUIRE(again.converged);
    REQUIRE(again.iterations <= 2);
    REQUIRE(again.loss <= first.loss * (1.0 + 1e-6) + 1e-12);
}

TEST_CASE("drivers are bit-deterministic apart from wall time", "[optimize]") {
    const BenchmarkSpec spec = benchmark_fhn();
    const ObservationSet obs = noisy_benchmark_obs(spec, 20, 10.0, 12);
    const VectorXd init = (VectorXd(1) << 1.7).finished();

    const EstimationResult a = fit_sls(spec.model, obs, init, {});
    const EstimationResult b = fit_sls(spec.model, obs, init, {});
    REQUIRE(same_bits(a.estimate.theta_nl, b.estimate.theta_nl));
    REQUIRE(same_bits(a.estimate.theta_l, b.estimate.theta_l));
    REQUIRE(same_bits(a.estimate.xi, b.estimate.xi));
    REQUIRE(a.loss == b.loss);
    REQUIRE(a.iterations == b.iterations);
    REQUIRE(a.converged == b.converged);
    REQUIRE(a.termination == b.termination);

    Rng rng_l = make_stream(12, 0, StreamTag::l_guess);
    const VectorXd theta_l_init =
        make_prior_guess(spec.theta_true.theta_l, 1.0, spec.model.positivity_l, rng_l);
    const ParamSplit nls_init{init, theta_l_init, VectorXd(0)};
    const EstimationResult c = fit_nls(spec.model, obs, nls_init, {});
    const EstimationResult d = fit_nls(spec.model, obs, nls_init, {});
    REQUIRE(same_bits(c.estimate.theta_nl, d.estimate.theta_nl));
    REQUIRE(same_bits(c.estimate.theta_l, d.estimate.theta_l));
    REQUIRE(same_bits(c.estimate.xi, d.estimate.xi));
    REQUIRE(c.loss == d.loss);
    REQUIRE(c.iterations == d.iterations);
}

TEST_CASE("single-season SIR needs no outer search", "[optimize]") {
    const BenchmarkSpec spec = benchmark_sir();
    const ObservationSet obs = noisy_benchmark_obs(spec, 18, 10.0, 5);
    const EstimationResult r = fit_sls(spec.model, obs, VectorXd(0), {});
    REQUIRE(r.converged);
    REQUIRE(r.iterations == 0);
    REQUIRE(r.termination == "closed_form");
    REQUIRE(r.estimate.theta_l.allFinite());
}

TEST_CASE("FHN noiseless SLS recovers the truth from a remote start", "[optimize]") {
    const BenchmarkSpec spec = benchmark_fhn();
    Rng rng(20259);
    const VectorXd init = (VectorXd(1) << rng.uniform(1.0, 5.0)).finished();

    // n = 40: c carries a sampling-induced bias of about -0.08 (the global
    // criterion minimum sits there; verified against an independent spline
    // implementation), a and b come out tight.
    const EstimationResult r40 = fit_sls(spec.model, noiseless_benchmark_obs(spec, 40), init, {});
    REQUIRE(r40.converged);
    REQUIRE(std::abs(r40.estimate.theta_nl[0] - 3.0) <= 0.1);
    REQUIRE(std::abs(r40.estimate.theta_l[0] - 0.2) <= 0.02);
    REQUIRE(std::abs(r40.estimate.theta_l[1] - 0.2) <= 0.05);

    // the bias is a resolution effect: at n = 160 it collapses
    const EstimationResult r160 =
        fit_sls(spec.model, noiseless_benchmark_obs(spec, 160), init, {});
    REQUIRE(r160.converged);
    REQUIRE(std::abs(r160.estimate.theta_nl[0] - 3.0) <= 0.01);
    REQUIRE(std::abs(r160.estimate.theta_l[0] - 0.2) <= 0.005);
    REQUIRE(std::abs(r160.estimate.theta_l[1] - 0.2) <= 0.01);
}

TEST_CASE("NLS never beats SLS on the shared smoother", "[optimize]") {
    const BenchmarkSpec spec = benchmark_gma();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ObservationSet obs = noisy_benchmark_obs(spec, 40, 10.0, seed);
        Rng rng_nl = make_stream(seed, 0, StreamTag::nl_guess);
        Rng rng_l = make_stream(seed, 0, StreamTag::l_guess);
        const VectorXd theta_nl_init = make_nl_guess(spec.model.bounds_nl, rng_nl);
        const VectorXd theta_l_init =
            make_prior_guess(spec.theta_true.theta_l, 0.5, spec.model.positivity_l, rng_l);
        const EstimationResult sls = fit_sls(spec.model, obs, theta_nl_init, {});
        const EstimationResult nls = fit_nls(
            spec.model, obs, ParamSplit{theta_nl_init, theta_l_init, VectorXd(0)}, {});
        if (nls.converged)
            REQUIRE(nls.loss >= sls.loss - 1e-9);
    }
}

TEST_CASE("fully infeasible searches report non-convergence", "[optimize]") {
    SeparableModel model = constant_rate_model();
    model.p_nl = 1;
    model.param_names_nl = {"p"};
    model.bounds_nl = {{0.0, 1.0}};
    model.g_eval = [](double, const VectorXd&, const VectorXd&, Eigen::Ref<MatrixXd> g) {
        g(0, 0) = std::numeric_limits<double>::quiet_NaN();
    };
    const VectorXd times = linspace(0.0, 1.0, 20);
    ObservationSet obs;
    obs.times = times;
    obs.Y = times;
    const EstimationResult r =
        fit_sls(model, obs, (VectorXd(1) << 0.5).finished(), {});
    REQUIRE_FALSE(r.converged);
    REQUIRE(std::isinf(r.loss));
}

TEST_CASE("restart sequence is deterministic and never worsens the fit", "[optimize]") {
    const BenchmarkSpec spec = benchmark_fhn();
    const ObservationSet obs = noisy_benchmark_obs(spec, 20, 10.0, 21);
    const VectorXd init = (VectorXd(1) << 8.0).finished();
    OptimizerConfig one, three;
    three.restarts = 3;
    const EstimationResult single = fit_sls(spec.model, obs, init, one);
    const EstimationResult multi = fit_sls(spec.model, obs, init, three);
    const EstimationResult multi2 = fit_sls(spec.model, obs, init, three);
    REQUIRE(multi.loss <= single.loss + 1e-12);
    REQUIRE(multi.loss == multi2.loss);
    REQUIRE(same_bits(multi.estimate.theta_nl, multi2.estimate.theta_nl));
    REQUIRE(multi.iterations >= single.iterations);
}

TEST_CASE("out-of-bounds initial guesses are contract violations", "[optimize]") {
    const BenchmarkSpec spec = benchmark_fhn();
    const ObservationSet obs = noisy_benchmark_obs(spec, 20, 10.0, 3);
    REQUIRE_THROWS_AS(fit_sls(spec.model, obs, (VectorXd(1) << 99.0).finished(), {}),
                      ContractError);
    REQUIRE_THROWS_AS(
        fit_nls(spec.model, obs,
                ParamSplit{(VectorXd(1) << 99.0).finished(),
                           (VectorXd(2) << 0.2, 0.2).finished(), VectorXd(0)},
                {}),
        ContractError);
}
