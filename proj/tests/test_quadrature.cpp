#include "sepode/quadrature.hpp"
#include "sepode/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace sepode;

TEST_CASE("cumtrapz of a constant is linear", "[quadrature]") {
    VectorXd grid(3);
    grid << 0.0, 0.5, 1.0;
    MatrixXd values = MatrixXd::Ones(3, 1);
    const MatrixXd out = cumtrapz(grid, values);
    REQUIRE(out(0, 0) == 0.0);
    REQUIRE(out(1, 0) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(out(2, 0) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("cumtrapz is exact for piecewise-linear integrands", "[quadrature]") {
    const VectorXd grid = linspace(0.0, 1.0, 201);
    const MatrixXd values = grid;  // integrand t, integral t^2/2
    const MatrixXd out = cumtrapz(grid, values);
    REQUIRE(out(200, 0) == Catch::Approx(0.5).margin(1e-4));
}

TEST_CASE("cumtrapz of t^2 converges to the analytic integral", "[quadrature]") {
    const VectorXd grid = linspace(0.0, 1.0, 2001);
    const MatrixXd values = grid.array().square();
    const MatrixXd out = cumtrapz(grid, values);
    REQUIRE(out(2000, 0) == Catch::Approx(1.0 / 3.0).margin(1e-6));  // analytic oracle
}

TEST_CASE("cumtrapz rejects non-monotone grids", "[quadrature]") {
    VectorXd grid(3);
    grid << 0.0, 0.5, 0.5;
    REQUIRE_THROWS_AS(cumtrapz(grid, MatrixXd::Ones(3, 1)), ContractError);
    grid << 0.0, 0.7, 0.4;
    REQUIRE_THROWS_AS(cumtrapz(grid, MatrixXd::Ones(3, 1)), ContractError);
}

TEST_CASE("trapz weights integrate exactly what trapz integrates", "[quadrature]") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 5 + static_cast<int>(rng.uniform(0, 60));
        VectorXd grid(m);
        grid[0] = rng.uniform(-1.0, 1.0);
        for (int i = 1; i < m; ++i) grid[i] = grid[i - 1] + rng.uniform(0.01, 1.0);
        VectorXd values(m);
        for (int i = 0; i < m; ++i) values[i] = rng.uniform(-5.0, 5.0);
        const VectorXd w = trapz_weights(grid);
        REQUIRE(w.sum() == Catch::Approx(grid[m - 1] - grid[0]).epsilon(1e-12));
        REQUIRE(w.dot(values) == Catch::Approx(trapz(grid, values)).margin(1e-12));
    }
}

TEST_CASE("rng streams are deterministic and tag-separated", "[quadrature]") {
    Rng a = make_stream(12345, 7, StreamTag::noise);
    Rng b = make_stream(12345, 7, StreamTag::noise);
    Rng c = make_stream(12345, 7, StreamTag::nl_guess);
    bool all_equal = true, any_differ = false;
    for (int i = 0; i < 100; ++i) {
        const double va = a.uniform01(), vb = b.uniform01(), vc = c.uniform01();
        all_equal = all_equal && va == vb;
        any_differ = any_differ || va != vc;
        REQUIRE(va >= 0.0);
        REQUIRE(va < 1.0);
    }
    REQUIRE(all_equal);
    REQUIRE(any_differ);
}

TEST_CASE("rng normal has the requested moments", "[quadrature]") {
    Rng rng(2024);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal(1.5, 2.0);
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(mean == Catch::Approx(1.5).margin(0.02));
    REQUIRE(std::sqrt(var) == Catch::Approx(2.0).margin(0.02));
}
