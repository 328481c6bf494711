#include "sepode/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <optional>
#include <string>

namespace {

int threads_from_env() {
    const char* env = std::getenv("SEPODE_THREADS");
    if (!env) return -1;
    try {
        return std::max(0, std::stoi(env));
    } catch (const std::exception&) {
        return -1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Separable nonlinear least-squares estimation for ODE systems"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_path, method = "both";
    int threads = -1;
    std::optional<std::uint64_t> seed;

    auto* simulate = app.add_subcommand("simulate", "Write a simulated observation CSV");
    simulate->add_option("--config", config_path, "JSON config file")->required();
    simulate->add_option("--out", out_path, "Output CSV path")->required();

    auto* fit = app.add_subcommand("fit", "Fit one dataset by SLS and/or NLS");
    fit->add_option("--config", config_path, "JSON config file")->required();
    fit->add_option("--data", data_path, "Observation CSV")->required();
    fit->add_option("--method", method, "sls, nls, or both (default both)")
        ->check(CLI::IsMember({"sls", "nls", "both"}));
    fit->add_option("--out", out_path, "Output JSON path")->required();

    auto* benchmark = app.add_subcommand("benchmark", "Run the Monte-Carlo comparison");
    benchmark->add_option("--config", config_path, "JSON config file")->required();
    benchmark->add_option("--out", out_path, "Output directory")->required();
    benchmark->add_option("--threads", threads, "Worker count (default: hardware)");
    std::uint64_t seed_value = 0;
    auto* seed_opt = benchmark->add_option("--seed", seed_value, "Master seed override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : sepode::kExitUsage;
    }

    if (simulate->parsed()) return sepode::cmd_simulate(config_path, out_path);
    if (fit->parsed()) return sepode::cmd_fit(config_path, data_path, method, out_path);
    if (benchmark->parsed()) {
        if (threads < 0) threads = threads_from_env();
        if (*seed_opt) seed = seed_value;
        return sepode::cmd_benchmark(config_path, out_path, threads, seed);
    }
    return sepode::kExitUsage;
}
