#pragma once

#include "sepode/models.hpp"
#include "sepode/optimize.hpp"
#include "sepode/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sepode {

enum class RatioAggregation {
    block_sum,        ///< sum squared errors within a block, then ratio
    mean_of_ratios,   ///< average the per-parameter MSE ratios
};

/// One Monte-Carlo cell: a benchmark at fixed (n, snr, prior quality).
struct ExperimentConfig {
    std::string benchmark;
    int n = 0;
    double snr_divisor = 10.0;
    double prior_cv = 0.0;
    int mc_reps = 500;
    std::uint64_t master_seed = 20190401;
    OptimizerConfig optimizer;
    /// When true, a method's non-converged replications are dropped from its
    /// averages (counts are always reported). Default is to include them:
    /// a stalled search still returns its best point, and that point is the
    /// method's answer.
    bool exclude_nonconverged = false;
    RatioAggregation aggregation = RatioAggregation::block_sum;
    int threads = 0;  ///< 0 = hardware concurrency
};

/// NLS initial guesses for the linear parameters: Gaussian centered on the
/// truth with standard deviation prior_cv * |truth|. Components flagged
/// positive are redrawn until positive (capped, then made positive by
/// absolute value).
inline VectorXd make_prior_guess(const VectorXd& theta_l_true, double prior_cv,
                                 const std::vector<bool>& positivity, Rng& rng) {
    if (prior_cv < 0.0) throw ContractError("make_prior_guess: prior_cv must be >= 0");
    if (positivity.size() != static_cast<size_t>(theta_l_true.size()))
        throw ContractError("make_prior_guess: positivity flag count mismatch");
    VectorXd guess(theta_l_true.size());
    for (Eigen::Index k = 0; k < theta_l_true.size(); ++k) {
        const double sd = prior_cv * std::abs(theta_l_true[k]);
        double value = rng.normal(theta_l_true[k], sd);
        if (positivity[k]) {
            for (int attempt = 0; attempt < 100 && !(value > 0.0); ++attempt)
                value = rng.normal(theta_l_true[k], sd);
            if (!(value > 0.0)) value = std::abs(value);
        }
        guess[k] = value;
    }
    return guess;
}

/// Shared nonlinear initial guess: uniform within each bound interval.
inline VectorXd make_nl_guess(const std::vector<Interval>& bounds, Rng& rng) {
    VectorXd guess(bounds.size());
    for (size_t i = 0; i < bounds.size(); ++i) {
        if (!std::isfinite(bounds[i].lo) || !std::isfinite(bounds[i].hi))
            throw ContractError("make_nl_guess: bounds must be finite");
        guess[static_cast<Eigen::Index>(i)] = rng.uniform(bounds[i].lo, bounds[i].hi);
    }
    return guess;
}

struct RepRecord {
    int rep_index = -1;
    bool ok = false;
    std::string skip_reason;
    VectorXd theta_nl_init;      ///< shared by both methods
    VectorXd nls_theta_l_init;   ///< consumed by NLS only; SLS has no such input
    EstimationResult sls;
    EstimationResult nls;
};

namespace detail {

/// Data and guess streams are derived from (cell seed, rep, purpose), where
/// the cell seed folds in everything except the prior quality. Changing
/// prior_cv therefore changes only the values drawn for the NLS linear
/// guess; observations and the shared nonlinear guess stay bit-identical.
inline std::uint64_t cell_seed(const ExperimentConfig& cfg) {
    std::uint64_t st = cfg.master_seed;
    splitmix64(st);
    st ^= benchmark_id(cfg.benchmark) * 0x9e3779b97f4a7c15ull;
    splitmix64(st);
    st ^= static_cast<std::uint64_t>(cfg.n) * 0xbf58476d1ce4e5b9ull;
    splitmix64(st);
    st ^= static_cast<std::uint64_t>(std::llround(cfg.snr_divisor * 1024.0)) *
          0x94d049bb133111ebull;
    return splitmix64(st);
}

}  // namespace detail

/// One Monte-Carlo replication: simulate, perturb, fit both ways on the
/// identical dataset. Integration failures become recorded skips.
inline RepRecord run_replication(const ExperimentConfig& cfg, int rep_index) {
    RepRecord record;
    record.rep_index = rep_index;
    const BenchmarkSpec spec = benchmark_by_name(cfg.benchmark);
    const std::uint64_t seed = detail::cell_seed(cfg);
    Rng rng_noise = make_stream(seed, rep_index, StreamTag::noise);
    Rng rng_nl = make_stream(seed, rep_index, StreamTag::nl_guess);
    Rng rng_l = make_stream(seed, rep_index, StreamTag::l_guess);

    try {
        const VectorXd times = linspace(0.0, spec.model.horizon, cfg.n);
        const MatrixXd traj = integrate(spec.model, spec.theta_true, times);
        const ObservationSet obs =
            generate_observations(times, traj, cfg.snr_divisor, rng_noise);

        record.theta_nl_init = make_nl_guess(spec.model.bounds_nl, rng_nl);
        record.nls_theta_l_init = make_prior_guess(spec.theta_true.theta_l, cfg.prior_cv,
                                                   spec.model.positivity_l, rng_l);

        record.sls = fit_sls(spec.model, obs, record.theta_nl_init, cfg.optimizer);
        record.nls = fit_nls(
            spec.model, obs,
            ParamSplit{record.theta_nl_init, record.nls_theta_l_init, VectorXd(0)},
            cfg.optimizer);
        record.ok = true;
    } catch (const IntegrationError& err) {
        record.skip_reason = std::string("integration: ") + err.what();
    } catch (const std::exception& err) {
        record.skip_reason = err.what();
    }
    return record;
}

/// All replications of a cell, fanned over a worker pool. Records are keyed
/// by replication index, so results are identical for any worker count.
inline std::vector<RepRecord> run_experiment(const ExperimentConfig& cfg) {
    if (cfg.mc_reps < 1) throw ContractError("run_experiment: mc_reps must be >= 1");
    std::vector<RepRecord> records(cfg.mc_reps);
    unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                       : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(cfg.mc_reps));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= cfg.mc_reps) break;
            records[static_cast<size_t>(i)] = run_replication(cfg, i);
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return records;
}

/// Aggregated Monte-Carlo accuracy/timing summary for one cell. The
/// nonlinear block holds the initial values followed by theta_NL; the
/// linear block is theta_L.
struct McSummary {
    std::vector<std::string> names_nonlinear;  ///< xi names then theta_NL names
    std::vector<std::string> names_linear;
    VectorXd mse_nonlinear_nls, mse_nonlinear_sls;
    VectorXd mse_linear_nls, mse_linear_sls;
    double ratio_linear = std::numeric_limits<double>::quiet_NaN();
    double ratio_nonlinear = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> losses_nls, losses_sls;
    std::vector<double> times_nls, times_sls;
    int nls_nonconverged = 0, sls_nonconverged = 0;
    int nls_excluded = 0, sls_excluded = 0;  ///< dropped from that method's averages
    int skipped = 0;                         ///< replications aborted before fitting
    int usable_nls = 0, usable_sls = 0;
};

namespace detail {

inline VectorXd stacked_error(const ParamSplit& estimate, const ParamSplit& truth,
                              bool nonlinear_block) {
    if (nonlinear_block) {
        VectorXd err(truth.xi.size() + truth.theta_nl.size());
        err.head(truth.xi.size()) = estimate.xi - truth.xi;
        err.tail(truth.theta_nl.size()) = estimate.theta_nl - truth.theta_nl;
        return err;
    }
    return estimate.theta_l - truth.theta_l;
}

}  // namespace detail

/// Per-replication squared errors summed within a block; used both by
/// summarize and by the CSV emission so reported ratios can be recomputed
/// from the per-replication records exactly.
inline double block_sq_error(const ParamSplit& estimate, const ParamSplit& truth,
                             bool nonlinear_block) {
    return detail::stacked_error(estimate, truth, nonlinear_block).squaredNorm();
}

inline McSummary summarize(const std::vector<RepRecord>& records,
                           const ExperimentConfig& cfg) {
    const BenchmarkSpec spec = benchmark_by_name(cfg.benchmark);
    McSummary out;
    for (const auto& s : spec.model.state_names) out.names_nonlinear.push_back(s + "_0");
    for (const auto& s : spec.model.param_names_nl) out.names_nonlinear.push_back(s);
    out.names_linear = spec.model.param_names_l;

    const Eigen::Index n_nl = spec.model.d + spec.model.p_nl;
    const Eigen::Index n_l = spec.model.p_l;
    VectorXd acc_nl_nls = VectorXd::Zero(n_nl), acc_nl_sls = VectorXd::Zero(n_nl);
    VectorXd acc_l_nls = VectorXd::Zero(n_l), acc_l_sls = VectorXd::Zero(n_l);

    std::vector<const RepRecord*> ordered;
    for (const auto& r : records) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(),
              [](const RepRecord* a, const RepRecord* b) { return a->rep_index < b->rep_index; });

    for (const RepRecord* r : ordered) {
        if (!r->ok) {
            ++out.skipped;
            continue;
        }
        if (!r->nls.converged) ++out.nls_nonconverged;
        if (!r->sls.converged) ++out.sls_nonconverged;

        const bool use_nls = r->nls.converged || !cfg.exclude_nonconverged;
        const bool use_sls = r->sls.converged || !cfg.exclude_nonconverged;
        if (use_nls) {
            ++out.usable_nls;
            acc_nl_nls +=
                detail::stacked_error(r->nls.estimate, spec.theta_true, true).cwiseAbs2();
            acc_l_nls +=
                detail::stacked_error(r->nls.estimate, spec.theta_true, false).cwiseAbs2();
            out.losses_nls.push_back(r->nls.loss);
            out.times_nls.push_back(r->nls.wall_time);
        } else {
            ++out.nls_excluded;
        }
        if (use_sls) {
            ++out.usable_sls;
            acc_nl_sls +=
                detail::stacked_error(r->sls.estimate, spec.theta_true, true).cwiseAbs2();
            acc_l_sls +=
                detail::stacked_error(r->sls.estimate, spec.theta_true, false).cwiseAbs2();
            out.losses_sls.push_back(r->sls.loss);
            out.times_sls.push_back(r->sls.wall_time);
        } else {
            ++out.sls_excluded;
        }
    }

    if (out.usable_nls == 0 || out.usable_sls == 0)
        throw std::runtime_error("summarize: no usable replications for at least one method");

    out.mse_nonlinear_nls = acc_nl_nls / out.usable_nls;
    out.mse_nonlinear_sls = acc_nl_sls / out.usable_sls;
    out.mse_linear_nls = acc_l_nls / out.usable_nls;
    out.mse_linear_sls = acc_l_sls / out.usable_sls;

    const auto ratio = [&](const VectorXd& nls, const VectorXd& sls) {
        if (nls.size() == 0) return std::numeric_limits<double>::quiet_NaN();
        if (cfg.aggregation == RatioAggregation::block_sum) {
            const double denom = sls.sum();
            return denom > 0.0 ? nls.sum() / denom
                               : std::numeric_limits<double>::quiet_NaN();
        }
        double acc = 0.0;
        int count = 0;
        for (Eigen::Index i = 0; i < nls.size(); ++i)
            if (sls[i] > 0.0) {
                acc += nls[i] / sls[i];
                ++count;
            }
        return count ? acc / count : std::numeric_limits<double>::quiet_NaN();
    };
    out.ratio_linear = ratio(out.mse_linear_nls, out.mse_linear_sls);
    out.ratio_nonlinear = ratio(out.mse_nonlinear_nls, out.mse_nonlinear_sls);
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace sepode
