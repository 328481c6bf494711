#pragma once

#include "sepode/harness.hpp"
#include "sepode/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace sepode {

namespace fs = std::filesystem;
using nlohmann::json;

// Exit codes: 0 success (including recorded non-convergence), 1 runtime
// failure, 2 usage/config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& err) {
        throw ContractError("config parse error in " + path + ": " + err.what());
    }
    return j;
}

inline OptimizerConfig optimizer_from_json(const json& j) {
    OptimizerConfig cfg;
    if (!j.is_object()) return cfg;
    if (j.contains("algorithm")) {
        const std::string alg = j.at("algorithm").get<std::string>();
        if (alg == "quasi_newton")
            cfg.algorithm = Algorithm::BoundedQuasiNewton;
        else if (alg == "simplex")
            cfg.algorithm = Algorithm::Simplex;
        else
            throw ContractError("unknown optimizer algorithm: " + alg);
    }
    cfg.max_iters = j.value("max_iters", cfg.max_iters);
    cfg.tol = j.value("tol", cfg.tol);
    cfg.fd_step = j.value("fd_step", cfg.fd_step);
    cfg.restarts = j.value("restarts", cfg.restarts);
    if (cfg.max_iters < 1 || !(cfg.tol > 0.0))
        throw ContractError("optimizer: max_iters >= 1 and tol > 0 required");
    return cfg;
}

inline json optimizer_to_json(const OptimizerConfig& cfg) {
    return json{{"algorithm", cfg.algorithm == Algorithm::Simplex ? "simplex"
                                                                  : "quasi_newton"},
                {"max_iters", cfg.max_iters},
                {"tol", cfg.tol},
                {"fd_step", cfg.fd_step},
                {"restarts", cfg.restarts}};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Observation CSV: header `t,<state names>`, one row per sample time,
/// full floating precision. snr_divisor <= 0 means noise-free output.
inline int cmd_simulate(const std::string& config_path, const std::string& out_path) {
    try {
        const json cfg = load_json_file(config_path);
        const std::string name = cfg.at("benchmark").get<std::string>();
        const BenchmarkSpec spec = benchmark_by_name(name);
        const int n = cfg.at("n").get<int>();
        const double snr = cfg.value("snr_divisor", 10.0);
        const std::uint64_t seed = cfg.value("seed", 20190401ull);
        if (n < 2) throw ContractError("simulate: n must be >= 2");

        const VectorXd times = linspace(0.0, spec.model.horizon, n);
        const MatrixXd traj = integrate(spec.model, spec.theta_true, times);
        ObservationSet obs;
        if (snr > 0.0) {
            Rng rng = make_stream(seed, 0, StreamTag::noise);
            obs = generate_observations(times, traj, snr, rng);
        } else {
            obs = observations_from_trajectory(times, traj);
        }

        std::ostringstream out;
        out << "t";
        for (const auto& s : spec.model.state_names) out << "," << s;
        out << "\n";
        for (Eigen::Index i = 0; i < obs.times.size(); ++i) {
            out << fmt_g17(obs.times[i]);
            for (Eigen::Index j = 0; j < obs.Y.cols(); ++j)
                out << "," << fmt_g17(obs.Y(i, j));
            out << "\n";
        }
        write_text_file(out_path, out.str());
        return kExitOk;
    } catch (const ContractError& err) {
        std::cerr << "simulate: " << err.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& err) {
        std::cerr << "simulate: " << err.what() << "\n";
        const bool unwritable =
            std::string(err.what()).find("cannot write") != std::string::npos ||
            std::string(err.what()).find("write failed") != std::string::npos;
        return unwritable ? kExitUsage : kExitRuntime;
    }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open data file: " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (first) {
            table.header = fields;
            first = false;
        } else {
            table.rows.push_back(fields);
        }
    }
    if (table.header.empty()) throw ContractError("empty data file: " + path);
    return table;
}

inline double parse_double(const std::string& s) {
    size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ContractError("malformed numeric field: '" + s + "'");
    }
    if (pos != s.size()) throw ContractError("malformed numeric field: '" + s + "'");
    return v;
}

inline ObservationSet observations_from_csv(const CsvTable& table,
                                            const SeparableModel& model) {
    if (table.header.size() != static_cast<size_t>(model.d) + 1 ||
        table.header[0] != "t")
        throw ContractError("data header must be t,<state names>");
    for (int j = 0; j < model.d; ++j)
        if (table.header[j + 1] != model.state_names[j])
            throw ContractError("data column '" + table.header[j + 1] +
                                "' does not match state '" + model.state_names[j] + "'");
    const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
    ObservationSet obs;
    obs.times.resize(n);
    obs.Y.resize(n, model.d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<size_t>(i)];
        if (row.size() != table.header.size())
            throw ContractError("ragged CSV row " + std::to_string(i + 2));
        obs.times[i] = parse_double(row[0]);
        for (int j = 0; j < model.d; ++j) obs.Y(i, j) = parse_double(row[j + 1]);
    }
    return obs;
}

inline json estimates_to_json(const SeparableModel& model, const ParamSplit& est) {
    json out = json::object();
    for (int s = 0; s < model.d; ++s)
        out[model.state_names[s] + "_0"] = est.xi.size() ? est.xi[s] : NAN;
    for (int i = 0; i < model.p_nl; ++i) out[model.param_names_nl[i]] = est.theta_nl[i];
    for (int j = 0; j < model.p_l; ++j) out[model.param_names_l[j]] = est.theta_l[j];
    return out;
}

inline json result_to_json(const SeparableModel& model, const EstimationResult& r) {
    return json{{"method", to_string(r.method)},
                {"estimates", estimates_to_json(model, r.estimate)},
                {"loss", r.loss},
                {"iterations", r.iterations},
                {"wall_time", r.wall_time},
                {"converged", r.converged},
                {"diagnostics", json{{"cond_B", r.cond_B},
                                     {"ridge_used", r.ridge_used},
                                     {"termination", r.termination}}}};
}

/// Fit one dataset by SLS, NLS, or both; non-convergence is a recorded
/// outcome (exit 0), not an error.
inline int cmd_fit(const std::string& config_path, const std::string& data_path,
                   const std::string& method, const std::string& out_path) {
    try {
        const json cfg = load_json_file(config_path);
        const std::string name = cfg.at("benchmark").get<std::string>();
        const BenchmarkSpec spec = benchmark_by_name(name);
        const std::uint64_t seed = cfg.value("seed", 20190401ull);
        const double prior_cv = cfg.value("prior_cv", 0.0);
        const OptimizerConfig opt = optimizer_from_json(cfg.value("optimizer", json()));
        if (method != "sls" && method != "nls" && method != "both")
            throw ContractError("method must be sls, nls, or both");

        const ObservationSet obs = observations_from_csv(read_csv(data_path), spec.model);

        Rng rng_nl = make_stream(seed, 0, StreamTag::nl_guess);
        const VectorXd theta_nl_init = make_nl_guess(spec.model.bounds_nl, rng_nl);

        json results = json::array();
        if (method == "sls" || method == "both") {
            const EstimationResult r = fit_sls(spec.model, obs, theta_nl_init, opt);
            results.push_back(result_to_json(spec.model, r));
        }
        if (method == "nls" || method == "both") {
            Rng rng_l = make_stream(seed, 0, StreamTag::l_guess);
            const VectorXd theta_l_init = make_prior_guess(
                spec.theta_true.theta_l, prior_cv, spec.model.positivity_l, rng_l);
            const EstimationResult r = fit_nls(
                spec.model, obs, ParamSplit{theta_nl_init, theta_l_init, VectorXd(0)},
                opt);
            json entry = result_to_json(spec.model, r);
            json init = json::object();
            for (int j = 0; j < spec.model.p_l; ++j)
                init[spec.model.param_names_l[j]] = theta_l_init[j];
            entry["theta_l_init"] = init;
            results.push_back(entry);
        }
        write_text_file(out_path, results.dump(2) + "\n");
        return kExitOk;
    } catch (const ContractError& err) {
        std::cerr << "fit: " << err.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& err) {
        std::cerr << "fit: " << err.what() << "\n";
        return kExitRuntime;
    }
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct BenchmarkRunConfig {
    std::vector<std::string> models = {"sir", "lv", "gma", "fhn"};
    std::map<std::string, std::vector<int>> sample_sizes;  // defaults from BenchmarkSpec
    std::vector<double> snr_divisors = {10.0, 5.0};
    std::vector<std::string> priors = {"low", "medium", "high"};
    int mc_reps = 500;
    std::uint64_t master_seed = 20190401;
    OptimizerConfig optimizer;
    bool exclude_nonconverged = false;
    RatioAggregation aggregation = RatioAggregation::block_sum;
    int threads = 0;
};

inline int prior_index(const std::string& label) {
    if (label == "high") return 0;
    if (label == "medium") return 1;
    if (label == "low") return 2;
    throw ContractError("unknown prior quality label: " + label);
}

inline BenchmarkRunConfig benchmark_config_from_json(const json& j) {
    BenchmarkRunConfig cfg;
    if (j.contains("models")) cfg.models = j.at("models").get<std::vector<std::string>>();
    for (const auto& m : cfg.models) benchmark_by_name(m);  // validate names early
    if (j.contains("sample_sizes"))
        for (const auto& [k, v] : j.at("sample_sizes").items())
            cfg.sample_sizes[k] = v.get<std::vector<int>>();
    if (j.contains("snr_divisors"))
        cfg.snr_divisors = j.at("snr_divisors").get<std::vector<double>>();
    if (j.contains("priors")) cfg.priors = j.at("priors").get<std::vector<std::string>>();
    for (const auto& p : cfg.priors) prior_index(p);
    cfg.mc_reps = j.value("mc_reps", cfg.mc_reps);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    if (j.contains("optimizer")) cfg.optimizer = optimizer_from_json(j.at("optimizer"));
    cfg.exclude_nonconverged = j.value("exclude_nonconverged", cfg.exclude_nonconverged);
    if (j.contains("ratio_aggregation")) {
        const std::string agg = j.at("ratio_aggregation").get<std::string>();
        if (agg == "block_sum")
            cfg.aggregation = RatioAggregation::block_sum;
        else if (agg == "mean_of_ratios")
            cfg.aggregation = RatioAggregation::mean_of_ratios;
        else
            throw ContractError("unknown ratio_aggregation: " + agg);
    }
    cfg.threads = j.value("threads", cfg.threads);
    if (cfg.mc_reps < 1) throw ContractError("benchmark: mc_reps must be >= 1");
    return cfg;
}

inline json benchmark_config_to_json(const BenchmarkRunConfig& cfg) {
    json sizes = json::object();
    for (const auto& m : cfg.models) {
        const auto it = cfg.sample_sizes.find(m);
        sizes[m] = it != cfg.sample_sizes.end() ? it->second
                                                : benchmark_by_name(m).sample_sizes;
    }
    return json{{"models", cfg.models},
                {"sample_sizes", sizes},
                {"snr_divisors", cfg.snr_divisors},
                {"priors", cfg.priors},
                {"mc_reps", cfg.mc_reps},
                {"master_seed", cfg.master_seed},
                {"optimizer", optimizer_to_json(cfg.optimizer)},
                {"exclude_nonconverged", cfg.exclude_nonconverged},
                {"ratio_aggregation", cfg.aggregation == RatioAggregation::block_sum
                                          ? "block_sum"
                                          : "mean_of_ratios"},
                {"threads", cfg.threads}};
}

struct CellResult {
    std::string model;
    int n = 0;
    double snr = 0.0;
    std::string prior;
    double prior_cv = 0.0;
    bool failed = false;
    std::string failure;
    McSummary summary;
    std::vector<RepRecord> records;
};

namespace detail {

inline std::string sanitize_csv(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

inline void emit_ratio_tables(const std::vector<CellResult>& cells, const fs::path& dir) {
    std::ostringstream lin, nonlin;
    lin << "model,n,snr,prior,ratio,nls_excluded,sls_excluded\n";
    nonlin << "model,n,snr,prior,ratio,nls_excluded,sls_excluded\n";
    for (const auto& cell : cells) {
        const std::string prefix = cell.model + "," + std::to_string(cell.n) + "," +
                                   fmt_g17(cell.snr) + "," + cell.prior + ",";
        if (cell.failed) {
            const std::string row = prefix + "error:" + sanitize_csv(cell.failure) + ",,\n";
            lin << row;
            nonlin << row;
            continue;
        }
        lin << prefix << fmt_g17(cell.summary.ratio_linear) << ","
            << cell.summary.nls_excluded << "," << cell.summary.sls_excluded << "\n";
        nonlin << prefix << fmt_g17(cell.summary.ratio_nonlinear) << ","
               << cell.summary.nls_excluded << "," << cell.summary.sls_excluded << "\n";
    }
    write_text_file((dir / "mse_ratios_linear.csv").string(), lin.str());
    write_text_file((dir / "mse_ratios_nonlinear.csv").string(), nonlin.str());
}

inline void emit_losses(const std::vector<CellResult>& cells, const fs::path& dir) {
    std::ostringstream out;
    out << "model,n,snr,prior,rep,method,converged,iterations,loss,wall_time,"
           "sqerr_linear,sqerr_nonlinear\n";
    for (const auto& cell : cells) {
        if (cell.failed) continue;
        const BenchmarkSpec spec = benchmark_by_name(cell.model);
        const std::string prefix = cell.model + "," + std::to_string(cell.n) + "," +
                                   fmt_g17(cell.snr) + "," + cell.prior + ",";
        for (const auto& rec : cell.records) {
            if (!rec.ok) continue;
            for (const EstimationResult* r : {&rec.sls, &rec.nls}) {
                const bool have_estimate = r->estimate.xi.allFinite() &&
                                           r->estimate.theta_l.allFinite();
                const double sq_l =
                    have_estimate ? block_sq_error(r->estimate, spec.theta_true, false)
                                  : std::numeric_limits<double>::quiet_NaN();
                const double sq_nl =
                    have_estimate ? block_sq_error(r->estimate, spec.theta_true, true)
                                  : std::numeric_limits<double>::quiet_NaN();
                out << prefix << rec.rep_index << "," << to_string(r->method) << ","
                    << (r->converged ? 1 : 0) << "," << r->iterations << ","
                    << fmt_g17(r->loss) << "," << fmt_g17(r->wall_time) << ","
                    << fmt_g17(sq_l) << "," << fmt_g17(sq_nl) << "\n";
            }
        }
    }
    write_text_file((dir / "losses.csv").string(), out.str());
}

inline void emit_model_plots(const std::string& model,
                             const std::vector<const CellResult*>& cells,
                             const fs::path& plot_dir,
                             const std::vector<std::string>& prior_order) {
    const auto prior_pos = [&](const std::string& label) {
        for (size_t i = 0; i < prior_order.size(); ++i)
            if (prior_order[i] == label) return static_cast<int>(i);
        return 0;
    };

    // Fig.1 analogue: linear-block MSE (log10) against prior quality,
    // one NLS and one SLS series per (n, snr) setting.
    {
        std::ostringstream dat;
        dat << "# " << model
            << ": prior_index prior n snr nls_mse sls_mse (linear block)\n";
        struct Series {
            std::string key;
            std::vector<double> xs, nls, sls;
        };
        std::vector<Series> series;
        double y_lo = 1e300, y_hi = -1e300;
        for (const CellResult* cell : cells) {
            if (cell->failed) continue;
            const std::string key =
                "n=" + std::to_string(cell->n) + " snr=" + fmt_g17(cell->snr);
            auto it = std::find_if(series.begin(), series.end(),
                                   [&](const Series& s) { return s.key == key; });
            if (it == series.end()) {
                series.push_back({key, {}, {}, {}});
                it = series.end() - 1;
            }
            const double nls = log10_clipped(cell->summary.mse_linear_nls.sum());
            const double sls = log10_clipped(cell->summary.mse_linear_sls.sum());
            it->xs.push_back(prior_pos(cell->prior));
            it->nls.push_back(nls);
            it->sls.push_back(sls);
            y_lo = std::min({y_lo, nls, sls});
            y_hi = std::max({y_hi, nls, sls});
            dat << prior_pos(cell->prior) << " " << cell->prior << " " << cell->n << " "
                << fmt_g17(cell->snr) << " " << fmt_g17(cell->summary.mse_linear_nls.sum())
                << " " << fmt_g17(cell->summary.mse_linear_sls.sum()) << "\n";
        }
        write_text_file((plot_dir / (model + "_mse_vs_prior.dat")).string(), dat.str());
        if (!series.empty() && y_hi > y_lo - 1) {
            if (y_hi <= y_lo) y_hi = y_lo + 1;
            SvgCanvas svg(-0.5, prior_order.size() - 0.5, y_lo - 0.3, y_hi + 0.3);
            std::vector<std::pair<double, std::string>> xticks;
            for (size_t i = 0; i < prior_order.size(); ++i)
                xticks.emplace_back(static_cast<double>(i), prior_order[i]);
            svg.axes("prior quality", "log10 MSE (linear block)",
                     model + ": accuracy vs prior information", xticks,
                     nice_ticks(y_lo - 0.3, y_hi + 0.3));
            int color_index = 0;
            for (const auto& s : series) {
                // sort points by x for a clean polyline
                std::vector<size_t> idx(s.xs.size());
                for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
                std::sort(idx.begin(), idx.end(),
                          [&](size_t a, size_t b) { return s.xs[a] < s.xs[b]; });
                std::vector<double> xs, nls, sls;
                for (size_t i : idx) {
                    xs.push_back(s.xs[i]);
                    nls.push_back(s.nls[i]);
                    sls.push_back(s.sls[i]);
                }
                const auto& palette = prior_palette();
                const std::string color = palette[color_index % palette.size()];
                svg.polyline(xs, nls, color, 2.0);
                svg.polyline(xs, sls, color, 1.2);
                svg.text(SvgCanvas::margin_ + 6,
                         SvgCanvas::margin_ + 16 + 14 * color_index,
                         s.key + " (thick NLS, thin SLS)", 11, "start", color);
                ++color_index;
            }
            write_text_file((plot_dir / (model + "_mse_vs_prior.svg")).string(),
                            svg.finish());
        }
    }

    // Fig.2 analogue: per-replication NLS vs SLS losses on log axes with the
    // 45-degree reference diagonal, colored by prior quality.
    {
        std::ostringstream dat;
        dat << "# " << model << ": prior n snr rep nls_loss sls_loss\n";
        double lo = 1e300, hi = -1e300;
        struct Point {
            double x, y;
            int prior;
        };
        std::vector<Point> points;
        for (const CellResult* cell : cells) {
            if (cell->failed) continue;
            for (const auto& rec : cell->records) {
                if (!rec.ok || !std::isfinite(rec.nls.loss) ||
                    !std::isfinite(rec.sls.loss))
                    continue;
                const double x = log10_clipped(rec.nls.loss);
                const double y = log10_clipped(rec.sls.loss);
                points.push_back({x, y, prior_pos(cell->prior)});
                lo = std::min({lo, x, y});
                hi = std::max({hi, x, y});
                dat << cell->prior << " " << cell->n << " " << fmt_g17(cell->snr) << " "
                    << rec.rep_index << " " << fmt_g17(rec.nls.loss) << " "
                    << fmt_g17(rec.sls.loss) << "\n";
            }
        }
        write_text_file((plot_dir / (model + "_loss_scatter.dat")).string(), dat.str());
        if (!points.empty()) {
            if (hi <= lo) hi = lo + 1;
            SvgCanvas svg(lo - 0.3, hi + 0.3, lo - 0.3, hi + 0.3);
            svg.axes("log10 NLS loss", "log10 SLS loss", model + ": losses per replication",
                     nice_ticks(lo - 0.3, hi + 0.3), nice_ticks(lo - 0.3, hi + 0.3));
            svg.line(lo - 0.3, lo - 0.3, hi + 0.3, hi + 0.3, "#808080", 1.0, "4 3");
            const auto& palette = prior_palette();
            for (const auto& p : points)
                svg.circle(p.x, p.y, 2.2, palette[p.prior % palette.size()], 0.55);
            for (size_t i = 0; i < prior_order.size(); ++i)
                svg.text(SvgCanvas::margin_ + 6, SvgCanvas::margin_ + 16 + 14 * i,
                         prior_order[i] + " prior", 11, "start",
                         palette[i % palette.size()]);
            write_text_file((plot_dir / (model + "_loss_scatter.svg")).string(),
                            svg.finish());
        }
    }

    // Fig.3 analogue: boxplots of log10 losses and of optimization times,
    // grouped by prior quality, NLS next to SLS.
    for (const bool times : {false, true}) {
        std::ostringstream dat;
        dat << "# " << model << (times ? " times" : " losses")
            << ": prior method lo q1 median q3 hi\n";
        struct Group {
            std::string label;
            BoxStats nls, sls;
        };
        std::vector<Group> groups;
        double lo = 1e300, hi = -1e300;
        for (const std::string& prior : prior_order) {
            std::vector<double> v_nls, v_sls;
            for (const CellResult* cell : cells) {
                if (cell->failed || cell->prior != prior) continue;
                const auto& src_n = times ? cell->summary.times_nls : cell->summary.losses_nls;
                const auto& src_s = times ? cell->summary.times_sls : cell->summary.losses_sls;
                for (double v : src_n) v_nls.push_back(times ? v : log10_clipped(v));
                for (double v : src_s) v_sls.push_back(times ? v : log10_clipped(v));
            }
            if (v_nls.empty() && v_sls.empty()) continue;
            Group g{prior, box_stats(v_nls), box_stats(v_sls)};
            groups.push_back(g);
            for (const BoxStats* b : {&g.nls, &g.sls}) {
                lo = std::min(lo, b->lo);
                hi = std::max(hi, b->hi);
            }
            dat << prior << " nls " << fmt_g17(g.nls.lo) << " " << fmt_g17(g.nls.q1) << " "
                << fmt_g17(g.nls.med) << " " << fmt_g17(g.nls.q3) << " "
                << fmt_g17(g.nls.hi) << "\n";
            dat << prior << " sls " << fmt_g17(g.sls.lo) << " " << fmt_g17(g.sls.q1) << " "
                << fmt_g17(g.sls.med) << " " << fmt_g17(g.sls.q3) << " "
                << fmt_g17(g.sls.hi) << "\n";
        }
        const std::string stem = model + (times ? "_time_box" : "_loss_box");
        write_text_file((plot_dir / (stem + ".dat")).string(), dat.str());
        if (groups.empty()) continue;
        if (hi <= lo) hi = lo + 1;
        const double pad = 0.05 * (hi - lo);
        SvgCanvas svg(-0.6, groups.size() - 0.4, lo - pad, hi + pad);
        std::vector<std::pair<double, std::string>> xticks;
        for (size_t i = 0; i < groups.size(); ++i)
            xticks.emplace_back(static_cast<double>(i), groups[i].label);
        svg.axes("prior quality",
                 times ? "optimization wall time [s]" : "log10 loss",
                 model + (times ? ": optimization times" : ": losses"), xticks,
                 nice_ticks(lo - pad, hi + pad));
        for (size_t i = 0; i < groups.size(); ++i) {
            const auto draw_box = [&](const BoxStats& b, double center,
                                      const std::string& color) {
                const double w = 0.14;
                svg.line(center, b.lo, center, b.q1, color);
                svg.line(center, b.q3, center, b.hi, color);
                svg.rect(center - w, b.q1, center + w, b.q3, "none", color);
                svg.line(center - w, b.med, center + w, b.med, color, 2.0);
            };
            draw_box(groups[i].nls, i - 0.18, "#d95f02");
            draw_box(groups[i].sls, i + 0.18, "#1b9e77");
        }
        svg.text(SvgCanvas::margin_ + 6, SvgCanvas::margin_ + 16, "NLS", 11, "start",
                 "#d95f02");
        svg.text(SvgCanvas::margin_ + 6, SvgCanvas::margin_ + 30, "SLS", 11, "start",
                 "#1b9e77");
        write_text_file((plot_dir / (stem + ".svg")).string(), svg.finish());
    }
}

}  // namespace detail

/// Run the full benchmark sweep described by the config: per cell, the
/// Monte-Carlo experiment and its summary; then the ratio tables, the
/// per-replication loss table, plots, and a manifest sufficient to
/// reproduce every output. Partial cell failures are recorded in the CSV
/// and the run continues.
inline int cmd_benchmark(const std::string& config_path, const std::string& out_dir,
                         int threads_override = -1,
                         std::optional<std::uint64_t> seed_override = {}) {
    BenchmarkRunConfig cfg;
    try {
        cfg = benchmark_config_from_json(load_json_file(config_path));
        if (threads_override >= 0) cfg.threads = threads_override;
        if (seed_override) cfg.master_seed = *seed_override;
        fs::create_directories(fs::path(out_dir) / "plots");
    } catch (const std::exception& err) {
        std::cerr << "benchmark: " << err.what() << "\n";
        return kExitUsage;
    }

    std::vector<CellResult> cells;
    size_t failed_cells = 0;
    for (const auto& model_name : cfg.models) {
        const BenchmarkSpec spec = benchmark_by_name(model_name);
        const auto sizes_it = cfg.sample_sizes.find(model_name);
        const std::vector<int>& sizes =
            sizes_it != cfg.sample_sizes.end() ? sizes_it->second : spec.sample_sizes;
        for (int n : sizes)
            for (double snr : cfg.snr_divisors)
                for (const auto& prior : cfg.priors) {
                    CellResult cell;
                    cell.model = model_name;
                    cell.n = n;
                    cell.snr = snr;
                    cell.prior = prior;
                    cell.prior_cv = spec.prior_cvs[static_cast<size_t>(prior_index(prior))];
                    try {
                        ExperimentConfig ec;
                        ec.benchmark = model_name;
                        ec.n = n;
                        ec.snr_divisor = snr;
                        ec.prior_cv = cell.prior_cv;
                        ec.mc_reps = cfg.mc_reps;
                        ec.master_seed = cfg.master_seed;
                        ec.optimizer = cfg.optimizer;
                        ec.exclude_nonconverged = cfg.exclude_nonconverged;
                        ec.aggregation = cfg.aggregation;
                        ec.threads = cfg.threads;
                        cell.records = run_experiment(ec);
                        cell.summary = summarize(cell.records, ec);
                    } catch (const std::exception& err) {
                        cell.failed = true;
                        cell.failure = err.what();
                        ++failed_cells;
                    }
                    cells.push_back(std::move(cell));
                    std::cerr << "benchmark: " << model_name << " n=" << n << " snr=" << snr
                              << " prior=" << prior
                              << (cells.back().failed ? " FAILED" : " done") << "\n";
                }
    }

    try {
        const fs::path dir(out_dir);
        detail::emit_ratio_tables(cells, dir);
        detail::emit_losses(cells, dir);
        for (const auto& model_name : cfg.models) {
            std::vector<const CellResult*> model_cells;
            for (const auto& cell : cells)
                if (cell.model == model_name) model_cells.push_back(&cell);
            detail::emit_model_plots(model_name, model_cells, dir / "plots", cfg.priors);
        }
        json manifest = benchmark_config_to_json(cfg);
        json cell_log = json::array();
        for (const auto& cell : cells)
            cell_log.push_back(json{{"model", cell.model},
                                    {"n", cell.n},
                                    {"snr", cell.snr},
                                    {"prior", cell.prior},
                                    {"prior_cv", cell.prior_cv},
                                    {"failed", cell.failed},
                                    {"failure", cell.failure},
                                    {"skipped", cell.failed ? 0 : cell.summary.skipped}});
        manifest["cells"] = cell_log;
        write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    } catch (const std::exception& err) {
        std::cerr << "benchmark: output failure: " << err.what() << "\n";
        return kExitRuntime;
    }

    return failed_cells == cells.size() && !cells.empty() ? kExitRuntime : kExitOk;
}

}  // namespace sepode
