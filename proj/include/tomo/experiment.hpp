#pragma once

// Experiment orchestration: sweep bin-width strategies and operator modes
// over repeated seeded tomography runs, aggregate fidelity and timing
// statistics, and emit figure-ready tables.

#include "tomo/binning.hpp"
#include "tomo/mle.hpp"
#include "tomo/povm.hpp"
#include "tomo/rng.hpp"
#include "tomo/sampler.hpp"
#include "tomo/states.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace tomo::experiment {

using fock::DensityMatrix;

enum class ReconstructionMode { raw, center, integral };

inline std::string mode_label(ReconstructionMode mode) {
    switch (mode) {
        case ReconstructionMode::raw: return "raw";
        case ReconstructionMode::center: return "center";
        case ReconstructionMode::integral: return "integral";
    }
    return "?";
}

inline ReconstructionMode parse_mode(const std::string& token) {
    if (token == "raw") return ReconstructionMode::raw;
    if (token == "center") return ReconstructionMode::center;
    if (token == "integral") return ReconstructionMode::integral;
    throw std::invalid_argument("unknown reconstruction mode: " + token);
}

// Token forms: "fixed:<h>", "scott", "leonhardt:t", "leonhardt:mean".
inline binning::WidthStrategy parse_strategy_token(const std::string& token) {
    if (token == "scott") return binning::WidthStrategy::scott();
    if (token == "leonhardt:t")
        return binning::WidthStrategy::leonhardt(binning::LeonhardtSource::truncation);
    if (token == "leonhardt:mean" || token == "leonhardt")
        return binning::WidthStrategy::leonhardt(binning::LeonhardtSource::estimated_mean);
    if (token.rfind("fixed:", 0) == 0) {
        const double h = std::stod(token.substr(6));
        return binning::WidthStrategy::fixed(h);
    }
    throw std::invalid_argument("unknown width strategy: " + token);
}

struct SweepPoint {
    ReconstructionMode mode = ReconstructionMode::raw;
    binning::WidthStrategy strategy;  // ignored in raw mode

    std::string strategy_label() const {
        return mode == ReconstructionMode::raw ? "none" : strategy.label();
    }
};

struct ExperimentConfig {
    states::StateSpec state;
    int phases = 20;
    long samples = 20000;
    double eta = 0.9;
    int repetitions = 100;  // paper default; desk-scale runs use 20
    std::vector<SweepPoint> sweep;
    std::uint64_t master_seed = 1;
    std::string output_path = "out";
    mle::MLEConfig mle;
    int threads = 0;  // 0: hardware concurrency
};

struct RunRow {
    int sweep_index = 0;
    int repetition = 0;
    std::uint64_t seed = 0;
    std::string strategy;
    std::string mode;
    double fidelity = 0.0;
    double mean_width = 0.0;  // realized width averaged over phases; 0 for raw
    double nbar_estimate = 0.0;
    double wall_time_s = 0.0;  // histogramming + operator build + MLE
    int iterations_rpr = 0;
    int iterations_rga = 0;
    double final_gap = 0.0;
    bool converged = false;
    bool failed = false;
    std::string error;
    double truncation_leakage = 0.0;
};

struct SweepSummary {
    SweepPoint point;
    int n_runs = 0;
    int n_converged = 0;
    int n_failed = 0;
    double mean_fidelity = 0.0;
    double std_fidelity = 0.0;  // sample standard deviation (the error-bar half width)
    double mean_time_s = 0.0;
    double mean_width = 0.0;
    double mean_nbar = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<RunRow> rows;
    std::vector<SweepSummary> summaries;
};

inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace detail {

inline RunRow run_single_impl(const ExperimentConfig& config, const SweepPoint& point,
                              int sweep_index, int repetition,
                              const sampling::QuadratureDataset& dataset,
                              const DensityMatrix& rho_reference, double truncation_leakage,
                              povm::OperatorCache* cache) {
    RunRow row;
    row.sweep_index = sweep_index;
    row.repetition = repetition;
    row.seed = dataset.rng_seed;
    row.strategy = point.strategy_label();
    row.mode = mode_label(point.mode);
    row.truncation_leakage = truncation_leakage;
    try {
        const auto t0 = std::chrono::steady_clock::now();
        mle::LikelihoodModel model = [&] {
            if (point.mode == ReconstructionMode::raw)
                return mle::LikelihoodModel::from_raw_data(dataset);
            const auto histograms = binning::build_histograms(dataset, point.strategy);
            double width_sum = 0.0;
            for (const auto& h : histograms) width_sum += h.width();
            row.mean_width = width_sum / double(histograms.size());
            const auto mode = point.mode == ReconstructionMode::center
                                  ? povm::BinOperatorMode::center
                                  : povm::BinOperatorMode::integral;
            return mle::LikelihoodModel::from_bin_operators(povm::build_bin_operator_set(
                histograms, mode, dataset.truncation, dataset.eta, cache));
        }();
        const auto result = mle::reconstruct(model, config.mle);
        const auto t1 = std::chrono::steady_clock::now();
        row.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
        row.fidelity = fock::fidelity(result.rho_hat, rho_reference);
        row.nbar_estimate = binning::estimate_mean_photon(dataset);
        row.iterations_rpr = result.iterations_rpr;
        row.iterations_rga = result.iterations_rga;
        row.final_gap = result.final_gap_bound;
        row.converged = result.converged;
    } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
    }
    return row;
}

}  // namespace detail

// One tomography run at one sweep point. The dataset seed depends only on
// (master_seed, repetition), so all sweep points of a repetition see the
// same data, as in the reference experiments.
inline RunRow run_single(const ExperimentConfig& config, const SweepPoint& point, int repetition,
                         int sweep_index = 0) {
    const auto schedule = sampling::PhaseSchedule::from_total(config.phases, config.samples);
    const auto prepared = states::prepare_state(config.state);
    const std::uint64_t seed =
        rng::derive_seed(config.master_seed, static_cast<std::uint64_t>(repetition));
    const auto dataset = sampling::generate_dataset(config.state, schedule, config.eta, seed);
    return detail::run_single_impl(config, point, sweep_index, repetition, dataset, prepared.rho,
                                   prepared.truncation_leakage, nullptr);
}

inline SweepSummary summarize(const SweepPoint& point, const std::vector<RunRow>& rows) {
    SweepSummary s;
    s.point = point;
    s.n_runs = static_cast<int>(rows.size());
    std::vector<const RunRow*> good;
    for (const auto& row : rows) {
        if (row.failed) {
            ++s.n_failed;
            continue;
        }
        if (row.converged) good.push_back(&row);
    }
    s.n_converged = static_cast<int>(good.size());
    if (good.empty()) return s;
    for (const auto* row : good) {
        s.mean_fidelity += row->fidelity;
        s.mean_time_s += row->wall_time_s;
        s.mean_width += row->mean_width;
        s.mean_nbar += row->nbar_estimate;
    }
    const double n = double(good.size());
    s.mean_fidelity /= n;
    s.mean_time_s /= n;
    s.mean_width /= n;
    s.mean_nbar /= n;
    if (good.size() > 1) {
        double ss = 0.0;
        for (const auto* row : good)
            ss += (row->fidelity - s.mean_fidelity) * (row->fidelity - s.mean_fidelity);
        s.std_fidelity = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

inline ExperimentReport run_sweep(const ExperimentConfig& config) {
    if (config.repetitions < 1) throw std::invalid_argument("run_sweep: repetitions must be >= 1");
    if (config.sweep.empty()) throw std::invalid_argument("run_sweep: empty sweep");
    const auto schedule = sampling::PhaseSchedule::from_total(config.phases, config.samples);
    const auto prepared = states::prepare_state(config.state);

    // Datasets are shared across sweep points of a repetition.
    std::vector<sampling::QuadratureDataset> datasets(config.repetitions);
    parallel_for(config.repetitions, config.threads, [&](std::size_t rep) {
        const std::uint64_t seed =
            rng::derive_seed(config.master_seed, static_cast<std::uint64_t>(rep));
        datasets[rep] = sampling::generate_dataset(config.state, schedule, config.eta, seed);
    });

    povm::OperatorCache cache;
    const std::size_t n_points = config.sweep.size();
    std::vector<RunRow> rows(n_points * config.repetitions);
    parallel_for(rows.size(), config.threads, [&](std::size_t flat) {
        const int point_index = static_cast<int>(flat / config.repetitions);
        const int rep = static_cast<int>(flat % config.repetitions);
        rows[flat] = detail::run_single_impl(config, config.sweep[point_index], point_index, rep,
                                             datasets[rep], prepared.rho,
                                             prepared.truncation_leakage, &cache);
    });

    ExperimentReport report;
    report.config = config;
    report.rows = std::move(rows);
    for (std::size_t i = 0; i < n_points; ++i) {
        std::vector<RunRow> point_rows(report.rows.begin() + i * config.repetitions,
                                       report.rows.begin() + (i + 1) * config.repetitions);
        report.summaries.push_back(summarize(config.sweep[i], point_rows));
    }
    return report;
}

inline void write_summary_csv(const ExperimentReport& report, std::ostream& os) {
    os << "strategy,mode,width,mean_fidelity,std_fidelity,mean_time_s,mean_nbar\n";
    char line[300];
    for (const auto& s : report.summaries) {
        std::snprintf(line, sizeof line, "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      s.point.strategy_label().c_str(), mode_label(s.point.mode).c_str(),
                      s.mean_width, s.mean_fidelity, s.std_fidelity, s.mean_time_s, s.mean_nbar);
        os << line;
    }
}

inline void write_runs_csv(const ExperimentReport& report, std::ostream& os) {
    os << "sweep_index,strategy,mode,repetition,seed,width,fidelity,nbar,time_s,"
          "iterations_rpr,iterations_rga,gap,converged,failed,truncation_leakage\n";
    char line[440];
    for (const auto& r : report.rows) {
        std::snprintf(line, sizeof line,
                      "%d,%s,%s,%d,%llu,%.17g,%.17g,%.17g,%.17g,%d,%d,%.17g,%d,%d,%.17g\n",
                      r.sweep_index, r.strategy.c_str(), r.mode.c_str(), r.repetition,
                      static_cast<unsigned long long>(r.seed), r.mean_width, r.fidelity,
                      r.nbar_estimate, r.wall_time_s, r.iterations_rpr, r.iterations_rga,
                      r.final_gap, r.converged ? 1 : 0, r.failed ? 1 : 0, r.truncation_leakage);
        os << line;
    }
}

namespace detail {

// Minimal static plot: mean fidelity vs bin width with error bars, one
// series per operator mode; the raw-data mean is a dashed reference line.
inline void write_fidelity_svg(const ExperimentReport& report, std::ostream& os) {
    const int w = 840, h = 560, ml = 80, mr = 30, mt = 40, mb = 70;
    struct Pt { double x, y, e; };
    std::map<std::string, std::vector<Pt>> series;
    std::optional<double> raw_mean;
    double xmax = 0.0, ymin = 1.0, ymax = 0.0;
    for (const auto& s : report.summaries) {
        if (s.n_converged == 0) continue;
        if (s.point.mode == ReconstructionMode::raw) {
            raw_mean = s.mean_fidelity;
            ymin = std::min(ymin, s.mean_fidelity);
            ymax = std::max(ymax, s.mean_fidelity);
            continue;
        }
        series[mode_label(s.point.mode)].push_back({s.mean_width, s.mean_fidelity, s.std_fidelity});
        xmax = std::max(xmax, s.mean_width);
        ymin = std::min(ymin, s.mean_fidelity - s.std_fidelity);
        ymax = std::max(ymax, s.mean_fidelity + s.std_fidelity);
    }
    if (xmax <= 0.0) xmax = 1.0;
    const double ypad = std::max(1e-4, 0.08 * (ymax - ymin));
    ymin -= ypad;
    ymax += ypad;
    xmax *= 1.08;
    auto px = [&](double x) { return ml + x / xmax * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };
    char buf[512];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n"
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
                  ml, h - mb, w - mr, h - mb, ml, mt, ml, h - mb);
    os << buf;
    for (int i = 0; i <= 5; ++i) {
        const double xv = xmax * i / 5.0, yv = ymin + (ymax - ymin) * i / 5.0;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"black\"/>\n"
                      "<text x=\"%.1f\" y=\"%d\" font-size=\"13\" text-anchor=\"middle\">%.2f</text>\n",
                      px(xv), h - mb, px(xv), h - mb + 6, px(xv), h - mb + 22, xv);
        os << buf;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"black\"/>\n"
                      "<text x=\"%d\" y=\"%.1f\" font-size=\"13\" text-anchor=\"end\">%.4f</text>\n",
                      ml - 6, py(yv), ml, py(yv), ml - 10, py(yv) + 4, yv);
        os << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%d\" y=\"%d\" font-size=\"15\" text-anchor=\"middle\">bin width</text>\n"
                  "<text x=\"18\" y=\"%d\" font-size=\"15\" text-anchor=\"middle\" "
                  "transform=\"rotate(-90 18 %d)\">mean fidelity</text>\n"
                  "<text x=\"%d\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">%s</text>\n",
                  (ml + w - mr) / 2, h - 18, (mt + h - mb) / 2, (mt + h - mb) / 2,
                  (ml + w - mr) / 2, report.config.state.label().c_str());
    os << buf;
    if (raw_mean) {
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"gray\" "
                      "stroke-dasharray=\"6 4\"/>\n"
                      "<text x=\"%d\" y=\"%.1f\" font-size=\"12\" fill=\"gray\">raw</text>\n",
                      ml, py(*raw_mean), w - mr, py(*raw_mean), w - mr - 34, py(*raw_mean) - 6);
        os << buf;
    }
    const std::map<std::string, std::string> colors{{"center", "#d62728"}, {"integral", "#1f77b4"}};
    int legend_y = mt + 10;
    for (auto& [name, pts] : series) {
        std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.x < b.x; });
        const std::string color = colors.count(name) ? colors.at(name) : "#2ca02c";
        std::string path;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s%.2f %.2f", i ? " L" : "M", px(pts[i].x), py(pts[i].y));
            path += buf;
        }
        if (pts.size() > 1) {
            std::snprintf(buf, sizeof buf, "<path d=\"%s\" fill=\"none\" stroke=\"%s\"/>\n",
                          path.c_str(), color.c_str());
            os << buf;
        }
        for (const auto& p : pts) {
            std::snprintf(buf, sizeof buf,
                          "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\"/>\n"
                          "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3.5\" fill=\"%s\"/>\n",
                          px(p.x), py(p.y - p.e), px(p.x), py(p.y + p.e), color.c_str(), px(p.x),
                          py(p.y), color.c_str());
            os << buf;
        }
        std::snprintf(buf, sizeof buf,
                      "<circle cx=\"%d\" cy=\"%d\" r=\"4\" fill=\"%s\"/>"
                      "<text x=\"%d\" y=\"%d\" font-size=\"13\">%s</text>\n",
                      w - mr - 120, legend_y, color.c_str(), w - mr - 108, legend_y + 4,
                      name.c_str());
        os << buf;
        legend_y += 20;
    }
    os << "</svg>\n";
}

}  // namespace detail

// Writes summary.csv, runs.csv and plot.svg under `path` (created if needed).
inline void emit_report(const ExperimentReport& report, const std::string& path) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw std::runtime_error("emit_report: cannot create directory " + path);
    auto open = [&](const char* name) {
        std::ofstream os(fs::path(path) / name);
        if (!os) throw std::runtime_error(std::string("emit_report: cannot write ") + name);
        return os;
    };
    auto summary = open("summary.csv");
    write_summary_csv(report, summary);
    auto runs = open("runs.csv");
    write_runs_csv(report, runs);
    auto plot = open("plot.svg");
    detail::write_fidelity_svg(report, plot);
}

// --- JSON configuration (schema_version 1) ---

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
        throw std::invalid_argument("config: schema_version must be 1");
    ExperimentConfig config;
    const auto& state = j.at("state");
    const std::string kind = state.at("kind").get<std::string>();
    if (kind == "cat") {
        config.state.kind = states::StateKind::cat;
        config.state.alpha = state.at("alpha").get<double>();
    } else if (kind == "squeezed_vacuum") {
        config.state.kind = states::StateKind::squeezed_vacuum;
        config.state.variance_ratio = state.at("variance_ratio").get<double>();
    } else if (kind == "fock") {
        config.state.kind = states::StateKind::fock;
        config.state.fock_n = state.at("n").get<int>();
    } else {
        throw std::invalid_argument("config: unknown state kind: " + kind);
    }
    config.state.truncation = j.at("truncation").get<int>();
    config.state.loss_transmissivity = j.value("loss_transmissivity", 0.95);
    config.phases = j.value("phases", 20);
    config.samples = j.value("samples", 20000L);
    config.eta = j.value("eta", 0.9);
    config.repetitions = j.value("repetitions", 100);
    config.master_seed = j.value("master_seed", std::uint64_t{1});
    config.output_path = j.value("output_path", std::string("out"));
    config.threads = j.value("threads", 0);
    if (j.contains("mle")) {
        const auto& m = j.at("mle");
        config.mle.rpr_iterations = m.value("rpr_iterations", -1);
        config.mle.stop_gap = m.value("stop_gap", 0.2);
        config.mle.trust_radius_init = m.value("trust_radius_init", 1e-4);
        config.mle.trust_grow = m.value("trust_grow", 2.0);
        config.mle.trust_shrink = m.value("trust_shrink", 0.5);
        config.mle.max_iterations = m.value("max_iterations", 5000);
        config.mle.prob_floor = m.value("prob_floor", 1e-12);
    }
    for (const auto& p : j.at("sweep")) {
        SweepPoint point;
        point.mode = parse_mode(p.at("mode").get<std::string>());
        if (point.mode != ReconstructionMode::raw)
            point.strategy = parse_strategy_token(p.at("strategy").get<std::string>());
        config.sweep.push_back(point);
    }
    return config;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_config: cannot open " + path);
    nlohmann::json j;
    is >> j;
    return config_from_json(j);
}

}  // namespace tomo::experiment
