// Command-line front end: dataset simulation, reconstruction, mean-photon
// estimation, and full benchmark sweeps driven by a JSON config.
//
// Exit codes: 0 success, 2 if any reconstruction failed to converge,
// 1 on input or runtime errors.

#include "tomo/tomo.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace tomo;

states::StateSpec make_state_spec(const std::string& kind, double alpha, double ratio, int fock_n,
                                  int truncation, double tau) {
    states::StateSpec spec;
    if (kind == "cat") {
        spec.kind = states::StateKind::cat;
        spec.alpha = alpha;
    } else if (kind == "squeezed") {
        spec.kind = states::StateKind::squeezed_vacuum;
        spec.variance_ratio = ratio;
    } else if (kind == "fock") {
        spec.kind = states::StateKind::fock;
        spec.fock_n = fock_n;
    } else {
        throw CLI::ValidationError("--state must be cat, squeezed or fock");
    }
    spec.truncation = truncation;
    spec.loss_transmissivity = tau;
    return spec;
}

int cmd_sample(const std::string& kind, double alpha, double ratio, int fock_n, int truncation,
               double tau, double eta, int phases, long samples, std::uint64_t seed,
               const std::string& out) {
    const auto spec = make_state_spec(kind, alpha, ratio, fock_n, truncation, tau);
    const auto schedule = sampling::PhaseSchedule::from_total(phases, samples);
    const auto dataset = sampling::generate_dataset(spec, schedule, eta, seed);
    if (out.empty() || out == "-") {
        sampling::write_dataset_csv(dataset, std::cout);
    } else {
        sampling::write_dataset_csv(dataset, out);
        std::cerr << "wrote " << dataset.size() << " samples to " << out << "\n";
    }
    return 0;
}

int cmd_estimate_nbar(const std::string& data_path) {
    const auto dataset = sampling::read_dataset_csv(data_path, 0, 1.0);
    std::printf("%.10g\n", binning::estimate_mean_photon(dataset));
    return 0;
}

int cmd_reconstruct(const std::string& data_path, const std::string& mode_token,
                    const std::string& strategy_token, int truncation, double eta,
                    const mle::MLEConfig& mle_config, const std::string& out,
                    const std::string& histogram_path) {
    const auto mode = experiment::parse_mode(mode_token);
    auto dataset = sampling::read_dataset_csv(data_path, truncation, eta);

    mle::LikelihoodModel model = [&] {
        if (mode == experiment::ReconstructionMode::raw)
            return mle::LikelihoodModel::from_raw_data(dataset);
        const auto strategy = experiment::parse_strategy_token(strategy_token);
        const auto histograms = binning::build_histograms(dataset, strategy);
        if (!histogram_path.empty()) binning::write_histograms_csv(histograms, histogram_path);
        const auto op_mode = mode == experiment::ReconstructionMode::center
                                 ? povm::BinOperatorMode::center
                                 : povm::BinOperatorMode::integral;
        return mle::LikelihoodModel::from_bin_operators(
            povm::build_bin_operator_set(histograms, op_mode, truncation, eta));
    }();

    const auto result = mle::reconstruct(model, mle_config);
    std::fprintf(stderr,
                 "log_likelihood=%.6f gap=%.4g iterations=%d+%d time=%.3fs converged=%s\n",
                 result.final_log_likelihood, result.final_gap_bound, result.iterations_rpr,
                 result.iterations_rga, result.wall_time_s, result.converged ? "yes" : "no");
    if (out.empty() || out == "-") {
        mle::write_density_matrix_csv(result.rho_hat, std::cout);
    } else {
        std::ofstream os(out);
        if (!os) throw std::runtime_error("cannot open " + out);
        mle::write_density_matrix_csv(result.rho_hat, os);
        std::ofstream meta(out + ".meta.json");
        mle::write_result_metadata(result, meta);
        std::cerr << "wrote " << out << " and " << out << ".meta.json\n";
    }
    return result.converged ? 0 : 2;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<int> reps, std::optional<std::string> out, std::optional<int> threads) {
    auto config = experiment::load_config(config_path);
    if (seed) config.master_seed = *seed;
    if (reps) config.repetitions = *reps;
    if (out) config.output_path = *out;
    if (threads) config.threads = *threads;

    const auto report = experiment::run_sweep(config);
    experiment::emit_report(report, config.output_path);

    if (!report.rows.empty() && report.rows.front().truncation_leakage > 1e-6)
        std::fprintf(stderr,
                     "warning: true-state truncation leakage %.3g exceeds 1e-6; "
                     "consider a larger truncation\n",
                     report.rows.front().truncation_leakage);

    int nonconverged = 0, failed = 0;
    for (const auto& row : report.rows) {
        if (row.failed) ++failed;
        else if (!row.converged) ++nonconverged;
    }
    std::printf("%-16s %-9s %11s %14s %13s %12s\n", "strategy", "mode", "width", "mean_fidelity",
                "std_fidelity", "mean_time_s");
    for (const auto& s : report.summaries)
        std::printf("%-16s %-9s %11.4g %14.6f %13.6f %12.4f\n", s.point.strategy_label().c_str(),
                    experiment::mode_label(s.point.mode).c_str(), s.mean_width, s.mean_fidelity,
                    s.std_fidelity, s.mean_time_s);
    std::printf("report written to %s (%zu runs, %d non-converged, %d failed)\n",
                config.output_path.c_str(), report.rows.size(), nonconverged, failed);
    if (failed > 0) return 1;
    return nonconverged > 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Homodyne tomography simulation and maximum-likelihood reconstruction"};
    app.require_subcommand(1);

    // --- sample ---
    auto* sample = app.add_subcommand("sample", "Simulate a homodyne dataset and write theta,x CSV");
    std::string state_kind = "cat", sample_out;
    double alpha = 1.0, ratio = 0.75, tau = 0.95, eta = 0.9;
    int fock_n = 0, truncation = 10, phases = 20;
    long n_samples = 20000;
    std::uint64_t seed = 1;
    sample->add_option("--state", state_kind, "State family: cat | squeezed | fock")
        ->default_val("cat");
    sample->add_option("--alpha", alpha, "Cat amplitude");
    sample->add_option("--ratio", ratio, "Squeezed-quadrature variance ratio in (0,1]");
    sample->add_option("--fock-n", fock_n, "Fock photon number");
    sample->add_option("--t", truncation, "Photon-number truncation");
    sample->add_option("--tau", tau, "Pre-measurement loss transmissivity");
    sample->add_option("--eta", eta, "Detection efficiency");
    sample->add_option("--m", phases, "Number of phases");
    sample->add_option("--samples", n_samples, "Total number of samples (multiple of m)");
    sample->add_option("--seed", seed, "RNG seed");
    sample->add_option("--out", sample_out, "Output CSV path ('-' for stdout)");

    // --- reconstruct ---
    auto* rec = app.add_subcommand("reconstruct", "Maximum-likelihood reconstruction from a CSV dataset");
    std::string data_path, rec_mode = "raw", rec_strategy = "scott", rec_out, histogram_path;
    mle::MLEConfig mle_config;
    rec->add_option("--data", data_path, "Input dataset CSV (theta,x)")->required();
    rec->add_option("--mode", rec_mode, "raw | center | integral")->default_val("raw");
    rec->add_option("--strategy", rec_strategy,
                    "fixed:<h> | scott | leonhardt:t | leonhardt:mean (binned modes)");
    rec->add_option("--t", truncation, "Photon-number truncation");
    rec->add_option("--eta", eta, "Detection efficiency assumed by the operators");
    rec->add_option("--stop-gap", mle_config.stop_gap, "Log-likelihood gap bound at which to stop");
    rec->add_option("--max-iterations", mle_config.max_iterations, "Iteration cap");
    rec->add_option("--out", rec_out, "Density matrix CSV output ('-' for stdout)");
    rec->add_option("--histograms", histogram_path, "Also write the histograms as CSV");

    // --- estimate-nbar ---
    auto* nbar = app.add_subcommand("estimate-nbar", "Mean photon number from quadrature data");
    nbar->add_option("--data", data_path, "Input dataset CSV (theta,x)")->required();

    // --- run ---
    auto* run = app.add_subcommand("run", "Run a benchmark sweep from a JSON config");
    std::string config_path;
    std::uint64_t run_seed = 0;
    int run_reps = 0, run_threads = 0;
    std::string run_out;
    run->add_option("--config", config_path, "Experiment config JSON")->required();
    auto* seed_opt = run->add_option("--seed", run_seed, "Override master seed");
    auto* reps_opt = run->add_option("--reps", run_reps, "Override repetition count");
    auto* out_opt = run->add_option("--out", run_out, "Override output directory");
    auto* threads_opt = run->add_option("--threads", run_threads, "Worker thread count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sample->parsed())
            return cmd_sample(state_kind, alpha, ratio, fock_n, truncation, tau, eta, phases,
                              n_samples, seed, sample_out);
        if (rec->parsed())
            return cmd_reconstruct(data_path, rec_mode, rec_strategy, truncation, eta, mle_config,
                                   rec_out, histogram_path);
        if (nbar->parsed()) return cmd_estimate_nbar(data_path);
        if (run->parsed())
            return cmd_run(config_path,
                           seed_opt->count() ? std::optional(run_seed) : std::nullopt,
                           reps_opt->count() ? std::optional(run_reps) : std::nullopt,
                           out_opt->count() ? std::optional(run_out) : std::nullopt,
                           threads_opt->count() ? std::optional(run_threads) : std::nullopt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
