#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "feakm/cli.hpp"
#include "feakm/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"FeaKM pose-error rectification for collaborative perception"};
    app.require_subcommand(1);

    feakm::CliOptions opts;
    std::uint64_t seed = 0;
    int workers = 0;
    int k_pairs = 0;

    app.add_option("--config", opts.config_path, "Config file (dotted.key = value lines)");
    auto* seed_opt = app.add_option("--seed", seed, "Seed override");
    app.add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
    auto* workers_opt = app.add_option("--workers", workers, "Worker threads (0 = all cores)");
    auto* k_opt = app.add_option("--k-pairs", k_pairs, "Minimum matching pairs gate")
                      ->check(CLI::IsMember({4, 8}));
    app.add_flag("--no-correction", opts.no_correction, "Use reported poses, skip rectification");
    app.add_flag("--no-confidence-map", opts.no_confidence_map,
                 "Extract keypoints without confidence gating");
    app.add_flag("--no-multiscale", opts.no_multiscale, "Fuse at full resolution only");
    app.add_flag("--plot", opts.plot, "Emit an SVG chart next to the CSV");

    auto* simulate = app.add_subcommand("simulate", "Run one scene end-to-end");
    auto* sweep = app.add_subcommand("sweep", "Run the noise sweep and write sweep.csv");
    auto* match = app.add_subcommand("match", "Run a single agent pair through the matcher");
    auto* report = app.add_subcommand("report", "Summarize an existing sweep.csv");
    match->add_flag("--dump-assignment", opts.dump_assignment,
                    "Write the assignment matrix as CSV");

    CLI11_PARSE(app, argc, argv);

    if (!seed_opt->empty()) opts.seed = seed;
    if (!workers_opt->empty()) opts.workers = workers;
    if (!k_opt->empty()) opts.k_pairs = k_pairs;

    try {
        if (simulate->parsed()) return feakm::cmd_simulate(opts);
        if (sweep->parsed()) return feakm::cmd_sweep(opts);
        if (match->parsed()) return feakm::cmd_match(opts);
        if (report->parsed()) return feakm::cmd_report(opts);
    } catch (const feakm::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
