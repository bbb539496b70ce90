// pclv: synthetic Open Banking market generation, churn + margin model
// training, per-competitor potential-value scoring, and tercile migration
// reports, driven by one JSON config.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pclv/error.hpp"
#include "pclv/pipeline.hpp"

namespace {

struct GlobalOptions {
    std::string config_path;
    bool seed_set = false;
    std::uint64_t seed = 0;
    int threads = -1;
    bool skip_hpo = false;
};

pclv::PipelineConfig load_config(const GlobalOptions& opts) {
    auto config = pclv::PipelineConfig::load(opts.config_path);
    if (opts.seed_set) config.seed = opts.seed;
    if (opts.threads >= 0) config.threads = opts.threads;
    return config;
}

void print_manifest(const pclv::FileManifest& manifest) {
    for (const auto& entry : manifest.entries) {
        std::printf("%-16s %-40s rows=%-9zu checksum=%016llx\n", entry.name.c_str(),
                    entry.path.string().c_str(), entry.rows,
                    static_cast<unsigned long long>(entry.checksum));
    }
}

void print_metrics(const pclv::MetricReport& report) {
    for (const auto& [metric, summary] : report.metrics) {
        if (!summary.mean) {
            std::printf("%-12s absent in every fold\n", pclv::metric_name(metric).c_str());
            continue;
        }
        std::string line = "mean=" + std::to_string(*summary.mean);
        if (summary.sd) line += " sd=" + std::to_string(*summary.sd);
        if (summary.any_absent) line += " (some folds absent)";
        std::printf("%-12s %s\n", pclv::metric_name(metric).c_str(), line.c_str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Potential customer lifetime value pipeline"};
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "Pipeline config (JSON)")->required();
    app.add_option("--seed", opts.seed, "Override the global seed")
        ->each([&](const std::string&) { opts.seed_set = true; });
    app.add_option("--threads", opts.threads, "Cap worker threads (does not change results)");
    app.add_flag("--skip-hpo", opts.skip_hpo, "Use the config GbtParams verbatim; no tuning");

    auto* gen = app.add_subcommand("gen", "Generate a synthetic market into data_dir");
    auto* train = app.add_subcommand("train", "Train a model: churn or pcm");
    std::string task;
    train->add_option("task", task, "churn | pcm")->required()->check(CLI::IsMember({"churn", "pcm"}));
    auto* score = app.add_subcommand("score", "Score every customer into valuation.csv");
    auto* report = app.add_subcommand("report", "Tercile migration report from valuation.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto config = load_config(opts);
        if (gen->parsed()) {
            const auto result = pclv::run_gen(config);
            print_manifest(result.manifest);
        } else if (train->parsed()) {
            const auto which = task == "churn" ? pclv::TrainTask::Churn : pclv::TrainTask::Pcm;
            const auto result = pclv::run_train(config, which, opts.skip_hpo);
            std::printf("model: %s\n", result.model_path.string().c_str());
            std::printf("metrics: %s\n", result.metrics_path.string().c_str());
            if (result.hpo_history_path) {
                std::printf("hpo history: %s\n", result.hpo_history_path->string().c_str());
            }
            print_metrics(result.metrics);
        } else if (score->parsed()) {
            const auto result = pclv::run_score(config);
            std::printf("valuation: %s (%zu customers)\n", result.valuation_path.string().c_str(),
                        result.customers);
        } else if (report->parsed()) {
            const auto result = pclv::run_report(config);
            std::printf("report: %s\n", result.report_csv.string().c_str());
            std::printf("report json: %s\n", result.report_json.string().c_str());
            std::printf("targets: %s\n", result.targets_csv.string().c_str());
            const auto& up = result.report.upside;
            std::printf("upside: upward=%lld static=%lld downward=%lld cents, overall %.2f%%\n",
                        static_cast<long long>(up.upward_cents), static_cast<long long>(up.static_cents),
                        static_cast<long long>(up.downward_cents), up.overall_upside_pct);
        }
    } catch (const pclv::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
