#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "pclv/boosting.hpp"
#include "pclv/datagen.hpp"
#include "pclv/evaluation.hpp"
#include "pclv/features.hpp"
#include "pclv/resampling.hpp"
#include "pclv/segmentation.hpp"
#include "pclv/valuation.hpp"

namespace pclv {

struct HpoBudget {
    bool enabled = true;
    int n_init = 10;
    int n_iter = 40;
};

/// One JSON config drives every command; a single global seed derives all
/// module seeds through fixed offsets so that, e.g., changing the fold seed
/// never perturbs data generation.
struct PipelineConfig {
    std::filesystem::path data_dir = "data";
    std::filesystem::path model_dir = "models";
    std::filesystem::path report_dir = "reports";

    MarketConfig market;
    bool market_seed_explicit = false;  // config supplied market.seed directly
    FeatureSpec features;
    ResampleConfig resample;
    gbt::GbtParams churn_params;
    gbt::GbtParams pcm_params;
    HpoBudget hpo;
    DiscountRate discount;
    int folds = 10;
    std::uint64_t seed = 42;
    int threads = 0;  // 0 keeps the library default

    void validate() const;
    static PipelineConfig load(const std::filesystem::path& path);

    // Seed offsets per module.
    enum : std::uint64_t {
        kSeedOffsetMarket = 1,
        kSeedOffsetFolds = 2,
        kSeedOffsetResample = 3,
        kSeedOffsetChurnGbt = 4,
        kSeedOffsetPcmGbt = 5,
        kSeedOffsetHpo = 6,
    };
    std::uint64_t market_seed() const;
    std::uint64_t fold_seed() const { return seed + kSeedOffsetFolds; }
    std::uint64_t resample_seed() const { return seed + kSeedOffsetResample; }
    std::uint64_t churn_gbt_seed() const { return seed + kSeedOffsetChurnGbt; }
    std::uint64_t pcm_gbt_seed() const { return seed + kSeedOffsetPcmGbt; }
    std::uint64_t hpo_seed() const { return seed + kSeedOffsetHpo; }
};

/// Applies the --threads cap (no-op at 0). Results never depend on it.
void set_worker_threads(int threads);

/// PCLV_LOG=quiet silences progress lines; anything else keeps them.
bool logging_enabled();
void log_line(const std::string& message);

struct GenResult {
    FileManifest manifest;
};

GenResult run_gen(const PipelineConfig& config);

enum class TrainTask { Churn, Pcm };

struct TrainResult {
    MetricReport metrics;
    gbt::GbtParams used_params;
    std::filesystem::path model_path;
    std::filesystem::path metrics_path;
    std::optional<std::filesystem::path> hpo_history_path;
};

/// churn: RFM features at the last labeled month, leakage-safe
/// balance-inside-folds, logistic GBT, PR-AUC/accuracy/sensitivity/
/// specificity. pcm: final-month snapshot regression with RMSE/MAE/R^2.
/// Metrics are out-of-fold; the shipped model is refit on all rows.
TrainResult run_train(const PipelineConfig& config, TrainTask task, bool skip_hpo);

struct ScoreResult {
    std::filesystem::path valuation_path;
    std::size_t customers = 0;
};

ScoreResult run_score(const PipelineConfig& config);

struct ReportResult {
    MigrationReport report;
    std::filesystem::path report_csv;
    std::filesystem::path report_json;
    std::filesystem::path targets_csv;
};

ReportResult run_report(const PipelineConfig& config);

}  // namespace pclv
