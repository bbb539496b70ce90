#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pclv/domain.hpp"

namespace pclv {

struct MarketConfig {
    std::int64_t n_customers = 0;
    int horizon_months = 36;
    double churn_rate = 0.054;
    double ob_adoption = 0.0032;
    int n_competitors = 5;
    // Final-month margin distribution: lognormal solved from the target
    // median ($137.12) and mean ($554.70).
    double margin_log_mu = 4.9208;
    double margin_log_sigma = 1.6719;
    double noise_sd = 25.0;  // sd of the unlearnable margin residual, currency units
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    /// JSON with keys exactly the field names above.
    static MarketConfig from_json_file(const std::filesystem::path& path);
};

/// Ground-truth margin generator: margin = sum_c alpha_c * focal_c
/// + beta * ln(1 + sum_c system_c) + eps, eps ~ N(0, noise_sd).
struct TrueMarginFn {
    std::array<double, kPscCount> alpha{};
    double beta = 0.0;
    double noise_sd = 0.0;

    double signal(const std::array<double, kPscCount>& focal,
                  const std::array<double, kPscCount>& system) const;
};

struct GeneratedMarket {
    std::vector<TransactionRecord> transactions;
    std::vector<SystemExposure> system_exposure;
    std::vector<ObSnapshot> ob_snapshots;
    std::vector<std::uint8_t> true_churn;  // indexed by customer id 0..n-1
    TrueMarginFn true_margin_fn;
    MarketConfig config;
};

/// Generates a market calibrated to the configured statistics. Output is a
/// pure function of the config; every draw comes from one seeded stream.
///
/// Planted structure:
///  - customers active at the final month carry a margin drawn lognormal
///    (margin_log_mu, margin_log_sigma); their exposures are solved backward
///    from that margin through TrueMarginFn, so a regressor can recover it;
///  - churners show declining recency/frequency before ceasing all activity
///    for the last 6 months of the horizon; churn itself is drawn from a
///    logistic model on the realized activity trend, with the intercept
///    calibrated so the expected churn fraction equals churn_rate;
///  - an ob_adoption fraction of customers, chosen uniformly, receives
///    competitor snapshots drawn from the same exposure family.
GeneratedMarket generate_market(const MarketConfig& config);

struct FileManifest {
    struct Entry {
        std::string name;
        std::filesystem::path path;
        std::size_t rows = 0;       // data rows (CSV) or 0 for JSON
        std::uint64_t checksum = 0; // FNV-1a 64 of the file bytes
    };
    std::vector<Entry> entries;
};

/// Writes transactions.csv, system_exposure.csv, ob_snapshot.csv, labels.csv,
/// and truth.json (coefficient table plus config echo) into `directory`.
FileManifest write_market(const GeneratedMarket& market, const std::filesystem::path& directory);

std::vector<std::pair<CustomerId, bool>> load_labels(const std::filesystem::path& path);

/// Solves (log_mu, log_sigma) of a lognormal from its median and mean.
/// Used to pin the config defaults against the published statistics.
std::pair<double, double> lognormal_from_median_mean(double median, double mean);

}  // namespace pclv
