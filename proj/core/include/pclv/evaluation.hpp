#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pclv/domain.hpp"
#include "pclv/matrix.hpp"

namespace pclv {

/// Customer-level fold assignment: folds partition the customer set and
/// sizes differ by at most one.
struct FoldPlan {
    int k = 10;
    std::uint64_t seed = 0;
    std::map<CustomerId, int> assignments;

    std::vector<int> fold_of(const std::vector<CustomerId>& customers) const;
};

FoldPlan kfold(const std::vector<CustomerId>& customers, int k, std::uint64_t seed);

/// Average precision with tied scores grouped into one block.
/// Requires at least one positive and one negative label.
double pr_auc(const std::vector<int>& labels, const std::vector<double>& scores);

struct ConfusionMetrics {
    std::optional<double> accuracy;
    std::optional<double> sensitivity;  // recall
    std::optional<double> specificity;
    std::optional<double> precision;
};

/// Thresholds probabilities at `threshold` (>= means positive). Ratios with a
/// zero denominator come back absent rather than zero.
ConfusionMetrics confusion_metrics(const std::vector<int>& labels, const std::vector<double>& probabilities,
                                   double threshold = 0.5);

double rmse(const std::vector<double>& targets, const std::vector<double>& predictions);
double mae(const std::vector<double>& targets, const std::vector<double>& predictions);
/// 1 - SS_res / SS_tot around the target mean.
double r_squared(const std::vector<double>& targets, const std::vector<double>& predictions);

enum class Metric {
    PrAuc,
    Accuracy,
    Sensitivity,
    Specificity,
    Precision,
    Rmse,
    Mae,
    RSquared,
};

std::string metric_name(Metric metric);

struct MetricSummary {
    std::vector<std::optional<double>> per_fold;
    std::optional<double> mean;  // over present folds
    std::optional<double> sd;    // sample sd over present folds
    bool any_absent = false;
};

struct MetricReport {
    int k = 0;
    std::map<Metric, MetricSummary> metrics;
    /// Out-of-fold predictions aligned with the dataset rows (scores for
    /// classification, predicted values for regression).
    std::vector<double> oof_predictions;

    void save_json(const std::filesystem::path& path) const;
};

/// One dataset row per customer. Classification targets are 0/1.
struct CvDataset {
    std::vector<CustomerId> customers;
    Matrix features;
    std::vector<double> targets;
    bool classification = false;
};

/// A recipe owns everything fitted: standardization, resampling, learner.
/// fit() sees the training split only; validation rows are scored raw, so
/// no resampling or statistic can leak across the fold boundary.
struct CvRecipe {
    using Scorer = std::function<std::vector<double>(const Matrix&)>;
    std::function<Scorer(const Matrix& train_features, const std::vector<double>& train_targets, int fold)> fit;
};

/// Runs the fold plan in fold-index order. A fold whose validation split has
/// a single class is reported absent for PR-AUC and flagged in the summary.
MetricReport cross_validate(const CvDataset& dataset, const CvRecipe& recipe, const FoldPlan& plan,
                            const std::vector<Metric>& metrics, double threshold = 0.5);

}  // namespace pclv
