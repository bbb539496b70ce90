#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pclv/matrix.hpp"

namespace pclv::gbt {

enum class Objective {
    SquaredError,  // g = yhat - y, h = 1
    Logistic,      // p = sigmoid(margin), g = p - y, h = p(1-p)
};

struct GbtParams {
    double eta = 0.1;
    int max_depth = 6;
    double min_child_weight = 1.0;  // min hessian sum per leaf
    double lambda = 1.0;            // L2 leaf regularization
    double gamma = 0.0;             // min split gain
    double subsample = 1.0;         // row fraction per round
    double colsample = 1.0;         // feature fraction per tree
    int n_rounds = 200;
    /// Initial margin. Defaults to the target mean (regression) or the
    /// log-odds of prevalence (classification) when unset.
    std::optional<double> base_score;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Flat node layout; index 0 is the root. Split nodes route x[feature] < threshold
/// to `left` (NaN goes to the `missing_left` side, which this pipeline fixes
/// to true and serializes for format completeness).
struct TreeNode {
    bool is_leaf = true;
    double weight = 0.0;  // leaf only
    int feature = -1;
    double threshold = 0.0;
    bool missing_left = true;
    int left = -1;
    int right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double score(std::span<const double> features) const;
    int depth() const;
};

struct GbtModel {
    Objective objective = Objective::SquaredError;
    double base_score = 0.0;
    double eta = 0.1;
    std::size_t n_features = 0;
    std::vector<Tree> trees;

    /// Raw margins: base_score + eta * sum of leaf outputs.
    std::vector<double> predict_margin(const Matrix& features) const;
    /// Margin through the sigmoid; only meaningful for Logistic models.
    std::vector<double> predict_proba(const Matrix& features) const;
    /// Margin using only the first `n_trees` trees (diagnostics).
    std::vector<double> predict_margin_partial(const Matrix& features, std::size_t n_trees) const;
};

struct TrainInfo {
    /// Training RMSE after each round (squared-error objective only).
    std::vector<double> round_rmse;
};

/// Fits a gradient-boosted ensemble with exact greedy second-order split
/// search. Deterministic: fixed seed plus feature-ordered reductions make the
/// model independent of thread count. Targets must be 0/1 for Logistic.
GbtModel train(const Matrix& features, const std::vector<double>& targets, const GbtParams& params,
               Objective objective, TrainInfo* info = nullptr);

/// JSON model file, schema version 1. load(save(m)) predicts bit-identically.
void save_model(const GbtModel& model, const std::filesystem::path& path);
GbtModel load_model(const std::filesystem::path& path);

double sigmoid(double x);

}  // namespace pclv::gbt
