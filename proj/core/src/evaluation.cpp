#include "pclv/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "pclv/error.hpp"
#include "pclv/rng.hpp"

namespace pclv {

FoldPlan kfold(const std::vector<CustomerId>& customers, int k, std::uint64_t seed) {
    if (k < 2) throw Error("kfold requires k >= 2");
    if (customers.size() < static_cast<std::size_t>(k)) {
        throw Error("kfold requires at least k customers (k=" + std::to_string(k) + ", customers=" +
                    std::to_string(customers.size()) + ")");
    }
    std::vector<CustomerId> shuffled(customers);
    std::sort(shuffled.begin(), shuffled.end());
    Rng rng(seed);
    rng.shuffle(shuffled);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    const std::size_t n = shuffled.size();
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t remainder = n % static_cast<std::size_t>(k);
    std::size_t cursor = 0;
    for (int fold = 0; fold < k; ++fold) {
        const std::size_t size = base + (static_cast<std::size_t>(fold) < remainder ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i) {
            plan.assignments[shuffled[cursor++]] = fold;
        }
    }
    return plan;
}

std::vector<int> FoldPlan::fold_of(const std::vector<CustomerId>& customers) const {
    std::vector<int> out(customers.size());
    for (std::size_t i = 0; i < customers.size(); ++i) {
        const auto it = assignments.find(customers[i]);
        if (it == assignments.end()) {
            throw Error("customer " + std::to_string(customers[i]) + " missing from fold plan");
        }
        out[i] = it->second;
    }
    return out;
}

double pr_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size()) throw Error("pr_auc: labels/scores length mismatch");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (positives == 0 || positives == labels.size()) {
        throw Error("pr_auc requires at least one positive and one negative label");
    }

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    double recall_prev = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        // One block per distinct score value; ties enter together.
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            tp += static_cast<std::size_t>(labels[order[j]] == 1);
            ++seen;
            ++j;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(positives);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j;
    }
    return ap;
}

ConfusionMetrics confusion_metrics(const std::vector<int>& labels, const std::vector<double>& probabilities,
                                   double threshold) {
    if (labels.size() != probabilities.size()) throw Error("confusion_metrics: length mismatch");
    if (labels.empty()) throw Error("confusion_metrics: empty input");
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error("confusion_metrics: threshold must be in (0, 1)");

    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = probabilities[i] >= threshold;
        if (labels[i] == 1) {
            predicted ? ++tp : ++fn;
        } else {
            predicted ? ++fp : ++tn;
        }
    }

    const auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };

    ConfusionMetrics m;
    m.accuracy = ratio(tp + tn, tp + tn + fp + fn);
    m.sensitivity = ratio(tp, tp + fn);
    m.specificity = ratio(tn, tn + fp);
    m.precision = ratio(tp, tp + fp);
    return m;
}

namespace {

void check_lengths(const std::vector<double>& targets, const std::vector<double>& predictions) {
    if (targets.size() != predictions.size()) {
        throw Error("targets/predictions length mismatch (" + std::to_string(targets.size()) + " vs " +
                    std::to_string(predictions.size()) + ")");
    }
    if (targets.empty()) throw Error("empty targets");
}

}  // namespace

double rmse(const std::vector<double>& targets, const std::vector<double>& predictions) {
    check_lengths(targets, predictions);
    double sq = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double e = predictions[i] - targets[i];
        sq += e * e;
    }
    return std::sqrt(sq / static_cast<double>(targets.size()));
}

double mae(const std::vector<double>& targets, const std::vector<double>& predictions) {
    check_lengths(targets, predictions);
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        abs_sum += std::abs(predictions[i] - targets[i]);
    }
    return abs_sum / static_cast<double>(targets.size());
}

double r_squared(const std::vector<double>& targets, const std::vector<double>& predictions) {
    check_lengths(targets, predictions);
    const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ss_res += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
        ss_tot += (targets[i] - mean) * (targets[i] - mean);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

std::string metric_name(Metric metric) {
    switch (metric) {
        case Metric::PrAuc: return "pr_auc";
        case Metric::Accuracy: return "accuracy";
        case Metric::Sensitivity: return "sensitivity";
        case Metric::Specificity: return "specificity";
        case Metric::Precision: return "precision";
        case Metric::Rmse: return "rmse";
        case Metric::Mae: return "mae";
        case Metric::RSquared: return "r_squared";
    }
    throw Error("unreachable metric");
}

void MetricReport::save_json(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["folds"] = k;
    for (const auto& [metric, summary] : metrics) {
        nlohmann::json entry;
        nlohmann::json per_fold = nlohmann::json::array();
        for (const auto& v : summary.per_fold) {
            if (v) {
                per_fold.push_back(*v);
            } else {
                per_fold.push_back(nullptr);
            }
        }
        entry["per_fold"] = std::move(per_fold);
        if (summary.mean) entry["mean"] = *summary.mean;
        if (summary.sd) entry["sd"] = *summary.sd;
        entry["any_fold_absent"] = summary.any_absent;
        j["metrics"][metric_name(metric)] = std::move(entry);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failure on " + path.string());
}

namespace {

void summarize(MetricSummary& summary) {
    std::vector<double> present;
    for (const auto& v : summary.per_fold) {
        if (v) {
            present.push_back(*v);
        } else {
            summary.any_absent = true;
        }
    }
    if (present.empty()) return;
    const double mean = std::accumulate(present.begin(), present.end(), 0.0) / static_cast<double>(present.size());
    summary.mean = mean;
    if (present.size() > 1) {
        double sq = 0.0;
        for (double v : present) sq += (v - mean) * (v - mean);
        summary.sd = std::sqrt(sq / static_cast<double>(present.size() - 1));
    }
}

}  // namespace

MetricReport cross_validate(const CvDataset& dataset, const CvRecipe& recipe, const FoldPlan& plan,
                            const std::vector<Metric>& metrics, double threshold) {
    const std::size_t n = dataset.customers.size();
    if (dataset.features.rows != n || dataset.targets.size() != n) {
        throw Error("cross_validate: dataset rows, targets, and customers must align");
    }
    const auto folds = plan.fold_of(dataset.customers);

    MetricReport report;
    report.k = plan.k;
    report.oof_predictions.assign(n, 0.0);
    for (const auto metric : metrics) {
        report.metrics[metric].per_fold.assign(static_cast<std::size_t>(plan.k), std::nullopt);
    }

    for (int fold = 0; fold < plan.k; ++fold) {
        std::vector<std::size_t> train_rows, val_rows;
        for (std::size_t i = 0; i < n; ++i) {
            (folds[i] == fold ? val_rows : train_rows).push_back(i);
        }
        if (train_rows.empty() || val_rows.empty()) {
            throw Error("cross_validate: fold " + std::to_string(fold) + " leaves an empty split");
        }

        const Matrix train_x = dataset.features.select_rows(train_rows);
        std::vector<double> train_y(train_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) train_y[i] = dataset.targets[train_rows[i]];

        // Validation rows are copied verbatim from the raw dataset; nothing
        // fitted on the training split ever rewrites them.
        const Matrix val_x = dataset.features.select_rows(val_rows);
        std::vector<double> val_y(val_rows.size());
        for (std::size_t i = 0; i < val_rows.size(); ++i) val_y[i] = dataset.targets[val_rows[i]];

        const auto scorer = recipe.fit(train_x, train_y, fold);
        const auto predictions = scorer(val_x);
        if (predictions.size() != val_rows.size()) {
            throw Error("cross_validate: scorer returned wrong number of predictions");
        }
        for (std::size_t i = 0; i < val_rows.size(); ++i) {
            report.oof_predictions[val_rows[i]] = predictions[i];
        }

        std::vector<int> labels;
        if (dataset.classification) {
            labels.resize(val_y.size());
            for (std::size_t i = 0; i < val_y.size(); ++i) labels[i] = val_y[i] != 0.0 ? 1 : 0;
        }

        for (const auto metric : metrics) {
            auto& slot = report.metrics[metric].per_fold[static_cast<std::size_t>(fold)];
            switch (metric) {
                case Metric::PrAuc: {
                    const auto pos = std::count(labels.begin(), labels.end(), 1);
                    if (pos == 0 || static_cast<std::size_t>(pos) == labels.size()) {
                        slot = std::nullopt;  // single-class fold, flagged in summary
                    } else {
                        slot = pr_auc(labels, predictions);
                    }
                    break;
                }
                case Metric::Accuracy:
                case Metric::Sensitivity:
                case Metric::Specificity:
                case Metric::Precision: {
                    const auto cm = confusion_metrics(labels, predictions, threshold);
                    if (metric == Metric::Accuracy) slot = cm.accuracy;
                    if (metric == Metric::Sensitivity) slot = cm.sensitivity;
                    if (metric == Metric::Specificity) slot = cm.specificity;
                    if (metric == Metric::Precision) slot = cm.precision;
                    break;
                }
                case Metric::Rmse:
                    slot = rmse(val_y, predictions);
                    break;
                case Metric::Mae:
                    slot = mae(val_y, predictions);
                    break;
                case Metric::RSquared:
                    slot = r_squared(val_y, predictions);
                    break;
            }
        }
    }

    for (auto& [metric, summary] : report.metrics) summarize(summary);
    return report;
}

}  // namespace pclv
