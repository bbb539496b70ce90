#include "pclv/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "pclv/csv.hpp"
#include "pclv/error.hpp"

namespace pclv {

namespace {
constexpr double kTrendEpsilon = 1e-9;
}

void FeatureSpec::validate() const {
    if (windows.empty()) throw ConfigError("feature windows must be non-empty");
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (windows[i] < 1) throw ConfigError("feature windows must be >= 1");
        if (i > 0 && windows[i] <= windows[i - 1]) {
            throw ConfigError("feature windows must be strictly increasing");
        }
    }
    if (churn_horizon < 1) throw ConfigError("churn_horizon must be >= 1");
}

std::vector<std::string> FeatureSpec::feature_names() const {
    std::vector<std::string> names;
    names.push_back("recency");
    for (const int w : windows) names.push_back("frequency_" + std::to_string(w));
    for (const int w : windows) names.push_back("monetary_" + std::to_string(w));
    for (int c = 0; c < kPscCount; ++c) names.push_back("exposure_" + psc_name(static_cast<PscCode>(c)));
    names.push_back("trend");
    return names;
}

ChurnLabel label_churn(std::span<const TransactionRecord> ledger, MonthIndex obs_month, int horizon_months,
                       int dataset_horizon) {
    if (horizon_months < 1) throw Error("churn horizon must be >= 1");
    if (obs_month + horizon_months >= dataset_horizon) {
        throw Error("churn label needs " + std::to_string(horizon_months) + " months after month " +
                    std::to_string(obs_month) + " but the dataset horizon is " +
                    std::to_string(dataset_horizon));
    }
    for (const auto& rec : ledger) {
        if (rec.month > obs_month && rec.month <= obs_month + horizon_months &&
            (rec.credit_amount_cents != 0 || rec.contribution_margin_cents != 0)) {
            return {false};
        }
    }
    return {true};
}

std::vector<double> build_features(std::span<const TransactionRecord> ledger, MonthIndex obs_month,
                                   const FeatureSpec& spec) {
    spec.validate();
    if (obs_month < spec.max_window() - 1) {
        throw Error("observation month " + std::to_string(obs_month) + " precedes the largest window (" +
                    std::to_string(spec.max_window()) + " months)");
    }

    // Per-month totals over [0, obs_month]. Ledgers are per-customer (tens of
    // records), so the dense rollup is cheap.
    std::vector<MoneyCents> credit(static_cast<std::size_t>(obs_month) + 1, 0);
    std::vector<MoneyCents> margin(static_cast<std::size_t>(obs_month) + 1, 0);
    std::array<MoneyCents, kPscCount> exposure{};
    for (const auto& rec : ledger) {
        if (rec.month > obs_month || rec.month < 0) continue;
        credit[static_cast<std::size_t>(rec.month)] += rec.credit_amount_cents;
        margin[static_cast<std::size_t>(rec.month)] += rec.contribution_margin_cents;
        if (rec.month == obs_month) {
            exposure[static_cast<std::size_t>(rec.psc)] += rec.credit_amount_cents;
        }
    }
    const auto active = [&](MonthIndex m) {
        return credit[static_cast<std::size_t>(m)] != 0 || margin[static_cast<std::size_t>(m)] != 0;
    };

    std::vector<double> out;
    out.reserve(spec.arity());

    // Recency: months since the last active month; obs_month + 1 encodes
    // "never active up to now".
    int recency = obs_month + 1;
    for (MonthIndex m = obs_month; m >= 0; --m) {
        if (active(m)) {
            recency = obs_month - m;
            break;
        }
    }
    out.push_back(static_cast<double>(recency));

    std::vector<double> monetary;
    for (const int w : spec.windows) {
        int count = 0;
        for (MonthIndex m = obs_month - w + 1; m <= obs_month; ++m) count += active(m) ? 1 : 0;
        out.push_back(static_cast<double>(count));
    }
    for (const int w : spec.windows) {
        MoneyCents sum = 0;
        for (MonthIndex m = obs_month - w + 1; m <= obs_month; ++m) sum += margin[static_cast<std::size_t>(m)];
        monetary.push_back(cents_to_units(sum));
        out.push_back(monetary.back());
    }

    for (int c = 0; c < kPscCount; ++c) {
        out.push_back(cents_to_units(exposure[static_cast<std::size_t>(c)]));
    }

    // Short/long margin ratio; the defaults pick monetary_3 / monetary_12.
    const std::size_t short_idx = std::min<std::size_t>(1, monetary.size() - 1);
    out.push_back(monetary[short_idx] / std::max(monetary.back(), kTrendEpsilon));

    return out;
}

ChurnDataset build_churn_dataset(const std::vector<TransactionRecord>& transactions, MonthIndex obs_month,
                                 const FeatureSpec& spec, bool with_labels) {
    spec.validate();
    const int horizon = dataset_horizon(transactions);
    const auto snap = snapshot_at(transactions, obs_month);

    ChurnDataset out;
    out.customers = snap.customers;
    out.features = Matrix(0, spec.arity());

    // Loaded datasets are sorted by customer; group record slices directly.
    std::vector<std::pair<std::size_t, std::size_t>> slices(snap.customers.size(), {0, 0});
    std::size_t begin = 0;
    while (begin < transactions.size()) {
        std::size_t end = begin;
        while (end < transactions.size() && transactions[end].customer == transactions[begin].customer) ++end;
        const auto idx = snap.index_of(transactions[begin].customer);
        if (idx >= 0) slices[static_cast<std::size_t>(idx)] = {begin, end};
        begin = end;
    }

    for (std::size_t i = 0; i < snap.customers.size(); ++i) {
        const auto [lo, hi] = slices[i];
        const std::span<const TransactionRecord> ledger{transactions.data() + lo, hi - lo};
        out.features.append_row(build_features(ledger, obs_month, spec));
        if (with_labels) {
            out.labels.push_back(label_churn(ledger, obs_month, spec.churn_horizon, horizon).churned ? 1 : 0);
        }
    }
    return out;
}

void write_features_csv(const ChurnDataset& dataset, const FeatureSpec& spec,
                        const std::filesystem::path& path) {
    CsvWriter w(path);
    std::vector<std::string> header = {"customer_id"};
    for (const auto& name : spec.feature_names()) header.push_back(name);
    w.write_row(header);
    std::vector<std::string> row;
    for (std::size_t i = 0; i < dataset.customers.size(); ++i) {
        row.clear();
        row.push_back(std::to_string(dataset.customers[i]));
        for (const double v : dataset.features.row(i)) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            row.emplace_back(buf);
        }
        w.write_row(row);
    }
    w.close();
}

}  // namespace pclv
