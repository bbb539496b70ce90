#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pclv/domain.hpp"
#include "pclv/matrix.hpp"

namespace pclv {

/// RFM-style feature layout: recency, per-window activity counts, per-window
/// margin sums, per-PSC exposure at the observation month, and a short/long
/// margin ratio.
struct FeatureSpec {
    std::vector<int> windows = {1, 3, 6, 12};  // strictly increasing month windows
    int churn_horizon = 6;                     // label look-ahead in months

    void validate() const;
    std::size_t arity() const { return 1 + 2 * windows.size() + kPscCount + 1; }
    std::vector<std::string> feature_names() const;
    int max_window() const { return windows.back(); }
};

struct ChurnLabel {
    bool churned = false;
};

/// A customer churned when every month of (obs_month, obs_month + horizon]
/// shows zero credit and zero margin. Throws when the window extends past
/// the dataset horizon.
ChurnLabel label_churn(std::span<const TransactionRecord> ledger, MonthIndex obs_month, int horizon_months,
                       int dataset_horizon);

/// Features for one customer's ledger at obs_month. A month counts as active
/// when it has nonzero credit or nonzero margin. Monetary values are in
/// currency units. Requires obs_month >= max window - 1.
std::vector<double> build_features(std::span<const TransactionRecord> ledger, MonthIndex obs_month,
                                   const FeatureSpec& spec);

/// Row-per-customer feature matrix over everyone with any record at or
/// before obs_month. Labels come from label_churn when requested (training);
/// scoring-time callers skip them because no future window exists.
struct ChurnDataset {
    std::vector<CustomerId> customers;
    Matrix features;
    std::vector<int> labels;  // empty when built without labels
};

ChurnDataset build_churn_dataset(const std::vector<TransactionRecord>& transactions, MonthIndex obs_month,
                                 const FeatureSpec& spec, bool with_labels);

/// Debug dump: customer_id plus the features in their fixed order.
void write_features_csv(const ChurnDataset& dataset, const FeatureSpec& spec,
                        const std::filesystem::path& path);

}  // namespace pclv
