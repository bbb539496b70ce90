#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "pclv/boosting.hpp"
#include "pclv/domain.hpp"

namespace pclv {

struct DiscountRate {
    double d = 0.1;  // annual; > 0 keeps 1 + d - r positive for r in [0, 1]

    void validate() const;
};

struct RetentionScore {
    double r = 0.0;  // probability in [0, 1]
};

/// r = 1 - churn probability. Throws on out-of-range input.
RetentionScore retention(double churn_probability);

/// Net present value of the customer's focal relationship:
/// (cm * 12 * r) / (1 + d - r), with cm the current monthly margin.
double actual_clv(double cm_monthly, RetentionScore r, DiscountRate d);

/// Competitor-side value with the same discounting, from an annual potential
/// margin: (pcm_annual * r) / (1 + d - r).
double pclv_competitor(double pcm_annual, RetentionScore r, DiscountRate d);

/// Sum over competitors; empty (no OB consent) sums to zero.
double pclv_total(const std::vector<double>& per_competitor);

double total_clv(double actual, double pclv);

/// Feature layout shared by training and transfer: the 8 focal-slot credit
/// amounts followed by the 8 system amounts, in PSC-tag order, currency units.
inline constexpr std::size_t kPcmFeatureArity = 2 * kPscCount;

std::vector<double> pcm_feature_row(const std::array<double, kPscCount>& focal_slots,
                                    const std::array<double, kPscCount>& system_slots);

/// Monthly margin estimate for the focal institution's own exposure.
double predict_pcm_focal(const gbt::GbtModel& model, const std::array<double, kPscCount>& focal,
                         const std::array<double, kPscCount>& system);

/// 12-month potential contribution margin for one (customer, competitor):
/// the competitor's credit amounts substitute into the focal slots and the
/// monthly estimate is annualized.
struct AnnualPcm {
    CustomerId customer = 0;
    CompetitorId competitor = 0;
    double pcm_annual = 0.0;
};

AnnualPcm predict_pcm_competitor(const gbt::GbtModel& model, CustomerId customer, CompetitorId competitor,
                                 const std::array<double, kPscCount>& competitor_exposure,
                                 const std::array<double, kPscCount>& system);

struct ValuationRecord {
    CustomerId customer = 0;
    MoneyCents actual_clv_cents = 0;
    std::vector<std::pair<CompetitorId, MoneyCents>> pclv_by_competitor;
    MoneyCents pclv_total_cents = 0;  // = sum of pclv_by_competitor, exactly
    MoneyCents total_clv_cents = 0;   // = actual + pclv_total, exactly
};

struct ValuationInputs {
    /// Parallel arrays, one entry per customer, ascending customer id.
    std::vector<CustomerId> customers;
    std::vector<double> monthly_margin;        // cm_i at the last observable month
    std::vector<double> churn_probability;
    /// System exposure per customer (zeros when absent).
    std::vector<std::array<double, kPscCount>> system;
};

/// Applies the full chain per customer: retention, Actual CLV, per-competitor
/// annual PCM and PCLV, aggregation, Total CLV. Customers without OB rows get
/// pclv_total = 0. Output sorted by customer id; per-competitor values are
/// rounded to cents before summation so the record identities hold exactly.
std::vector<ValuationRecord> valuate(const ValuationInputs& inputs, const std::vector<ObSnapshot>& ob_snapshots,
                                     const gbt::GbtModel& pcm_model, DiscountRate d);

/// Competitor ids present across a snapshot collection, ascending.
std::vector<CompetitorId> competitor_ids(const std::vector<ObSnapshot>& snapshots);

/// valuation.csv: customer_id, actual_clv_cents, pclv_total_cents,
/// total_clv_cents, then one pclv_competitor_<n>_cents column per competitor.
void save_valuation(const std::vector<ValuationRecord>& records, const std::vector<CompetitorId>& competitors,
                    const std::filesystem::path& path);

/// Loads valuation.csv and re-asserts the internal identities of each record.
std::vector<ValuationRecord> load_valuation(const std::filesystem::path& path);

}  // namespace pclv
