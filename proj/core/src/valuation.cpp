#include "pclv/valuation.hpp"

#include <algorithm>
#include <cmath>

#include "pclv/csv.hpp"
#include "pclv/error.hpp"

namespace pclv {

void DiscountRate::validate() const {
    if (!(d > 0.0)) throw ConfigError("discount rate must be > 0");
    if (!std::isfinite(d)) throw ConfigError("discount rate must be finite");
}

RetentionScore retention(double churn_probability) {
    if (!(churn_probability >= 0.0 && churn_probability <= 1.0)) {
        throw Error("churn probability must lie in [0, 1]");
    }
    return {1.0 - churn_probability};
}

namespace {

void check_kernel_inputs(RetentionScore r, DiscountRate d) {
    d.validate();
    if (!(r.r >= 0.0 && r.r <= 1.0)) throw Error("retention must lie in [0, 1]");
}

}  // namespace

double actual_clv(double cm_monthly, RetentionScore r, DiscountRate d) {
    check_kernel_inputs(r, d);
    return (cm_monthly * 12.0 * r.r) / (1.0 + d.d - r.r);
}

double pclv_competitor(double pcm_annual, RetentionScore r, DiscountRate d) {
    check_kernel_inputs(r, d);
    return (pcm_annual * r.r) / (1.0 + d.d - r.r);
}

double pclv_total(const std::vector<double>& per_competitor) {
    double sum = 0.0;
    for (const double v : per_competitor) sum += v;
    return sum;
}

double total_clv(double actual, double pclv) {
    return actual + pclv;
}

std::vector<double> pcm_feature_row(const std::array<double, kPscCount>& focal_slots,
                                    const std::array<double, kPscCount>& system_slots) {
    std::vector<double> row;
    row.reserve(kPcmFeatureArity);
    row.insert(row.end(), focal_slots.begin(), focal_slots.end());
    row.insert(row.end(), system_slots.begin(), system_slots.end());
    return row;
}

namespace {

double predict_single(const gbt::GbtModel& model, const std::vector<double>& features) {
    if (model.n_features != features.size()) {
        throw Error("PCM model expects " + std::to_string(model.n_features) + " features, got " +
                    std::to_string(features.size()));
    }
    Matrix m(1, features.size());
    std::copy(features.begin(), features.end(), m.row(0).begin());
    return model.predict_margin(m)[0];
}

}  // namespace

double predict_pcm_focal(const gbt::GbtModel& model, const std::array<double, kPscCount>& focal,
                         const std::array<double, kPscCount>& system) {
    return predict_single(model, pcm_feature_row(focal, system));
}

AnnualPcm predict_pcm_competitor(const gbt::GbtModel& model, CustomerId customer, CompetitorId competitor,
                                 const std::array<double, kPscCount>& competitor_exposure,
                                 const std::array<double, kPscCount>& system) {
    const double monthly = predict_single(model, pcm_feature_row(competitor_exposure, system));
    return {customer, competitor, 12.0 * monthly};
}

std::vector<CompetitorId> competitor_ids(const std::vector<ObSnapshot>& snapshots) {
    std::vector<CompetitorId> ids;
    for (const auto& s : snapshots) ids.push_back(s.competitor);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::vector<ValuationRecord> valuate(const ValuationInputs& inputs, const std::vector<ObSnapshot>& ob_snapshots,
                                     const gbt::GbtModel& pcm_model, DiscountRate d) {
    d.validate();
    const std::size_t n = inputs.customers.size();
    if (inputs.monthly_margin.size() != n || inputs.churn_probability.size() != n ||
        inputs.system.size() != n) {
        throw Error("valuate: input arrays must align");
    }

    // Group OB rows into per-(customer, competitor) exposure vectors; the
    // snapshot collection is sorted by (customer, competitor, psc).
    struct ObGroup {
        CustomerId customer;
        CompetitorId competitor;
        std::array<double, kPscCount> exposure{};
    };
    std::vector<ObGroup> groups;
    for (const auto& row : ob_snapshots) {
        if (groups.empty() || groups.back().customer != row.customer ||
            groups.back().competitor != row.competitor) {
            groups.push_back({row.customer, row.competitor, {}});
        }
        groups.back().exposure[static_cast<std::size_t>(row.psc)] += cents_to_units(row.credit_amount_cents);
    }

    std::vector<ValuationRecord> out(n);
    std::size_t group_cursor = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto customer = inputs.customers[i];
        const auto r = retention(inputs.churn_probability[i]);

        ValuationRecord& rec = out[i];
        rec.customer = customer;
        rec.actual_clv_cents = units_to_cents(actual_clv(inputs.monthly_margin[i], r, d));

        while (group_cursor < groups.size() && groups[group_cursor].customer < customer) ++group_cursor;
        std::size_t cursor = group_cursor;
        while (cursor < groups.size() && groups[cursor].customer == customer) {
            const auto& group = groups[cursor];
            const auto pcm =
                predict_pcm_competitor(pcm_model, customer, group.competitor, group.exposure, inputs.system[i]);
            const auto cents = units_to_cents(pclv_competitor(pcm.pcm_annual, r, d));
            rec.pclv_by_competitor.emplace_back(group.competitor, cents);
            rec.pclv_total_cents += cents;
            ++cursor;
        }
        rec.total_clv_cents = rec.actual_clv_cents + rec.pclv_total_cents;
    }
    return out;
}

void save_valuation(const std::vector<ValuationRecord>& records, const std::vector<CompetitorId>& competitors,
                    const std::filesystem::path& path) {
    CsvWriter w(path);
    std::vector<std::string> header = {"customer_id", "actual_clv_cents", "pclv_total_cents",
                                       "total_clv_cents"};
    for (const auto id : competitors) {
        header.push_back("pclv_competitor_" + std::to_string(id) + "_cents");
    }
    w.write_row(header);

    std::vector<std::string> row;
    for (const auto& rec : records) {
        row.clear();
        row.push_back(std::to_string(rec.customer));
        row.push_back(std::to_string(rec.actual_clv_cents));
        row.push_back(std::to_string(rec.pclv_total_cents));
        row.push_back(std::to_string(rec.total_clv_cents));
        for (const auto id : competitors) {
            MoneyCents cents = 0;
            for (const auto& [competitor, value] : rec.pclv_by_competitor) {
                if (competitor == id) cents = value;
            }
            row.push_back(std::to_string(cents));
        }
        w.write_row(row);
    }
    w.close();
}

std::vector<ValuationRecord> load_valuation(const std::filesystem::path& path) {
    CsvReader reader(path);
    const auto& header = reader.header();
    if (header.size() < 4 || header[0] != "customer_id" || header[1] != "actual_clv_cents" ||
        header[2] != "pclv_total_cents" || header[3] != "total_clv_cents") {
        throw Error(path.string() + ": unexpected valuation header");
    }
    std::vector<CompetitorId> competitors;
    for (std::size_t i = 4; i < header.size(); ++i) {
        const auto& col = header[i];
        const std::string prefix = "pclv_competitor_";
        const std::string suffix = "_cents";
        if (col.rfind(prefix, 0) != 0 || col.size() <= prefix.size() + suffix.size() ||
            col.compare(col.size() - suffix.size(), suffix.size(), suffix) != 0) {
            throw Error(path.string() + ": unexpected valuation column \"" + col + "\"");
        }
        const auto id_token = col.substr(prefix.size(), col.size() - prefix.size() - suffix.size());
        competitors.push_back(parse_int64(id_token, path.string() + " header"));
    }

    std::vector<ValuationRecord> out;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        const auto context = path.string() + ":" + std::to_string(reader.line_number());
        if (fields.size() != 4 + competitors.size()) {
            throw Error(context + ": expected " + std::to_string(4 + competitors.size()) + " fields");
        }
        ValuationRecord rec;
        rec.customer = parse_int64(fields[0], context);
        rec.actual_clv_cents = parse_int64(fields[1], context);
        rec.pclv_total_cents = parse_int64(fields[2], context);
        rec.total_clv_cents = parse_int64(fields[3], context);
        MoneyCents competitor_sum = 0;
        for (std::size_t i = 0; i < competitors.size(); ++i) {
            const auto cents = parse_int64(fields[4 + i], context);
            if (cents != 0) rec.pclv_by_competitor.emplace_back(competitors[i], cents);
            competitor_sum += cents;
        }
        if (competitor_sum != rec.pclv_total_cents) {
            throw Error(context + ": pclv_total_cents does not equal the sum of competitor columns");
        }
        if (rec.actual_clv_cents + rec.pclv_total_cents != rec.total_clv_cents) {
            throw Error(context + ": total_clv_cents does not equal actual + pclv");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace pclv
