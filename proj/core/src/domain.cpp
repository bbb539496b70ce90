#include "pclv/domain.hpp"

#include <algorithm>

#include "pclv/csv.hpp"
#include "pclv/error.hpp"

namespace pclv {

const std::array<std::string, kPscCount>& psc_names() {
    static const std::array<std::string, kPscCount> names = {
        "CREDIT_CARD", "AUTO_LOAN", "MORTGAGE",  "PERSONAL_LOAN",
        "PAYROLL_LOAN", "OVERDRAFT", "BUSINESS_LOAN", "RURAL_CREDIT",
    };
    return names;
}

const std::string& psc_name(PscCode code) {
    return psc_names()[static_cast<std::size_t>(code)];
}

PscCode parse_psc(const std::string& token, const std::string& context) {
    const auto& names = psc_names();
    for (int i = 0; i < kPscCount; ++i) {
        if (names[static_cast<std::size_t>(i)] == token) return static_cast<PscCode>(i);
    }
    std::string valid;
    for (int i = 0; i < kPscCount; ++i) {
        if (i) valid += ", ";
        valid += names[static_cast<std::size_t>(i)];
    }
    throw Error(context + ": unknown PSC token \"" + token + "\"; valid tokens: " + valid);
}

const std::vector<std::string>& dataset_header(DatasetKind kind) {
    static const std::vector<std::string> transactions = {
        "customer_id", "month", "psc", "credit_amount_cents", "contribution_margin_cents"};
    static const std::vector<std::string> system = {"customer_id", "psc", "credit_amount_cents"};
    static const std::vector<std::string> ob = {"customer_id", "competitor_id", "psc", "credit_amount_cents"};
    switch (kind) {
        case DatasetKind::Transactions: return transactions;
        case DatasetKind::SystemExposure: return system;
        case DatasetKind::ObSnapshot: return ob;
    }
    throw Error("unreachable dataset kind");
}

std::string dataset_filename(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::Transactions: return "transactions.csv";
        case DatasetKind::SystemExposure: return "system_exposure.csv";
        case DatasetKind::ObSnapshot: return "ob_snapshot.csv";
    }
    throw Error("unreachable dataset kind");
}

namespace {

std::string row_context(const CsvReader& reader) {
    return reader.path().string() + ":" + std::to_string(reader.line_number());
}

void check_arity(const CsvReader& reader, const std::vector<std::string>& fields, std::size_t expected) {
    if (fields.size() != expected) {
        throw Error(row_context(reader) + ": expected " + std::to_string(expected) +
                    " fields, found " + std::to_string(fields.size()));
    }
}

MoneyCents parse_credit(const CsvReader& reader, const std::string& token) {
    const MoneyCents v = parse_int64(token, row_context(reader));
    if (v < 0) {
        throw Error(row_context(reader) + ": negative credit amount " + token);
    }
    return v;
}

CustomerId parse_customer(const CsvReader& reader, const std::string& token) {
    const std::int64_t v = parse_int64(token, row_context(reader));
    if (v < 0) throw Error(row_context(reader) + ": negative customer id " + token);
    return v;
}

template <typename Record>
std::size_t count_customers(const std::vector<Record>& records) {
    std::size_t n = 0;
    CustomerId last = -1;
    for (const auto& r : records) {
        if (r.customer != last) {
            ++n;
            last = r.customer;
        }
    }
    return n;
}

/// Sorts by `key`, then folds equal-key runs together with `merge`.
template <typename Record, typename KeyFn, typename MergeFn>
void aggregate(std::vector<Record>& records, KeyFn key, MergeFn merge) {
    std::sort(records.begin(), records.end(),
              [&](const Record& a, const Record& b) { return key(a) < key(b); });
    std::size_t out = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (out > 0 && key(records[out - 1]) == key(records[i])) {
            merge(records[out - 1], records[i]);
        } else {
            records[out++] = records[i];
        }
    }
    records.resize(out);
}

}  // namespace

Loaded<TransactionRecord> load_transactions(const std::filesystem::path& path) {
    CsvReader reader(path);
    reader.require_header(dataset_header(DatasetKind::Transactions));

    Loaded<TransactionRecord> out;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        check_arity(reader, fields, 5);
        ++out.source_rows;
        TransactionRecord rec;
        rec.customer = parse_customer(reader, fields[0]);
        const std::int64_t month = parse_int64(fields[1], row_context(reader));
        if (month < 0) throw Error(row_context(reader) + ": negative month index " + fields[1]);
        rec.month = static_cast<MonthIndex>(month);
        rec.psc = parse_psc(fields[2], row_context(reader));
        rec.credit_amount_cents = parse_credit(reader, fields[3]);
        rec.contribution_margin_cents = parse_int64(fields[4], row_context(reader));
        out.records.push_back(rec);
    }

    aggregate(
        out.records,
        [](const TransactionRecord& r) { return std::make_tuple(r.customer, r.month, static_cast<int>(r.psc)); },
        [](TransactionRecord& into, const TransactionRecord& from) {
            into.credit_amount_cents += from.credit_amount_cents;
            into.contribution_margin_cents += from.contribution_margin_cents;
        });
    out.customer_count = count_customers(out.records);
    return out;
}

Loaded<SystemExposure> load_system_exposure(const std::filesystem::path& path) {
    CsvReader reader(path);
    reader.require_header(dataset_header(DatasetKind::SystemExposure));

    Loaded<SystemExposure> out;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        check_arity(reader, fields, 3);
        ++out.source_rows;
        SystemExposure rec;
        rec.customer = parse_customer(reader, fields[0]);
        rec.psc = parse_psc(fields[1], row_context(reader));
        rec.credit_amount_cents = parse_credit(reader, fields[2]);
        out.records.push_back(rec);
    }

    aggregate(
        out.records,
        [](const SystemExposure& r) { return std::make_pair(r.customer, static_cast<int>(r.psc)); },
        [](SystemExposure& into, const SystemExposure& from) {
            into.credit_amount_cents += from.credit_amount_cents;
        });
    out.customer_count = count_customers(out.records);
    return out;
}

Loaded<ObSnapshot> load_ob_snapshots(const std::filesystem::path& path) {
    CsvReader reader(path);
    reader.require_header(dataset_header(DatasetKind::ObSnapshot));

    Loaded<ObSnapshot> out;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        check_arity(reader, fields, 4);
        ++out.source_rows;
        ObSnapshot rec;
        rec.customer = parse_customer(reader, fields[0]);
        rec.competitor = parse_int64(fields[1], row_context(reader));
        if (rec.competitor < 0) throw Error(row_context(reader) + ": negative competitor id " + fields[1]);
        rec.psc = parse_psc(fields[2], row_context(reader));
        rec.credit_amount_cents = parse_credit(reader, fields[3]);
        out.records.push_back(rec);
    }

    aggregate(
        out.records,
        [](const ObSnapshot& r) { return std::make_tuple(r.customer, r.competitor, static_cast<int>(r.psc)); },
        [](ObSnapshot& into, const ObSnapshot& from) {
            into.credit_amount_cents += from.credit_amount_cents;
        });
    out.customer_count = count_customers(out.records);
    return out;
}

void save_transactions(const std::vector<TransactionRecord>& records, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.write_row(dataset_header(DatasetKind::Transactions));
    for (const auto& r : records) {
        w.write_row({std::to_string(r.customer), std::to_string(r.month), psc_name(r.psc),
                     std::to_string(r.credit_amount_cents), std::to_string(r.contribution_margin_cents)});
    }
    w.close();
}

void save_system_exposure(const std::vector<SystemExposure>& records, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.write_row(dataset_header(DatasetKind::SystemExposure));
    for (const auto& r : records) {
        w.write_row({std::to_string(r.customer), psc_name(r.psc), std::to_string(r.credit_amount_cents)});
    }
    w.close();
}

void save_ob_snapshots(const std::vector<ObSnapshot>& records, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.write_row(dataset_header(DatasetKind::ObSnapshot));
    for (const auto& r : records) {
        w.write_row({std::to_string(r.customer), std::to_string(r.competitor), psc_name(r.psc),
                     std::to_string(r.credit_amount_cents)});
    }
    w.close();
}

int dataset_horizon(const std::vector<TransactionRecord>& records) {
    int max_month = -1;
    for (const auto& r : records) max_month = std::max(max_month, r.month);
    return max_month + 1;
}

std::ptrdiff_t ExposureSnapshot::index_of(CustomerId customer) const {
    const auto it = std::lower_bound(customers.begin(), customers.end(), customer);
    if (it == customers.end() || *it != customer) return -1;
    return it - customers.begin();
}

ExposureSnapshot snapshot_at(const std::vector<TransactionRecord>& records, MonthIndex month) {
    const int horizon = dataset_horizon(records);
    if (month < 0 || month >= horizon) {
        throw Error("snapshot month " + std::to_string(month) + " outside dataset horizon [0, " +
                    std::to_string(horizon) + ")");
    }

    ExposureSnapshot snap;
    snap.month = month;
    for (const auto& r : records) {
        if (r.month > month) continue;
        if (snap.customers.empty() || snap.customers.back() != r.customer) {
            snap.customers.push_back(r.customer);
        }
    }
    // Loaded datasets are sorted by customer; tolerate arbitrary order too.
    if (!std::is_sorted(snap.customers.begin(), snap.customers.end())) {
        std::sort(snap.customers.begin(), snap.customers.end());
    }
    snap.customers.erase(std::unique(snap.customers.begin(), snap.customers.end()), snap.customers.end());

    snap.exposure.assign(snap.customers.size(), {});
    snap.margin.assign(snap.customers.size(), 0);
    for (const auto& r : records) {
        if (r.month != month) continue;
        const auto idx = snap.index_of(r.customer);
        snap.exposure[static_cast<std::size_t>(idx)][static_cast<std::size_t>(r.psc)] += r.credit_amount_cents;
        snap.margin[static_cast<std::size_t>(idx)] += r.contribution_margin_cents;
    }
    return snap;
}

}  // namespace pclv
