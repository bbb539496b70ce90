#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pclv/money.hpp"

namespace pclv {

/// Product Service Category of a credit product. Closed enumeration with
/// stable integer tags 0..7; the tags double as feature-slot positions.
enum class PscCode : int {
    CreditCard = 0,
    AutoLoan = 1,
    Mortgage = 2,
    PersonalLoan = 3,
    PayrollLoan = 4,
    Overdraft = 5,
    BusinessLoan = 6,
    RuralCredit = 7,
};

inline constexpr int kPscCount = 8;

/// Token names used verbatim in CSV files.
const std::array<std::string, kPscCount>& psc_names();

const std::string& psc_name(PscCode code);

/// Parses a PSC token; throws Error listing the valid tokens on failure.
/// `context` should identify the file location for the message.
PscCode parse_psc(const std::string& token, const std::string& context);

using CustomerId = std::int64_t;
using CompetitorId = std::int64_t;
using MonthIndex = int;

/// One customer-month-PSC observation at the focal institution. Credit
/// amounts are end-of-month balances (the files do not distinguish balance
/// from flow; this artifact reads them as balances throughout).
struct TransactionRecord {
    CustomerId customer = 0;
    MonthIndex month = 0;
    PscCode psc = PscCode::CreditCard;
    MoneyCents credit_amount_cents = 0;
    MoneyCents contribution_margin_cents = 0;

    bool operator==(const TransactionRecord&) const = default;
};

/// Credit held across the whole national financial system at the snapshot
/// month. May be inconsistent with the focal ledger at source; loading only
/// validates non-negativity.
struct SystemExposure {
    CustomerId customer = 0;
    PscCode psc = PscCode::CreditCard;
    MoneyCents credit_amount_cents = 0;

    bool operator==(const SystemExposure&) const = default;
};

/// Per (customer, competitor, PSC) credit amount shared through Open Banking
/// at the snapshot month. Present only for consenting customers.
struct ObSnapshot {
    CustomerId customer = 0;
    CompetitorId competitor = 0;
    PscCode psc = PscCode::CreditCard;
    MoneyCents credit_amount_cents = 0;

    bool operator==(const ObSnapshot&) const = default;
};

/// Total contribution margin across all PSCs at the last training month.
struct MarginTarget {
    CustomerId customer = 0;
    MoneyCents monthly_margin_cents = 0;

    bool operator==(const MarginTarget&) const = default;
};

enum class DatasetKind {
    Transactions,
    SystemExposure,
    ObSnapshot,
};

const std::vector<std::string>& dataset_header(DatasetKind kind);
std::string dataset_filename(DatasetKind kind);

template <typename Record>
struct Loaded {
    std::vector<Record> records;   // aggregated and sorted by key
    std::size_t source_rows = 0;   // data rows read before aggregation
    std::size_t customer_count = 0;
};

/// Loads and validates one dataset. Duplicate keys are aggregated by summing
/// amounts (and margins); records come back sorted by their natural key.
/// Throws Error with file/line context for malformed rows, unknown PSC
/// tokens, and negative credit amounts.
Loaded<TransactionRecord> load_transactions(const std::filesystem::path& path);
Loaded<SystemExposure> load_system_exposure(const std::filesystem::path& path);
Loaded<ObSnapshot> load_ob_snapshots(const std::filesystem::path& path);

void save_transactions(const std::vector<TransactionRecord>& records, const std::filesystem::path& path);
void save_system_exposure(const std::vector<SystemExposure>& records, const std::filesystem::path& path);
void save_ob_snapshots(const std::vector<ObSnapshot>& records, const std::filesystem::path& path);

/// Number of months spanned by the records: max month + 1 (0 when empty).
int dataset_horizon(const std::vector<TransactionRecord>& records);

/// Per-customer focal exposure and margin total at one month.
/// Rows cover every customer with any record at or before `month`; customers
/// inactive at `month` itself carry all-zero exposure and zero margin, so
/// churned-but-historical customers stay scoreable.
struct ExposureSnapshot {
    MonthIndex month = 0;
    std::vector<CustomerId> customers;            // ascending
    std::vector<std::array<MoneyCents, kPscCount>> exposure;  // by PSC tag
    std::vector<MoneyCents> margin;               // total margin at `month`

    std::size_t size() const { return customers.size(); }
    /// Index of a customer in the snapshot, or -1.
    std::ptrdiff_t index_of(CustomerId customer) const;
};

/// Throws Error when `month` lies outside [0, horizon).
ExposureSnapshot snapshot_at(const std::vector<TransactionRecord>& records, MonthIndex month);

}  // namespace pclv
