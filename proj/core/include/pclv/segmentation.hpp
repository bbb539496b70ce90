#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "pclv/valuation.hpp"

namespace pclv {

/// Value terciles, ordered Upper > Intermediate > Lower.
enum class Segment : int {
    Lower = 0,
    Intermediate = 1,
    Upper = 2,
};

const std::string& segment_name(Segment segment);

/// Ranks customers by value descending (ties by ascending customer id) and
/// cuts nested-ceil terciles: |Upper| = ceil(N/3), |Intermediate| =
/// ceil((N - |Upper|)/2), rest Lower. Requires at least 3 customers.
std::vector<Segment> terciles(const std::vector<CustomerId>& customers,
                              const std::vector<MoneyCents>& values);

struct MigrationCell {
    Segment from = Segment::Lower;  // Actual CLV segment
    Segment to = Segment::Lower;    // Total CLV segment
    std::int64_t n_customers = 0;
    MoneyCents actual_clv_cents = 0;
    MoneyCents pclv_cents = 0;
    MoneyCents total_clv_cents = 0;
};

struct UpsideDecomposition {
    MoneyCents upward_cents = 0;    // PCLV of {Int->Up, Low->Int, Low->Up}
    MoneyCents static_cents = 0;    // diagonal PCLV
    MoneyCents downward_cents = 0;  // PCLV of {Up->Int, Up->Low, Int->Low}
    double upward_pct = 0.0;        // of total Actual CLV
    double static_pct = 0.0;
    double downward_pct = 0.0;
    double overall_upside_pct = 0.0;  // total PCLV / total Actual CLV
    std::int64_t upward_customers = 0;
    std::int64_t static_customers = 0;
    std::int64_t downward_customers = 0;
    double upward_customers_pct = 0.0;
    double static_customers_pct = 0.0;
    double downward_customers_pct = 0.0;
};

struct MigrationReport {
    std::array<MigrationCell, 9> cells;  // (from, to) in Upper/Int/Lower order
    MigrationCell totals;
    UpsideDecomposition upside;
    /// Cells whose printed money columns do not satisfy total = actual + pclv
    /// (only possible when the report is assembled from external aggregates).
    std::vector<std::pair<Segment, Segment>> inconsistent_cells;
};

/// Builds the 3x3 matrix from per-customer segments and valuation records.
/// Throws when the three inputs do not cover the same customers.
std::array<MigrationCell, 9> migration_matrix(const std::vector<CustomerId>& customers,
                                              const std::vector<Segment>& actual_segments,
                                              const std::vector<Segment>& total_segments,
                                              const std::vector<ValuationRecord>& records);

UpsideDecomposition upside_decomposition(const std::array<MigrationCell, 9>& cells);

/// Totals row, decomposition, and per-cell consistency flags from 9 cells
/// (either built from records or fed in as published aggregates).
MigrationReport assemble_report(const std::array<MigrationCell, 9>& cells);

/// Full pipeline step: terciles by Actual CLV and by Total CLV, then the
/// migration report. Requires at least 3 records.
MigrationReport build_migration_report(const std::vector<ValuationRecord>& records);

/// Add-on-selling target list: descending pclv_total, ties by customer id.
std::vector<CustomerId> rank_by_pclv(const std::vector<ValuationRecord>& records);

/// report.csv mirrors the published table layout (from, to, total, pclv,
/// actual, customers) plus a Total row.
void save_report_csv(const MigrationReport& report, const std::filesystem::path& path);

/// report.json carries the upside decomposition with percentages at 2 decimals.
void save_report_json(const MigrationReport& report, const std::filesystem::path& path);

void save_targets_csv(const std::vector<CustomerId>& ranked, const std::vector<ValuationRecord>& records,
                      const std::filesystem::path& path);

}  // namespace pclv
