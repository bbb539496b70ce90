#include "pclv/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "pclv/csv.hpp"
#include "pclv/error.hpp"

namespace pclv {

const std::string& segment_name(Segment segment) {
    static const std::array<std::string, 3> names = {"Lower", "Intermediate", "Upper"};
    return names[static_cast<std::size_t>(segment)];
}

std::vector<Segment> terciles(const std::vector<CustomerId>& customers,
                              const std::vector<MoneyCents>& values) {
    if (customers.size() != values.size()) throw Error("terciles: customers/values length mismatch");
    const std::size_t n = customers.size();
    if (n < 3) throw Error("tercile segmentation requires at least 3 customers");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return customers[a] < customers[b];
    });

    const std::size_t upper = (n + 2) / 3;                 // ceil(n/3)
    const std::size_t intermediate = (n - upper + 1) / 2;  // ceil((n-upper)/2)

    std::vector<Segment> segments(n, Segment::Lower);
    for (std::size_t rank = 0; rank < n; ++rank) {
        Segment s = Segment::Lower;
        if (rank < upper) {
            s = Segment::Upper;
        } else if (rank < upper + intermediate) {
            s = Segment::Intermediate;
        }
        segments[order[rank]] = s;
    }
    return segments;
}

namespace {

std::size_t cell_index(Segment from, Segment to) {
    // Row-major in Upper, Intermediate, Lower order, matching the table.
    const auto row = static_cast<std::size_t>(2 - static_cast<int>(from));
    const auto col = static_cast<std::size_t>(2 - static_cast<int>(to));
    return row * 3 + col;
}

double pct(MoneyCents part, MoneyCents whole) {
    if (whole == 0) return 0.0;
    return 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

double pct_count(std::int64_t part, std::int64_t whole) {
    if (whole == 0) return 0.0;
    return 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

double round2(double v) {
    return std::round(v * 100.0) / 100.0;
}

}  // namespace

std::array<MigrationCell, 9> migration_matrix(const std::vector<CustomerId>& customers,
                                              const std::vector<Segment>& actual_segments,
                                              const std::vector<Segment>& total_segments,
                                              const std::vector<ValuationRecord>& records) {
    const std::size_t n = customers.size();
    if (actual_segments.size() != n || total_segments.size() != n || records.size() != n) {
        throw Error("migration_matrix: inputs must cover the same customers");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (records[i].customer != customers[i]) {
            throw Error("migration_matrix: customer set mismatch at position " + std::to_string(i));
        }
    }

    std::array<MigrationCell, 9> cells;
    for (int from = 0; from < 3; ++from) {
        for (int to = 0; to < 3; ++to) {
            auto& cell = cells[cell_index(static_cast<Segment>(2 - from), static_cast<Segment>(2 - to))];
            cell.from = static_cast<Segment>(2 - from);
            cell.to = static_cast<Segment>(2 - to);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto& cell = cells[cell_index(actual_segments[i], total_segments[i])];
        cell.n_customers += 1;
        cell.actual_clv_cents += records[i].actual_clv_cents;
        cell.pclv_cents += records[i].pclv_total_cents;
        cell.total_clv_cents += records[i].total_clv_cents;
    }
    return cells;
}

UpsideDecomposition upside_decomposition(const std::array<MigrationCell, 9>& cells) {
    UpsideDecomposition up;
    MoneyCents total_actual = 0;
    std::int64_t total_customers = 0;
    for (const auto& cell : cells) {
        total_actual += cell.actual_clv_cents;
        total_customers += cell.n_customers;
        if (static_cast<int>(cell.to) > static_cast<int>(cell.from)) {
            up.upward_cents += cell.pclv_cents;
            up.upward_customers += cell.n_customers;
        } else if (cell.to == cell.from) {
            up.static_cents += cell.pclv_cents;
            up.static_customers += cell.n_customers;
        } else {
            up.downward_cents += cell.pclv_cents;
            up.downward_customers += cell.n_customers;
        }
    }
    const MoneyCents total_pclv = up.upward_cents + up.static_cents + up.downward_cents;
    up.upward_pct = pct(up.upward_cents, total_actual);
    up.static_pct = pct(up.static_cents, total_actual);
    up.downward_pct = pct(up.downward_cents, total_actual);
    up.overall_upside_pct = pct(total_pclv, total_actual);
    up.upward_customers_pct = pct_count(up.upward_customers, total_customers);
    up.static_customers_pct = pct_count(up.static_customers, total_customers);
    up.downward_customers_pct = pct_count(up.downward_customers, total_customers);
    return up;
}

MigrationReport assemble_report(const std::array<MigrationCell, 9>& cells) {
    MigrationReport report;
    report.cells = cells;
    report.totals.n_customers = 0;
    for (const auto& cell : cells) {
        report.totals.n_customers += cell.n_customers;
        report.totals.actual_clv_cents += cell.actual_clv_cents;
        report.totals.pclv_cents += cell.pclv_cents;
        report.totals.total_clv_cents += cell.total_clv_cents;
        if (cell.total_clv_cents != cell.actual_clv_cents + cell.pclv_cents) {
            report.inconsistent_cells.emplace_back(cell.from, cell.to);
        }
    }
    report.upside = upside_decomposition(cells);
    return report;
}

MigrationReport build_migration_report(const std::vector<ValuationRecord>& records) {
    std::vector<CustomerId> customers(records.size());
    std::vector<MoneyCents> actual(records.size()), total(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        customers[i] = records[i].customer;
        actual[i] = records[i].actual_clv_cents;
        total[i] = records[i].total_clv_cents;
    }
    const auto actual_segments = terciles(customers, actual);
    const auto total_segments = terciles(customers, total);
    return assemble_report(migration_matrix(customers, actual_segments, total_segments, records));
}

std::vector<CustomerId> rank_by_pclv(const std::vector<ValuationRecord>& records) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (records[a].pclv_total_cents != records[b].pclv_total_cents) {
            return records[a].pclv_total_cents > records[b].pclv_total_cents;
        }
        return records[a].customer < records[b].customer;
    });
    std::vector<CustomerId> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) out[i] = records[order[i]].customer;
    return out;
}

void save_report_csv(const MigrationReport& report, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.write_row({"actual_clv_segment", "total_clv_segment", "total_clv_cents", "pclv_cents",
                 "actual_clv_cents", "n_customers"});
    for (const auto& cell : report.cells) {
        w.write_row({segment_name(cell.from), segment_name(cell.to), std::to_string(cell.total_clv_cents),
                     std::to_string(cell.pclv_cents), std::to_string(cell.actual_clv_cents),
                     std::to_string(cell.n_customers)});
    }
    w.write_row({"Total", "", std::to_string(report.totals.total_clv_cents),
                 std::to_string(report.totals.pclv_cents), std::to_string(report.totals.actual_clv_cents),
                 std::to_string(report.totals.n_customers)});
    w.close();
}

void save_report_json(const MigrationReport& report, const std::filesystem::path& path) {
    nlohmann::json j;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : report.cells) {
        cells.push_back({{"from", segment_name(cell.from)},
                         {"to", segment_name(cell.to)},
                         {"n_customers", cell.n_customers},
                         {"actual_clv_cents", cell.actual_clv_cents},
                         {"pclv_cents", cell.pclv_cents},
                         {"total_clv_cents", cell.total_clv_cents}});
    }
    j["cells"] = std::move(cells);
    j["totals"] = {{"n_customers", report.totals.n_customers},
                   {"actual_clv_cents", report.totals.actual_clv_cents},
                   {"pclv_cents", report.totals.pclv_cents},
                   {"total_clv_cents", report.totals.total_clv_cents}};
    const auto& up = report.upside;
    j["upside"] = {
        {"upward", {{"pclv_cents", up.upward_cents}, {"pct_of_actual", round2(up.upward_pct)},
                    {"n_customers", up.upward_customers}, {"pct_of_customers", round2(up.upward_customers_pct)}}},
        {"static", {{"pclv_cents", up.static_cents}, {"pct_of_actual", round2(up.static_pct)},
                    {"n_customers", up.static_customers}, {"pct_of_customers", round2(up.static_customers_pct)}}},
        {"downward", {{"pclv_cents", up.downward_cents}, {"pct_of_actual", round2(up.downward_pct)},
                      {"n_customers", up.downward_customers}, {"pct_of_customers", round2(up.downward_customers_pct)}}},
        {"overall_upside_pct", round2(up.overall_upside_pct)},
    };
    if (!report.inconsistent_cells.empty()) {
        nlohmann::json flagged = nlohmann::json::array();
        for (const auto& [from, to] : report.inconsistent_cells) {
            flagged.push_back(segment_name(from) + "->" + segment_name(to));
        }
        j["inconsistent_cells"] = std::move(flagged);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failure on " + path.string());
}

void save_targets_csv(const std::vector<CustomerId>& ranked, const std::vector<ValuationRecord>& records,
                      const std::filesystem::path& path) {
    std::vector<std::pair<CustomerId, MoneyCents>> pclv;
    pclv.reserve(records.size());
    for (const auto& rec : records) pclv.emplace_back(rec.customer, rec.pclv_total_cents);
    std::sort(pclv.begin(), pclv.end());

    CsvWriter w(path);
    w.write_row({"customer_id", "pclv_total_cents"});
    for (const auto customer : ranked) {
        const auto it = std::lower_bound(pclv.begin(), pclv.end(), std::make_pair(customer, std::numeric_limits<MoneyCents>::min()));
        if (it == pclv.end() || it->first != customer) throw Error("rank list references unknown customer");
        w.write_row({std::to_string(customer), std::to_string(it->second)});
    }
    w.close();
}

}  // namespace pclv
