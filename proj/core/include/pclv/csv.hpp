#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace pclv {

/// Minimal CSV reader for the pipeline's comma-separated, header-required
/// files. No quoting: every field in our schemas is an integer or an
/// enumeration token. Tracks line numbers for error reporting.
class CsvReader {
public:
    explicit CsvReader(const std::filesystem::path& path);

    const std::vector<std::string>& header() const { return header_; }
    const std::filesystem::path& path() const { return path_; }

    /// Reads the next data row into `fields`. Returns false at EOF.
    /// Skips blank lines; strips a trailing '\r'.
    bool next(std::vector<std::string>& fields);

    /// 1-based line number of the row most recently returned.
    std::size_t line_number() const { return line_number_; }

    /// Throws Error unless the header matches `expected` exactly.
    void require_header(const std::vector<std::string>& expected) const;

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::vector<std::string> header_;
    std::size_t line_number_ = 0;
};

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);

    void write_row(const std::vector<std::string>& fields);
    void close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

void split_csv_line(const std::string& line, std::vector<std::string>& fields);

/// Strict integer parse; throws Error naming `context` (e.g. "file:line column") on failure.
std::int64_t parse_int64(const std::string& token, const std::string& context);

/// FNV-1a 64-bit checksum of a file's bytes; used for manifest/determinism checks.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace pclv
