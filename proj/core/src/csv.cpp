#include "pclv/csv.hpp"

#include <charconv>

#include "pclv/error.hpp"

namespace pclv {

void split_csv_line(const std::string& line, std::vector<std::string>& fields) {
    fields.clear();
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

CsvReader::CsvReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) {
        throw Error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in_, line)) {
        throw Error(path.string() + ": missing header row");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    split_csv_line(line, header_);
    line_number_ = 1;
}

bool CsvReader::next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_number_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        split_csv_line(line, fields);
        return true;
    }
    return false;
}

void CsvReader::require_header(const std::vector<std::string>& expected) const {
    if (header_ == expected) return;
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i) want += ',';
        want += expected[i];
    }
    std::string got;
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (i) got += ',';
        got += header_[i];
    }
    throw Error(path_.string() + ": header mismatch, expected \"" + want + "\" but found \"" + got + "\"");
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) {
        throw Error("cannot write " + path.string());
    }
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
    if (!out_) throw Error("write failure on " + path_.string());
}

void CsvWriter::close() {
    out_.close();
    if (out_.fail()) throw Error("close failure on " + path_.string());
}

std::int64_t parse_int64(const std::string& token, const std::string& context) {
    std::int64_t value = 0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || token.empty()) {
        throw Error(context + ": expected an integer, found \"" + token + "\"");
    }
    return value;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::uint64_t hash = 1469598103934665603ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const auto n = static_cast<std::size_t>(in.gcount());
        for (std::size_t i = 0; i < n; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ull;
        }
        if (!in) break;
    }
    return hash;
}

}  // namespace pclv
