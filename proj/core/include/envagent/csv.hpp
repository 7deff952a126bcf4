#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace envagent {

/// Writes a header once, then rows that must match it column for column.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, std::vector<std::string> columns);

    /// Throws ShapeError when the field count differs from the header.
    void row(const std::vector<std::string>& fields);

    [[nodiscard]] const std::vector<std::string>& columns() const { return columns_; }
    [[nodiscard]] std::size_t rows_written() const { return rows_; }

private:
    std::ostream& out_;
    std::vector<std::string> columns_;
    std::size_t rows_ = 0;
};

/// Shortest-roundtrip-safe formatting ("%.17g").
std::string format_double(double x);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape_csv(std::string_view field);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of `name` in the header; throws ShapeError if missing.
    [[nodiscard]] std::size_t column(std::string_view name) const;
};

/// Minimal reader for files produced by CsvWriter (RFC 4180 quoting).
CsvTable read_csv(std::istream& in);

}  // namespace envagent
