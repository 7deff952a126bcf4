#include "envagent/csv.hpp"

#include "envagent/common.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

namespace envagent {

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> columns) : out_(out), columns_(std::move(columns)) {
    if (columns_.empty()) throw ShapeError("csv: header needs at least one column");
    for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << escape_csv(columns_[i]);
    out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_.size()) {
        throw ShapeError("csv: row has " + std::to_string(fields.size()) + " fields, header has " +
                         std::to_string(columns_.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << escape_csv(fields[i]);
    out_ << '\n';
    ++rows_;
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string escape_csv(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ShapeError("csv: no column named '" + std::string(name) + "'");
}

namespace {

bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false;
    char c = 0;
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return true;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
    CsvTable t;
    if (!read_record(in, t.header)) throw ShapeError("csv: empty input");
    std::vector<std::string> fields;
    while (read_record(in, fields)) {
        if (fields.size() != t.header.size()) throw ShapeError("csv: ragged row");
        t.rows.push_back(fields);
    }
    return t;
}

}  // namespace envagent
