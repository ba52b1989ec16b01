#pragma once

// CSV tables as written by the command-line tool: a header line, comma-separated rows, LF line endings,
// numbers in shortest round-trip form with '.' as decimal point (locale independent), and an optional
// final comment line `# {json}` carrying run metadata.

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <type_traits>
#include <vector>

#include <json.hpp>

namespace bnav {

class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_number(long long v) { return std::to_string(v); }
inline std::string format_number(int v) { return std::to_string(v); }
inline std::string format_number(std::size_t v) { return std::to_string(v); }

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    nlohmann::json footer;  // null when absent

    [[nodiscard]] int column(const std::string &name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        throw CsvError("csv: no column '" + name + "'");
    }
    [[nodiscard]] const std::string &cell(std::size_t row, const std::string &name) const {
        return rows.at(row).at(static_cast<std::size_t>(column(name)));
    }
    [[nodiscard]] double number(std::size_t row, const std::string &name) const {
        const std::string &s = cell(row, name);
        if (s == "nan") return std::nan("");
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            throw CsvError("csv: '" + s + "' in column '" + name + "' is not a number");
        }
        return v;
    }
};

class CsvWriter {
public:
    CsvWriter(std::ostream &out, std::vector<std::string> header) : out_(out), columns_(header.size()) {
        if (header.empty()) throw CsvError("csv: empty header");
        write_line(header);
    }

    template <typename... T>
    void row(const T &...values) {
        std::vector<std::string> cells;
        cells.reserve(sizeof...(T));
        (cells.push_back(to_cell(values)), ...);
        write_line(cells);
    }

    void row_cells(const std::vector<std::string> &cells) { write_line(cells); }

    void footer(const nlohmann::json &meta) { out_ << "# " << meta.dump() << '\n'; }

private:
    static std::string to_cell(const std::string &s) { return s; }
    static std::string to_cell(const char *s) { return s; }
    static std::string to_cell(bool b) { return b ? "1" : "0"; }
    template <typename N>
    static std::string to_cell(const N &v) {
        if constexpr (std::is_floating_point_v<N>) {
            return format_number(static_cast<double>(v));
        } else {
            return format_number(static_cast<long long>(v));
        }
    }

    void write_line(const std::vector<std::string> &cells) {
        if (cells.size() != columns_) throw CsvError("csv: row width does not match the header");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].find_first_of(",\"\n\r") != std::string::npos) {
                throw CsvError("csv: cell '" + cells[i] + "' contains a separator or quote");
            }
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ostream &out_;
    std::size_t columns_;
};

inline CsvTable parse_csv(const std::string &text) {
    if (text.find('\r') != std::string::npos) throw CsvError("csv: carriage return found, expected LF line endings");
    CsvTable t;
    std::stringstream ss(text);
    std::string line;
    bool footer_seen = false;
    while (std::getline(ss, line)) {
        if (footer_seen) throw CsvError("csv: content after the footer line");
        if (line.rfind("# ", 0) == 0) {
            try {
                t.footer = nlohmann::json::parse(line.substr(2));
            } catch (const nlohmann::json::exception &e) {
                throw CsvError(std::string("csv: bad footer: ") + e.what());
            }
            footer_seen = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            if (cells.size() != t.header.size()) {
                throw CsvError("csv: row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                               " cells, header has " + std::to_string(t.header.size()));
            }
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.header.empty()) throw CsvError("csv: no header line");
    return t;
}

}  // namespace bnav
