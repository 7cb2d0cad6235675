#include "csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace bsdiag::app {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.emplace_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::istream& in, std::string source) {
    CsvTable table;
    table.source = std::move(source);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split(line);
        if (table.header.empty()) {
            for (std::size_t j = 0; j < cells.size(); ++j) {
                if (cells[j].empty())
                    throw ValidationError(table.source + ":" + std::to_string(lineno) + ": empty name in header column " +
                                          std::to_string(j + 1));
                if (std::count(cells.begin(), cells.begin() + j, cells[j]) > 0)
                    throw ValidationError(table.source + ":" + std::to_string(lineno) + ": duplicate column '" +
                                          cells[j] + "'");
            }
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size())
            throw ValidationError(table.source + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, found " +
                                  std::to_string(cells.size()));
        table.rows.push_back(std::move(cells));
        table.lines.push_back(lineno);
    }
    if (in.bad()) throw IoError(table.source + ": read error");
    if (table.header.empty()) throw ValidationError(table.source + ": no header line");
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return parse_csv(in, path.string());
}

Dataset to_dataset(const CsvTable& table, const std::string& response,
                   const std::vector<std::string>& covariates) {
    auto locate = [&](const std::string& name, const char* role) {
        const auto j = table.column(name);
        if (!j) throw ValidationError(table.source + ": " + role + " column '" + name + "' not found");
        return *j;
    };
    const std::size_t yj = locate(response, "response");
    std::vector<std::size_t> xj;
    for (const auto& c : covariates) xj.push_back(locate(c, "covariate"));

    auto number = [&](std::size_t row, std::size_t col) {
        const std::string& cell = table.rows[row][col];
        double v = 0.0;
        const char* end = cell.data() + cell.size();
        const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
        if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
            throw ValidationError(table.source + ":" + std::to_string(table.lines[row]) + ": column '" +
                                  table.header[col] + "': expected a number, found '" + cell + "'");
        return v;
    };

    const std::size_t n = table.rows.size();
    Vector y(n);
    DenseMatrix x(n, xj.size());
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = number(i, yj);
        for (std::size_t k = 0; k < xj.size(); ++k) x(i, k) = number(i, xj[k]);
    }
    return Dataset(std::move(y), covariates, std::move(x));
}

std::string format_number(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_number(row[j]);
        out << '\n';
    }
}

}  // namespace bsdiag::app
