#pragma once

#include "bsdiag/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bsdiag::app {

/// Unreadable input or unwritable output.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input that was read but is not acceptable: bad CSV cells, unknown columns, bad flags.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsvTable {
    std::string source;  // file name used in diagnostics
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // 1-based source line of each row

    std::optional<std::size_t> column(std::string_view name) const;
};

/// Comma-separated, header first, no quoting. Blank lines are skipped.
CsvTable parse_csv(std::istream& in, std::string source);
CsvTable read_csv(const std::filesystem::path& path);

/// Builds a Dataset from the response column and the listed covariates.
/// Every used cell must parse as a finite number.
Dataset to_dataset(const CsvTable& table, const std::string& response,
                   const std::vector<std::string>& covariates);

/// Shortest text that reads back to the same double.
std::string format_number(double v);

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace bsdiag::app
