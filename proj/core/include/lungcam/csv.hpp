#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lungcam {

/// Shortest decimal text that round-trips the double exactly.
std::string format_number(double v);
/// Fixed-precision text (used where human-readable output is wanted).
std::string format_fixed(double v, int digits);

/// Comma-separated table with a header row, LF line endings. Fields must not
/// contain commas or newlines.
class CsvTable {
public:
    CsvTable() = default;
    explicit CsvTable(std::vector<std::string> header);

    void add_row(std::vector<std::string> row);

    const std::vector<std::string>& header() const { return header_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }

    /// Column index by name; throws FormatError if absent.
    std::size_t column(const std::string& name) const;
    const std::string& at(std::size_t row, const std::string& name) const;

    std::string to_string() const;
    void save(const std::filesystem::path& path) const;  // atomic
    static CsvTable parse(const std::string& text, const std::string& origin = "<csv>");
    static CsvTable load(const std::filesystem::path& path);

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::string origin_;
};

}  // namespace lungcam
