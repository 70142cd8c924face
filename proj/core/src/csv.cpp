#include "lungcam/csv.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "lungcam/error.hpp"
#include "lungcam/files.hpp"
#include "lungcam/kv_text.hpp"

namespace lungcam {

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) {
        throw ArgumentError("CSV row has " + std::to_string(row.size()) + " fields, header has " +
                            std::to_string(header_.size()));
    }
    rows_.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
        if (header_[i] == name) return i;
    throw FormatError(origin_ + ": missing column '" + name + "'");
}

const std::string& CsvTable::at(std::size_t row, const std::string& name) const { return rows_.at(row)[column(name)]; }

std::string CsvTable::to_string() const {
    std::string out;
    auto emit = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out.push_back(',');
            out += fields[i];
        }
        out.push_back('\n');
    };
    emit(header_);
    for (const auto& r : rows_) emit(r);
    return out;
}

void CsvTable::save(const std::filesystem::path& path) const { write_file_atomic(path, to_string()); }

CsvTable CsvTable::parse(const std::string& text, const std::string& origin) {
    CsvTable t;
    t.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line, ',');
        for (auto& f : fields) f = trim(f);
        if (first) {
            t.header_ = std::move(fields);
            first = false;
            continue;
        }
        if (fields.size() != t.header_.size()) {
            throw FormatError(origin + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(t.header_.size()) + " fields");
        }
        t.rows_.push_back(std::move(fields));
    }
    if (first) throw FormatError(origin + ": empty CSV");
    return t;
}

CsvTable CsvTable::load(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

}  // namespace lungcam
