#include "lungcam/kv_text.hpp"

#include <charconv>
#include <sstream>

#include "lungcam/error.hpp"
#include "lungcam/files.hpp"

namespace lungcam {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    double value = 0.0;
    const auto* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, value);
    if (t.empty() || ec != std::errc() || ptr != end) {
        throw FormatError("cannot parse " + what + " from '" + text + "'");
    }
    return value;
}

long long parse_int(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    long long value = 0;
    const auto* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, value);
    if (t.empty() || ec != std::errc() || ptr != end) {
        throw FormatError("cannot parse integer " + what + " from '" + text + "'");
    }
    return value;
}

KeyValueText KeyValueText::parse(const std::string& text, const std::string& origin) {
    KeyValueText kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto colon = t.find(':');
        if (colon == std::string::npos || colon == 0) {
            throw FormatError(origin + ":" + std::to_string(line_no) + ": expected 'key: value'");
        }
        kv.values_[trim(std::string_view(t).substr(0, colon))] = trim(std::string_view(t).substr(colon + 1));
    }
    return kv;
}

KeyValueText KeyValueText::load(const std::filesystem::path& path) {
    return parse(read_file(path), path.string());
}

const std::string& KeyValueText::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw FormatError(origin_ + ": missing key '" + key + "'");
    return it->second;
}

std::string KeyValueText::get_or(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

void KeyValueText::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

std::vector<std::string> KeyValueText::fields(const std::string& key) const {
    std::istringstream in(get(key));
    std::vector<std::string> out;
    std::string f;
    while (in >> f) out.push_back(f);
    return out;
}

}  // namespace lungcam
