#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lungcam {

/// Ordered `key: value` text document. Blank lines and lines starting with
/// '#' are ignored. Later duplicates overwrite earlier ones.
class KeyValueText {
public:
    static KeyValueText parse(const std::string& text, const std::string& origin = "<text>");
    static KeyValueText load(const std::filesystem::path& path);

    bool contains(const std::string& key) const { return values_.contains(key); }
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    void set(const std::string& key, std::string value);

    /// Whitespace-separated fields of a value.
    std::vector<std::string> fields(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    const std::string& origin() const { return origin_; }

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace lungcam
