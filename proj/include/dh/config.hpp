#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace dh {

/// `key=value` lines, '#' starts a comment, blank lines ignored.
/// Keys outside `allowed` are rejected with the offending line number.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(std::string_view text, const std::set<std::string>& allowed);
    static KeyValueConfig load(const std::filesystem::path& path, const std::set<std::string>& allowed);

    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;

private:
    std::map<std::string, std::string> values_;
};

/// Writes `values` as sorted key=value lines.
std::string format_key_values(const std::map<std::string, std::string>& values);

}  // namespace dh
