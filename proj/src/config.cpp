#include "dh/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dh/errors.hpp"

namespace dh {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, const std::set<std::string>& allowed) {
    KeyValueConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw InvalidArgument("config line " + std::to_string(line_no) + ": empty key");
        if (!allowed.count(key)) {
            throw InvalidArgument("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path, const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), allowed);
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument("config key '" + key + "': '" + it->second + "' is not a number");
    }
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw InvalidArgument("config key '" + key + "': '" + s + "' is not a non-negative integer");
    }
    return v;
}

std::string format_key_values(const std::map<std::string, std::string>& values) {
    std::string out;
    for (const auto& [k, v] : values) out += k + "=" + v + "\n";
    return out;
}

}  // namespace dh
