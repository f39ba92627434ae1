#include "drnn/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <system_error>

namespace drnn {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

} // namespace

KvConfig KvConfig::parse(std::istream& is) {
    KvConfig cfg;
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        cfg.values[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

KvConfig KvConfig::parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
}

KvConfig KvConfig::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    return parse(is);
}

bool KvConfig::has(const std::string& key) const { return values.count(key) != 0; }

void KvConfig::set(const std::string& key, const std::string& value) { values[key] = value; }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    accessed.insert(key);
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
    accessed.insert(key);
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    long long v = 0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc() || res.ptr != it->second.data() + it->second.size())
        throw ConfigError("key '" + key + "': not an integer: '" + it->second + "'");
    return v;
}

std::uint64_t KvConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
    accessed.insert(key);
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    std::uint64_t v = 0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc() || res.ptr != it->second.data() + it->second.size())
        throw ConfigError("key '" + key + "': not a nonnegative integer: '" + it->second + "'");
    return v;
}

double KvConfig::get_real(const std::string& key, double fallback) const {
    accessed.insert(key);
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    double v = 0.0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc() || res.ptr != it->second.data() + it->second.size())
        throw ConfigError("key '" + key + "': not a real number: '" + it->second + "'");
    return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    accessed.insert(key);
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    const std::string& s = it->second;
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ConfigError("key '" + key + "': not a boolean: '" + s + "'");
}

std::string KvConfig::require_string(const std::string& key) const {
    accessed.insert(key);
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
}

std::uint64_t KvConfig::require_uint(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing required key '" + key + "'");
    return get_uint(key, 0);
}

std::vector<std::string> KvConfig::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values)
        if (accessed.count(k) == 0) out.push_back(k);
    return out;
}

std::string KvConfig::dump() const {
    std::string out;
    for (const auto& [k, v] : values) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

} // namespace drnn
