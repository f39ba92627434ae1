#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace drnn {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat key/value configuration with INI-style sections:
//
//   # comment
//   [train]
//   learning_rate = 0.001
//
// Keys are addressed as "section.key" ("key" alone for entries before any
// section header). '#' starts a comment anywhere on a line; values therefore
// cannot contain '#'. Duplicate keys keep the last value. Typed getters track
// which keys were consumed so a caller can reject unknown (misspelled) keys.
struct KvConfig {
    static KvConfig parse(std::istream& is);
    static KvConfig parse_string(const std::string& text);
    static KvConfig load_file(const std::string& path);

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    double get_real(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Required variants (ConfigError when missing).
    std::string require_string(const std::string& key) const;
    std::uint64_t require_uint(const std::string& key) const;

    // Keys present but never read by any getter.
    std::vector<std::string> unused_keys() const;

    // All entries, sorted by key, as "key = value" lines.
    std::string dump() const;

    std::map<std::string, std::string> values;
    mutable std::set<std::string> accessed;
};

} // namespace drnn
