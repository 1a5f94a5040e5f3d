#pragma once

// Flat key-value configuration with dotted keys, e.g.
//
//   # timing
//   asr.final_tail_ms = 350
//   policy.tau = 0.45
//
// Lookup precedence is built by the caller: start from defaults, overlay a
// file, overlay CLI flags. `merge` implements one overlay step.

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "ddtsr/errors.hpp"

namespace ddtsr {

class KeyValueConfig {
public:
    KeyValueConfig() = default;

    /// Parse `key = value` lines. '#' starts a comment; blank lines are
    /// skipped. Throws ConfigError on lines without '=' or with empty keys.
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValueConfig load_file(const std::string& path);

    bool contains(const std::string& key) const { return values_.count(key) > 0; }

    /// Typed getters: return the fallback when the key is absent, throw
    /// ConfigError when it is present but unparseable as the requested type.
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    /// Overlay: entries in `over` win.
    void merge(const KeyValueConfig& over);

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

} // namespace ddtsr
