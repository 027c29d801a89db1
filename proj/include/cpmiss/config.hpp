#pragma once

#include "cpmiss/harness.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cpmiss {

/// One value of the config file: number, string, boolean or a flat array.
struct ConfigValue {
    enum class Kind { Number, String, Bool, Array };
    Kind kind = Kind::String;
    std::string text;  // number literal or string contents
    bool boolean = false;
    std::vector<ConfigValue> items;

    double as_double(const std::string& key) const;
    std::uint64_t as_uint(const std::string& key) const;
    std::string as_string(const std::string& key) const;
    bool as_bool(const std::string& key) const;
    std::vector<double> as_doubles(const std::string& key) const;
    std::vector<std::size_t> as_indices(const std::string& key) const;
    std::vector<std::string> as_strings(const std::string& key) const;
};

/// Key/value file with [sections], in the style of TOML:
///
///     # comment
///     [experiment]
///     reps = 25
///     methods = ["cp", "nexcp", "lcp"]
///
/// Keys are addressed as "section.key". Only flat arrays are supported.
class ConfigFile {
public:
    static ConfigFile parse(std::string_view text);
    static ConfigFile load(const std::filesystem::path& path);

    /// Overrides (or adds) `key` with a value written in config syntax; bare
    /// words are taken as strings.
    void set(const std::string& key, std::string_view value_text);

    const ConfigValue* find(const std::string& key) const;
    const std::map<std::string, ConfigValue>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, ConfigValue> entries_;
};

/// Builds an experiment from a config. Missing keys keep the benchmark
/// defaults for the configured dimension and mechanism. Unknown keys are
/// rejected with ConfigError.
ExperimentConfig experiment_from_config(const ConfigFile& file);

} // namespace cpmiss
