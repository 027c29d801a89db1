#include "cpmiss/config.hpp"

#include "cpmiss/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cpmiss {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Drops a trailing '#' comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_string && c == '\\') {
            ++i;
        } else if (c == '"') {
            in_string = !in_string;
        } else if (c == '#' && !in_string) {
            return line.substr(0, i);
        }
    }
    return line;
}

bool is_number(std::string_view s) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size();
}

ConfigValue parse_value(std::string_view text, bool allow_bare);

std::vector<std::string_view> split_array_items(std::string_view body) {
    std::vector<std::string_view> items;
    bool in_string = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if (in_string && c == '\\') {
            ++i;
        } else if (c == '"') {
            in_string = !in_string;
        } else if (c == ',' && !in_string) {
            items.push_back(trim(body.substr(start, i - start)));
            start = i + 1;
        }
    }
    const auto last = trim(body.substr(start));
    if (!last.empty()) items.push_back(last);
    return items;
}

ConfigValue parse_value(std::string_view text, bool allow_bare) {
    text = trim(text);
    ConfigValue v;
    if (text.empty()) throw ConfigError("missing value");
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"') throw ConfigError("unterminated string: " + std::string(text));
        v.kind = ConfigValue::Kind::String;
        for (std::size_t i = 1; i + 1 < text.size(); ++i) {
            char c = text[i];
            if (c == '\\' && i + 2 < text.size()) {
                c = text[++i];
                if (c == 'n') c = '\n';
                if (c == 't') c = '\t';
            }
            v.text.push_back(c);
        }
        return v;
    }
    if (text.front() == '[') {
        if (text.back() != ']') throw ConfigError("unterminated array: " + std::string(text));
        v.kind = ConfigValue::Kind::Array;
        for (auto item : split_array_items(text.substr(1, text.size() - 2))) {
            auto parsed = parse_value(item, allow_bare);
            if (parsed.kind == ConfigValue::Kind::Array) throw ConfigError("nested arrays are not supported");
            v.items.push_back(std::move(parsed));
        }
        return v;
    }
    if (text == "true" || text == "false") {
        v.kind = ConfigValue::Kind::Bool;
        v.boolean = text == "true";
        v.text = std::string(text);
        return v;
    }
    if (is_number(text)) {
        v.kind = ConfigValue::Kind::Number;
        v.text = std::string(text.front() == '+' ? text.substr(1) : text);
        return v;
    }
    if (!allow_bare) throw ConfigError("cannot parse value '" + std::string(text) + "' (strings need quotes)");
    v.kind = ConfigValue::Kind::String;
    v.text = std::string(text);
    return v;
}

std::string type_error(const std::string& key, const char* expected) {
    return "config key '" + key + "' must be " + expected;
}

} // namespace

double ConfigValue::as_double(const std::string& key) const {
    if (kind != Kind::Number) throw ConfigError(type_error(key, "a number"));
    double v = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), v);
    return v;
}

std::uint64_t ConfigValue::as_uint(const std::string& key) const {
    if (kind != Kind::Number) throw ConfigError(type_error(key, "a non-negative integer"));
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        // allow integral floating literals such as 1e5
        const double d = as_double(key);
        if (d >= 0.0 && d < 1.8e19 && std::floor(d) == d) return static_cast<std::uint64_t>(d);
        throw ConfigError(type_error(key, "a non-negative integer"));
    }
    return v;
}

std::string ConfigValue::as_string(const std::string& key) const {
    if (kind != Kind::String) throw ConfigError(type_error(key, "a string"));
    return text;
}

bool ConfigValue::as_bool(const std::string& key) const {
    if (kind != Kind::Bool) throw ConfigError(type_error(key, "true or false"));
    return boolean;
}

std::vector<double> ConfigValue::as_doubles(const std::string& key) const {
    if (kind != Kind::Array) throw ConfigError(type_error(key, "an array of numbers"));
    std::vector<double> out;
    for (const auto& item : items) out.push_back(item.as_double(key));
    return out;
}

std::vector<std::size_t> ConfigValue::as_indices(const std::string& key) const {
    if (kind != Kind::Array) throw ConfigError(type_error(key, "an array of indices"));
    std::vector<std::size_t> out;
    for (const auto& item : items) out.push_back(static_cast<std::size_t>(item.as_uint(key)));
    return out;
}

std::vector<std::string> ConfigValue::as_strings(const std::string& key) const {
    std::vector<std::string> out;
    if (kind == Kind::String) {
        // comma-separated shorthand, as given on the command line
        std::string_view rest = text;
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const auto item = trim(rest.substr(0, comma));
            if (!item.empty()) out.emplace_back(item);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        return out;
    }
    if (kind != Kind::Array) throw ConfigError(type_error(key, "an array of strings"));
    for (const auto& item : items) out.push_back(item.as_string(key));
    return out;
}

ConfigFile ConfigFile::parse(std::string_view text) {
    ConfigFile file;
    std::string section;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        line = trim(strip_comment(line));
        if (line.empty()) continue;
        try {
            if (line.front() == '[') {
                if (line.back() != ']') throw ConfigError("malformed section header");
                section = std::string(trim(line.substr(1, line.size() - 2)));
                if (section.empty()) throw ConfigError("empty section name");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'");
            const auto key = trim(line.substr(0, eq));
            if (key.empty()) throw ConfigError("empty key");
            const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
            if (file.entries_.count(full)) throw ConfigError("duplicate key '" + full + "'");
            file.entries_[full] = parse_value(line.substr(eq + 1), false);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return file;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void ConfigFile::set(const std::string& key, std::string_view value_text) {
    if (key.empty()) throw ConfigError("empty override key");
    entries_[key] = parse_value(value_text, true);
}

const ConfigValue* ConfigFile::find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

ExperimentConfig experiment_from_config(const ConfigFile& file) {
    static const std::set<std::string> known = {
        "experiment.reps", "experiment.seed", "experiment.alpha", "experiment.rho", "experiment.methods",
        "experiment.grouping", "experiment.workers", "experiment.include_all_missing_group",
        "experiment.group_attempt_budget",
        "sizes.train", "sizes.calib", "sizes.test_marginal", "sizes.test_per_group",
        "dgp.d", "dgp.beta", "dgp.mu", "dgp.phi", "dgp.noise_sd",
        "ampute.mechanism", "ampute.rate", "ampute.maskable", "ampute.mnar_steepness", "ampute.pilot_size",
    };
    for (const auto& [key, value] : file.entries()) {
        if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    auto get = [&](const std::string& key) { return file.find(key); };

    std::size_t d = 3;
    if (auto v = get("dgp.d")) d = static_cast<std::size_t>(v->as_uint("dgp.d"));
    if (d == 0) throw ConfigError("dgp.d must be >= 1");
    Mechanism mechanism = Mechanism::MCAR;
    if (auto v = get("ampute.mechanism")) mechanism = parse_mechanism(v->as_string("ampute.mechanism"));

    ExperimentConfig cfg;
    if (d <= 8) {
        cfg = ExperimentConfig::benchmark(d, mechanism);
    } else {
        cfg.dgp.d = d;
        cfg.dgp.mu.assign(d, 1.0);
        cfg.dgp.beta.clear();  // must be supplied
        cfg.ampute = AmputeConfig::benchmark(mechanism, d);
        cfg.grouping = Grouping::ByPatternSize;
    }

    if (auto v = get("experiment.reps")) cfg.reps = static_cast<std::size_t>(v->as_uint("experiment.reps"));
    if (auto v = get("experiment.seed")) cfg.master_seed = v->as_uint("experiment.seed");
    if (auto v = get("experiment.alpha")) cfg.alpha = v->as_double("experiment.alpha");
    if (auto v = get("experiment.rho")) cfg.rho = v->as_double("experiment.rho");
    if (auto v = get("experiment.methods")) {
        cfg.methods.clear();
        for (const auto& name : v->as_strings("experiment.methods")) {
            const Method m = parse_method(name);
            if (std::find(cfg.methods.begin(), cfg.methods.end(), m) == cfg.methods.end()) cfg.methods.push_back(m);
        }
    }
    if (auto v = get("experiment.grouping")) cfg.grouping = parse_grouping(v->as_string("experiment.grouping"));
    if (auto v = get("experiment.workers")) cfg.workers = static_cast<std::size_t>(v->as_uint("experiment.workers"));
    if (auto v = get("experiment.include_all_missing_group")) {
        cfg.include_all_missing_group = v->as_bool("experiment.include_all_missing_group");
    }
    if (auto v = get("experiment.group_attempt_budget")) {
        cfg.group_attempt_budget = static_cast<std::size_t>(v->as_uint("experiment.group_attempt_budget"));
    }

    if (auto v = get("sizes.train")) cfg.sizes.n_train = static_cast<std::size_t>(v->as_uint("sizes.train"));
    if (auto v = get("sizes.calib")) cfg.sizes.n_calib = static_cast<std::size_t>(v->as_uint("sizes.calib"));
    if (auto v = get("sizes.test_marginal")) {
        cfg.sizes.n_test_marginal = static_cast<std::size_t>(v->as_uint("sizes.test_marginal"));
    }
    if (auto v = get("sizes.test_per_group")) {
        cfg.sizes.n_test_per_group = static_cast<std::size_t>(v->as_uint("sizes.test_per_group"));
    }

    if (auto v = get("dgp.beta")) cfg.dgp.beta = v->as_doubles("dgp.beta");
    if (auto v = get("dgp.mu")) cfg.dgp.mu = v->as_doubles("dgp.mu");
    if (auto v = get("dgp.phi")) cfg.dgp.phi = v->as_double("dgp.phi");
    if (auto v = get("dgp.noise_sd")) cfg.dgp.noise_sd = v->as_double("dgp.noise_sd");

    if (auto v = get("ampute.rate")) cfg.ampute.rate = v->as_double("ampute.rate");
    if (auto v = get("ampute.maskable")) cfg.ampute.maskable_columns = v->as_indices("ampute.maskable");
    if (auto v = get("ampute.mnar_steepness")) cfg.ampute.mnar_steepness = v->as_double("ampute.mnar_steepness");
    if (auto v = get("ampute.pilot_size")) cfg.pilot_size = static_cast<std::size_t>(v->as_uint("ampute.pilot_size"));

    cfg.validate();
    return cfg;
}

} // namespace cpmiss
