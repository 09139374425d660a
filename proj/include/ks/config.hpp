#ifndef KS_CONFIG_HPP
#define KS_CONFIG_HPP

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ks/errors.hpp"
#include "ks/grid.hpp"
#include "ks/hash.hpp"
#include "ks/kernel.hpp"

namespace ks {

// INI-style run configuration: [section] headers, key = value lines, '#' or
// ';' comments. One level deep by design.
class RunConfig {
public:
    static RunConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        require(in.good(), errc::config_parse_error, "cannot open config " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    static RunConfig parse(const std::string& text) {
        RunConfig cfg;
        std::string section;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = trim(strip_comment(line));
            if (t.empty()) continue;
            if (t.front() == '[') {
                require(t.back() == ']', errc::config_parse_error,
                        "bad section header at line " + std::to_string(lineno));
                section = trim(t.substr(1, t.size() - 2));
                require(!section.empty(), errc::config_parse_error,
                        "empty section name at line " + std::to_string(lineno));
                continue;
            }
            const auto eq = t.find('=');
            require(eq != std::string::npos, errc::config_parse_error,
                    "expected key = value at line " + std::to_string(lineno));
            require(!section.empty(), errc::config_parse_error,
                    "key outside any section at line " + std::to_string(lineno));
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            require(!key.empty(), errc::config_parse_error,
                    "empty key at line " + std::to_string(lineno));
            cfg.values_[section][key] = value;
        }
        return cfg;
    }

    // "section.key=value"
    void apply_override(const std::string& setting) {
        const auto dot = setting.find('.');
        const auto eq = setting.find('=');
        require(dot != std::string::npos && eq != std::string::npos && dot < eq,
                errc::config_parse_error, "override must be section.key=value: " + setting);
        values_[trim(setting.substr(0, dot))][trim(setting.substr(dot + 1, eq - dot - 1))] =
            trim(setting.substr(eq + 1));
    }

    bool has(const std::string& section, const std::string& key) const {
        const auto s = values_.find(section);
        return s != values_.end() && s->second.count(key) > 0;
    }

    std::string get(const std::string& section, const std::string& key) const {
        const auto s = values_.find(section);
        require(s != values_.end() && s->second.count(key) > 0, errc::config_parse_error,
                "missing config value " + section + "." + key);
        return s->second.at(key);
    }

    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const {
        return has(section, key) ? get(section, key) : fallback;
    }

    double get_double(const std::string& section, const std::string& key) const {
        return to_double(get(section, key), section + "." + key);
    }

    double get_double_or(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? get_double(section, key) : fallback;
    }

    long get_int_or(const std::string& section, const std::string& key, long fallback) const {
        if (!has(section, key)) return fallback;
        const std::string v = get(section, key);
        char* end = nullptr;
        const long out = std::strtol(v.c_str(), &end, 10);
        require(end && *end == '\0', errc::config_parse_error,
                "bad integer for " + section + "." + key + ": " + v);
        return out;
    }

    std::vector<double> get_double_list_or(const std::string& section, const std::string& key,
                                           std::vector<double> fallback) const {
        if (!has(section, key)) return fallback;
        std::vector<double> out;
        std::istringstream in(get(section, key));
        std::string item;
        while (std::getline(in, item, ',')) out.push_back(to_double(trim(item), section + "." + key));
        return out;
    }

    std::vector<int> get_int_list_or(const std::string& section, const std::string& key,
                                     std::vector<int> fallback) const {
        if (!has(section, key)) return fallback;
        std::vector<int> out;
        for (double v : get_double_list_or(section, key, {})) out.push_back(static_cast<int>(v));
        return out;
    }

    // order-normalized serialization: sections and keys sorted, one
    // section.key=value per line; the fingerprint is its hash
    std::string canonical() const {
        std::string out;
        for (const auto& [section, kv] : values_)
            for (const auto& [key, value] : kv) out += section + "." + key + "=" + value + "\n";
        return out;
    }

    std::string fingerprint() const { return fingerprint_of(canonical()); }

private:
    static std::string strip_comment(const std::string& s) {
        const auto pos = s.find_first_of("#;");
        return pos == std::string::npos ? s : s.substr(0, pos);
    }

    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    static double to_double(const std::string& v, const std::string& what) {
        char* end = nullptr;
        const double out = std::strtod(v.c_str(), &end);
        require(end && *end == '\0' && !v.empty(), errc::config_parse_error,
                "bad number for " + what + ": " + v);
        return out;
    }

    std::map<std::string, std::map<std::string, std::string>> values_;
};

// [kernel] section -> KernelSpec
inline KernelSpec kernel_from_config(const RunConfig& cfg) {
    const std::string family = cfg.get("kernel", "family");
    const int N = static_cast<int>(cfg.get_int_or("kernel", "dimension", 2));
    const double scale = cfg.get_double_or("kernel", "scale", 1.0);
    if (family == "fractional")
        return KernelSpec::fractional(cfg.get_double("kernel", "s"), N, scale);
    if (family == "log_corrected")
        return KernelSpec::log_corrected(cfg.get_double("kernel", "s0"),
                                         cfg.get_double("kernel", "sigma"), N, scale);
    if (family == "lacunary")
        return KernelSpec::lacunary(cfg.get_double("kernel", "s"),
                                    cfg.get_double("kernel", "a0"), N, scale);
    if (family == "tabulated") {
        const std::string path = cfg.get("kernel", "table_file");
        std::ifstream in(path);
        require(in.good(), errc::config_parse_error, "cannot open kernel table " + path);
        std::vector<std::pair<double, double>> samples;
        double r = 0.0, v = 0.0;
        while (in >> r >> v) samples.push_back({r, v});
        return KernelSpec::tabulated(std::move(samples), N, scale);
    }
    fail(errc::config_parse_error, "unknown kernel family: " + family);
}

// [domain] section -> Grid
inline GridPtr domain_from_config(const RunConfig& cfg) {
    const std::string shape = cfg.get_or("domain", "shape", "square");
    const double size = cfg.get_double_or("domain", "size", 1.0);
    const int resolution = static_cast<int>(cfg.get_int_or("domain", "resolution", 17));
    if (shape == "square") return make_domain(DomainShape::square, size, resolution);
    if (shape == "disk") return make_domain(DomainShape::disk, size, resolution);
    fail(errc::config_parse_error, "unknown domain shape: " + shape);
}

} // namespace ks

#endif
