#pragma once

// Flat INI-style configuration: [section] headers, key = value lines,
// '#' or ';' comments. Keys are addressed as "section.key".

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace geobound {

inline std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<config>") {
        Config cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = trim(line);
            if (line.empty() || line[0] == '#' || line[0] == ';') continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            cfg.set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
        }
        return cfg;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path.string());
    }

    /// Applies "section.key=value".
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override '" + assignment + "' must look like section.key=value");
        set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
    }

    void set(const std::string& key, const std::string& value) {
        if (!values_.count(key)) order_.push_back(key);
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing required config key " + key);
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        return has(key) ? to_double(key, values_.at(key)) : fallback;
    }

    long long get_int(const std::string& key, long long fallback) const {
        return has(key) ? to_int(key, values_.at(key)) : fallback;
    }

    std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
        if (!has(key)) return fallback;
        std::vector<double> out;
        for (const auto& item : split_list(values_.at(key))) out.push_back(to_double(key, item));
        return out;
    }

    std::vector<long long> get_ints(const std::string& key, std::vector<long long> fallback) const {
        if (!has(key)) return fallback;
        std::vector<long long> out;
        for (const auto& item : split_list(values_.at(key))) out.push_back(to_int(key, item));
        return out;
    }

    std::vector<std::string> get_strings(const std::string& key) const {
        return has(key) ? split_list(values_.at(key)) : std::vector<std::string>{};
    }

    /// Resolved configuration, grouped by section in first-seen order.
    std::string echo() const {
        std::vector<std::string> sections;
        std::map<std::string, std::vector<std::string>> keys;
        for (const auto& k : order_) {
            const auto dot = k.find('.');
            const std::string sec = dot == std::string::npos ? "" : k.substr(0, dot);
            if (!keys.count(sec)) sections.push_back(sec);
            keys[sec].push_back(k);
        }
        std::string out;
        for (const auto& sec : sections) {
            if (!sec.empty()) out += "[" + sec + "]\n";
            for (const auto& k : keys[sec]) {
                const std::string name = sec.empty() ? k : k.substr(sec.size() + 1);
                out += name + " = " + values_.at(k) + "\n";
            }
        }
        return out;
    }

    const std::vector<std::string>& keys() const { return order_; }

private:
    static std::vector<std::string> split_list(const std::string& s) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream ss(s);
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    static double to_double(const std::string& key, const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": '" + s + "' is not a number");
        }
    }

    static long long to_int(const std::string& key, const std::string& s) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": '" + s + "' is not an integer");
        }
    }

    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

}  // namespace geobound
