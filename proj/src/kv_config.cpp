#include "dseg/kv_config.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dseg::kv {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& v, const char* type) {
    throw std::invalid_argument("config key '" + key + "': '" + v + "' is not a valid " + type);
}

}  // namespace

Map parse(const std::string& text) {
    Map kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        }
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

Map load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

std::string dump(const Map& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

void save(const std::string& path, const Map& kv) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write config file " + path);
    f << dump(kv);
}

void require_known(const Map& kv, const std::set<std::string>& known) {
    for (const auto& [k, v] : kv) {
        if (!known.count(k)) throw std::invalid_argument("unknown config key '" + k + "'");
    }
}

std::string format_bool(bool v) { return v ? "true" : "false"; }

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return {buf, r.ptr};
}

std::string format_float(float v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

std::string Reader::get_string(const std::string& key, const std::string& def) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
}

int Reader::get_int(const std::string& key, int def) const {
    const auto v = get_int64(key, def);
    if (v < INT32_MIN || v > INT32_MAX) bad_value(key, std::to_string(v), "int");
    return static_cast<int>(v);
}

long long Reader::get_int64(const std::string& key, long long def) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    long long v = 0;
    const auto& s = it->second;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) bad_value(key, s, "integer");
    return v;
}

double Reader::get_double(const std::string& key, double def) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) bad_value(key, it->second, "number");
        return v;
    } catch (const std::logic_error&) {
        bad_value(key, it->second, "number");
    }
}

bool Reader::get_bool(const std::string& key, bool def) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    const auto& s = it->second;
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad_value(key, s, "boolean");
}

}  // namespace dseg::kv
