#pragma once

// Flat `key = value` text configuration. Blank lines and `#` comments are
// ignored; later keys override earlier ones.

#include <map>
#include <set>
#include <string>

namespace dseg::kv {

using Map = std::map<std::string, std::string>;

Map parse(const std::string& text);
Map load(const std::string& path);
std::string dump(const Map& kv);
void save(const std::string& path, const Map& kv);

/// Throws if `kv` holds a key outside `known`.
void require_known(const Map& kv, const std::set<std::string>& known);

std::string format_bool(bool v);
std::string format_double(double v);
std::string format_float(float v);

class Reader {
public:
    explicit Reader(const Map& kv) : kv_(kv) {}
    [[nodiscard]] std::string get_string(const std::string& key, const std::string& def) const;
    [[nodiscard]] int get_int(const std::string& key, int def) const;
    [[nodiscard]] long long get_int64(const std::string& key, long long def) const;
    [[nodiscard]] double get_double(const std::string& key, double def) const;
    [[nodiscard]] bool get_bool(const std::string& key, bool def) const;

private:
    const Map& kv_;
};

}  // namespace dseg::kv
