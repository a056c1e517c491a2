#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mfl {

// Minimal TOML subset: [section] headers, `key = value` pairs, values of kind
// bool / integer / float / "string" / single-line homogeneous array.  Comments
// start with '#'.  Keys are stored flattened as "section.key".  All parse and
// lookup failures throw ConfigError carrying the 1-based source line.
struct TomlValue {
    enum class Kind { boolean, integer, real, string, array };
    Kind kind = Kind::integer;
    bool b = false;
    std::int64_t i = 0;
    double f = 0.0;
    std::string s;
    std::vector<TomlValue> arr;
    int line = 0;

    double as_f64() const;        // integer or real
    std::int64_t as_i64() const;  // integer only
};

class TomlTable {
  public:
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    double get_f64(const std::string& key) const;
    double get_f64_or(const std::string& key, double dflt) const;
    std::int64_t get_i64(const std::string& key) const;
    std::int64_t get_i64_or(const std::string& key, std::int64_t dflt) const;
    bool get_bool_or(const std::string& key, bool dflt) const;
    std::string get_str(const std::string& key) const;
    std::string get_str_or(const std::string& key, const std::string& dflt) const;
    std::vector<double> get_f64_array(const std::string& key) const;
    std::vector<std::int64_t> get_i64_array(const std::string& key) const;
    std::vector<std::string> get_str_array(const std::string& key) const;

    int line_of(const std::string& key) const;  // 0 if absent
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    void set(const std::string& key, TomlValue v) { kv_[key] = std::move(v); }

  private:
    const TomlValue& require(const std::string& key) const;
    std::map<std::string, TomlValue> kv_;
};

TomlTable parse_toml_string(const std::string& text);
TomlTable parse_toml_file(const std::string& path);

}  // namespace mfl
