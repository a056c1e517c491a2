#include "mfl/mini_toml.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mfl/errors.hpp"

namespace mfl {

double TomlValue::as_f64() const {
    if (kind == Kind::real) return f;
    if (kind == Kind::integer) return static_cast<double>(i);
    throw ConfigError("expected a number", line);
}

std::int64_t TomlValue::as_i64() const {
    if (kind == Kind::integer) return i;
    throw ConfigError("expected an integer", line);
}

const TomlValue& TomlTable::require(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
}

double TomlTable::get_f64(const std::string& key) const { return require(key).as_f64(); }

double TomlTable::get_f64_or(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second.as_f64();
}

std::int64_t TomlTable::get_i64(const std::string& key) const { return require(key).as_i64(); }

std::int64_t TomlTable::get_i64_or(const std::string& key, std::int64_t dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second.as_i64();
}

bool TomlTable::get_bool_or(const std::string& key, bool dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    if (it->second.kind != TomlValue::Kind::boolean)
        throw ConfigError("expected a boolean for '" + key + "'", it->second.line);
    return it->second.b;
}

std::string TomlTable::get_str(const std::string& key) const {
    const auto& v = require(key);
    if (v.kind != TomlValue::Kind::string)
        throw ConfigError("expected a string for '" + key + "'", v.line);
    return v.s;
}

std::string TomlTable::get_str_or(const std::string& key, const std::string& dflt) const {
    return has(key) ? get_str(key) : dflt;
}

std::vector<double> TomlTable::get_f64_array(const std::string& key) const {
    const auto& v = require(key);
    if (v.kind != TomlValue::Kind::array)
        throw ConfigError("expected an array for '" + key + "'", v.line);
    std::vector<double> out;
    out.reserve(v.arr.size());
    for (const auto& e : v.arr) out.push_back(e.as_f64());
    return out;
}

std::vector<std::int64_t> TomlTable::get_i64_array(const std::string& key) const {
    const auto& v = require(key);
    if (v.kind != TomlValue::Kind::array)
        throw ConfigError("expected an array for '" + key + "'", v.line);
    std::vector<std::int64_t> out;
    out.reserve(v.arr.size());
    for (const auto& e : v.arr) out.push_back(e.as_i64());
    return out;
}

std::vector<std::string> TomlTable::get_str_array(const std::string& key) const {
    const auto& v = require(key);
    if (v.kind != TomlValue::Kind::array)
        throw ConfigError("expected an array for '" + key + "'", v.line);
    std::vector<std::string> out;
    for (const auto& e : v.arr) {
        if (e.kind != TomlValue::Kind::string)
            throw ConfigError("expected string array for '" + key + "'", e.line);
        out.push_back(e.s);
    }
    return out;
}

int TomlTable::line_of(const std::string& key) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? 0 : it->second.line;
}

std::vector<std::string> TomlTable::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : kv_)
        if (k.rfind(prefix, 0) == 0) out.push_back(k);
    return out;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Strips a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
        if (c == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
            return false;
    return true;
}

TomlValue parse_scalar(const std::string& tok, int line) {
    TomlValue v;
    v.line = line;
    if (tok == "true" || tok == "false") {
        v.kind = TomlValue::Kind::boolean;
        v.b = (tok == "true");
        return v;
    }
    if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
        v.kind = TomlValue::Kind::string;
        std::string out;
        for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
            char c = tok[i];
            if (c == '\\' && i + 2 < tok.size()) {
                char n = tok[++i];
                if (n == 'n') out += '\n';
                else if (n == 't') out += '\t';
                else out += n;  // \" \\ and anything else literally
            } else {
                out += c;
            }
        }
        v.s = out;
        return v;
    }
    // integer?
    {
        bool ok = !tok.empty();
        std::size_t i = (tok[0] == '+' || tok[0] == '-') ? 1 : 0;
        if (i == tok.size()) ok = false;
        for (; ok && i < tok.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(tok[i]))) ok = false;
        if (ok) {
            v.kind = TomlValue::Kind::integer;
            v.i = std::strtoll(tok.c_str(), nullptr, 10);
            return v;
        }
    }
    // float
    {
        char* end = nullptr;
        double f = std::strtod(tok.c_str(), &end);
        if (end && *end == '\0' && end != tok.c_str()) {
            v.kind = TomlValue::Kind::real;
            v.f = f;
            return v;
        }
    }
    throw ConfigError("cannot parse value '" + tok + "'", line);
}

TomlValue parse_value(const std::string& raw, int line) {
    std::string tok = trim(raw);
    if (tok.empty()) throw ConfigError("empty value", line);
    if (tok.front() == '[') {
        if (tok.back() != ']') throw ConfigError("unterminated array", line);
        TomlValue v;
        v.kind = TomlValue::Kind::array;
        v.line = line;
        std::string inner = tok.substr(1, tok.size() - 2);
        // split on commas outside quotes
        std::string cur;
        bool in_str = false;
        auto flush = [&]() {
            std::string t = trim(cur);
            if (!t.empty()) v.arr.push_back(parse_scalar(t, line));
            cur.clear();
        };
        for (std::size_t i = 0; i < inner.size(); ++i) {
            char c = inner[i];
            if (c == '"' && (i == 0 || inner[i - 1] != '\\')) in_str = !in_str;
            if (c == ',' && !in_str) {
                flush();
            } else {
                cur += c;
            }
        }
        flush();
        return v;
    }
    return parse_scalar(tok, line);
}

}  // namespace

TomlTable parse_toml_string(const std::string& text) {
    TomlTable table;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_key(section)) throw ConfigError("invalid section name", line_no);
            continue;
        }
        std::size_t eq = std::string::npos;
        {
            bool in_str = false;
            for (std::size_t i = 0; i < line.size(); ++i) {
                char c = line[i];
                if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
                if (c == '=' && !in_str) {
                    eq = i;
                    break;
                }
            }
        }
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
        std::string key = trim(line.substr(0, eq));
        if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'", line_no);
        std::string full = section.empty() ? key : section + "." + key;
        if (table.has(full)) throw ConfigError("duplicate key '" + full + "'", line_no);
        table.set(full, parse_value(line.substr(eq + 1), line_no));
    }
    return table;
}

TomlTable parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml_string(ss.str());
}

}  // namespace mfl
