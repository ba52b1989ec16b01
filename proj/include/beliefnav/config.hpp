#pragma once

// Scenario files: `key = value` lines grouped under `[section]` headers, `#` comments. A section name
// that repeats forms a list. Values are numbers, bare strings, or comma-separated numbers. The first
// non-comment line must be `schema = 1`.

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bnav {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kConfigSchema = 1;

namespace detail {

inline std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string &s, double &out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char *first = t.data();
    const char *last = t.data() + t.size();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

}  // namespace detail

class Section {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    Section() = default;
    Section(std::string source, std::string name, int line) : source_(std::move(source)), name_(std::move(name)), line_(line) {}

    [[nodiscard]] const std::string &name() const { return name_; }
    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] bool has(const std::string &key) const { return entries_.count(key) != 0; }
    [[nodiscard]] const std::map<std::string, Entry> &entries() const { return entries_; }

    void set(const std::string &key, std::string value, int line) {
        if (has(key)) fail(line, "duplicate field '" + key + "'");
        entries_[key] = {std::move(value), line};
    }

    [[nodiscard]] std::string text(const std::string &key) const { return entry(key).value; }
    [[nodiscard]] std::string text_or(const std::string &key, const std::string &def) const {
        return has(key) ? text(key) : def;
    }

    [[nodiscard]] double number(const std::string &key) const {
        const Entry &e = entry(key);
        double v = 0.0;
        if (!detail::parse_double(e.value, v)) fail(e.line, "field '" + key + "' is not a number: '" + e.value + "'");
        return v;
    }
    [[nodiscard]] double number_or(const std::string &key, double def) const { return has(key) ? number(key) : def; }

    [[nodiscard]] int integer(const std::string &key) const {
        const double v = number(key);
        if (v != static_cast<double>(static_cast<long long>(v))) {
            fail(entry(key).line, "field '" + key + "' must be an integer");
        }
        return static_cast<int>(v);
    }
    [[nodiscard]] int integer_or(const std::string &key, int def) const { return has(key) ? integer(key) : def; }

    /// Comma-separated numbers; count < 0 accepts any non-empty length.
    [[nodiscard]] std::vector<double> numbers(const std::string &key, int count = -1) const {
        const Entry &e = entry(key);
        std::vector<double> out;
        std::stringstream ss(e.value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            double v = 0.0;
            if (!detail::parse_double(item, v)) fail(e.line, "field '" + key + "' has a non-numeric item '" + detail::trim(item) + "'");
            out.push_back(v);
        }
        if (out.empty()) fail(e.line, "field '" + key + "' is empty");
        if (count >= 0 && static_cast<int>(out.size()) != count) {
            fail(e.line, "field '" + key + "' needs " + std::to_string(count) + " values, got " + std::to_string(out.size()));
        }
        return out;
    }

    [[noreturn]] void fail(int line, const std::string &msg) const {
        throw ConfigError(source_ + ":" + std::to_string(line) + ": [" + name_ + "] " + msg);
    }

private:
    [[nodiscard]] const Entry &entry(const std::string &key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) fail(line_, "missing field '" + key + "'");
        return it->second;
    }

    std::string source_;
    std::string name_;
    int line_ = 0;
    std::map<std::string, Entry> entries_;
};

class Config {
public:
    static Config parse(const std::string &text, const std::string &source = "<config>") {
        Config c;
        c.source_ = source;
        c.root_ = Section(source, "", 1);
        Section *cur = &c.root_;
        std::stringstream ss(text);
        std::string raw;
        int line = 0;
        bool schema_seen = false;
        while (std::getline(ss, raw)) {
            ++line;
            const auto hash = raw.find('#');
            const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']' || s.size() < 3) c.fail(line, "malformed section header '" + s + "'");
                if (!schema_seen) c.fail(line, "'schema = 1' must come before any section");
                c.sections_.emplace_back(source, detail::trim(s.substr(1, s.size() - 2)), line);
                cur = &c.sections_.back();
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) c.fail(line, "expected 'key = value', got '" + s + "'");
            const std::string key = detail::trim(s.substr(0, eq));
            const std::string value = detail::trim(s.substr(eq + 1));
            if (key.empty()) c.fail(line, "empty key");
            if (!schema_seen) {
                if (key != "schema") c.fail(line, "first entry must be 'schema = 1'");
                double v = 0.0;
                if (!detail::parse_double(value, v) || v != kConfigSchema) {
                    c.fail(line, "unsupported schema '" + value + "' (expected 1)");
                }
                schema_seen = true;
            }
            cur->set(key, value, line);
        }
        if (!schema_seen) c.fail(line, "missing 'schema = 1'");
        return c;
    }

    static Config load(const std::string &path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError(path + ": cannot open file");
        std::stringstream buf;
        buf << in.rdbuf();
        return parse(buf.str(), path);
    }

    [[nodiscard]] const Section &root() const { return root_; }
    [[nodiscard]] std::vector<const Section *> all(const std::string &name) const {
        std::vector<const Section *> out;
        for (const auto &s : sections_) {
            if (s.name() == name) out.push_back(&s);
        }
        return out;
    }
    [[nodiscard]] const Section *optional(const std::string &name) const {
        const auto v = all(name);
        if (v.size() > 1) fail(v[1]->line(), "section [" + name + "] may appear only once");
        return v.empty() ? nullptr : v.front();
    }
    [[nodiscard]] const Section &one(const std::string &name) const {
        const Section *s = optional(name);
        if (s == nullptr) fail(1, "missing section [" + name + "]");
        return *s;
    }
    [[nodiscard]] const std::string &source() const { return source_; }

    [[noreturn]] void fail(int line, const std::string &msg) const {
        throw ConfigError(source_ + ":" + std::to_string(line) + ": " + msg);
    }

private:
    std::string source_;
    Section root_;
    std::vector<Section> sections_;
};

}  // namespace bnav
