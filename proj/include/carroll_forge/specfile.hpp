// Run-description files: a small TOML-style subset that fully determines a
// tool invocation.  Sections name the geometric ingredients ([chart],
// [coframe], [ehresmann], optional [connection], [surface], [nmatrix]) plus
// the sampling parameters ([run]).  Values are quoted expression strings,
// numbers, or (nested) arrays.  Errors carry the offending line number.

#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "carroll_forge/carroll.hpp"
#include "carroll_forge/connection.hpp"
#include "carroll_forge/surface.hpp"

namespace carrollforge {

class SpecError : public std::runtime_error {
  public:
    SpecError(const std::string& origin, int line, const std::string& msg)
        : std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg), line_number(line) {}
    int line_number;
};

namespace specdetail {

struct Value {
    enum class Kind { Text, Number, Array };
    Kind kind = Kind::Number;
    std::string text;
    double number = 0;
    std::vector<Value> items;
    int line = 0;
};

struct Entry {
    std::string key;
    Value value;
    int line = 0;
};

using Section = std::vector<Entry>;

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Strip a trailing comment, respecting quoted strings.
inline std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

class ValueParser {
  public:
    ValueParser(const std::string& origin, int line, const std::string& text)
        : origin_(origin), line_(line), text_(text) {}

    Value parse() {
        Value v = parse_value();
        skip_space();
        if (pos_ != text_.size()) fail("trailing characters after value");
        return v;
    }

  private:
    Value parse_value() {
        skip_space();
        if (pos_ >= text_.size()) fail("missing value");
        Value v;
        v.line = line_;
        const char c = text_[pos_];
        if (c == '"') {
            v.kind = Value::Kind::Text;
            ++pos_;
            while (pos_ < text_.size() && text_[pos_] != '"') v.text.push_back(text_[pos_++]);
            if (pos_ >= text_.size()) fail("unterminated string");
            ++pos_;
        } else if (c == '[') {
            v.kind = Value::Kind::Array;
            ++pos_;
            skip_space();
            if (pos_ < text_.size() && text_[pos_] == ']') {
                ++pos_;
                return v;
            }
            while (true) {
                v.items.push_back(parse_value());
                skip_space();
                if (pos_ >= text_.size()) fail("unterminated array");
                if (text_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                if (text_[pos_] == ']') {
                    ++pos_;
                    break;
                }
                fail("expected ',' or ']' in array");
            }
        } else {
            v.kind = Value::Kind::Number;
            std::size_t used = 0;
            try {
                v.number = std::stod(text_.substr(pos_), &used);
            } catch (const std::exception&) {
                fail("expected a quoted string, number, or array");
            }
            pos_ += used;
        }
        return v;
    }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) const { throw SpecError(origin_, line_, msg); }

    std::string origin_;
    int line_;
    std::string text_;
    std::size_t pos_ = 0;
};

inline std::map<std::string, Section> parse_sections(const std::string& text,
                                                     const std::string& origin) {
    std::map<std::string, Section> out;
    std::string current;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(strip_comment(raw));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw SpecError(origin, line, "unterminated section header");
            current = trim(s.substr(1, s.size() - 2));
            if (current.empty()) throw SpecError(origin, line, "empty section name");
            out[current];
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw SpecError(origin, line, "expected 'key = value' or a [section] header");
        if (current.empty()) throw SpecError(origin, line, "entry appears before any section");
        Entry e;
        e.key = trim(s.substr(0, eq));
        e.line = line;
        if (e.key.empty()) throw SpecError(origin, line, "empty key");
        for (char c : e.key)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
                throw SpecError(origin, line, "invalid character in key '" + e.key + "'");
        e.value = ValueParser(origin, line, trim(s.substr(eq + 1))).parse();
        out[current].push_back(std::move(e));
    }
    return out;
}

}  // namespace specdetail

struct SurfaceBlock {
    SurfaceEmbedding embedding;
    std::optional<SurfaceCovector> alpha_pullback;
    std::optional<SurfaceCovector> theta;
    std::optional<SurfaceCovector> xi;
};

struct SpecFile {
    CarrollStructure structure;
    EhresmannForm form;
    std::optional<AffineConnection> connection;
    std::optional<SurfaceBlock> surface;
    std::optional<TensorField> n_target;
    int samples = 64;
    double tol = tol::kResidual;
    std::uint64_t seed = 0;
};

namespace specdetail {

// Typed accessors over one parsed section, tracking which keys were consumed
// so leftovers can be reported as unknown.
class Block {
  public:
    Block(const std::string& origin, std::string name, const Section* sec)
        : origin_(origin), name_(std::move(name)) {
        if (sec)
            for (const Entry& e : *sec) entries_.emplace_back(&e, false);
    }

    bool present() const { return !entries_.empty(); }

    const Value* find(const std::string& key) {
        const Value* out = nullptr;
        for (auto& [entry, used] : entries_)
            if (entry->key == key) {
                if (out) throw SpecError(origin_, entry->line, "duplicate key '" + key + "'");
                out = &entry->value;
                used = true;
            }
        return out;
    }

    std::string text(const std::string& key, const std::string& fallback) {
        const Value* v = find(key);
        if (!v) return fallback;
        if (v->kind != Value::Kind::Text)
            throw SpecError(origin_, v->line, "'" + key + "' must be a quoted string");
        return v->text;
    }

    double number(const std::string& key, double fallback) {
        const Value* v = find(key);
        if (!v) return fallback;
        if (v->kind != Value::Kind::Number)
            throw SpecError(origin_, v->line, "'" + key + "' must be a number");
        return v->number;
    }

    // Array of exactly n quoted strings.
    std::optional<std::vector<std::string>> text_array(const std::string& key, std::size_t n) {
        const Value* v = find(key);
        if (!v) return std::nullopt;
        if (v->kind != Value::Kind::Array || v->items.size() != n)
            throw SpecError(origin_, v->line,
                            "'" + key + "' must be an array of " + std::to_string(n) + " strings");
        std::vector<std::string> out;
        for (const Value& item : v->items) {
            if (item.kind != Value::Kind::Text)
                throw SpecError(origin_, item.line, "'" + key + "' entries must be quoted strings");
            out.push_back(item.text);
        }
        return out;
    }

    // Array of exactly n [lo, hi] pairs.
    std::optional<std::vector<std::array<double, 2>>> interval_array(const std::string& key,
                                                                     std::size_t n) {
        const Value* v = find(key);
        if (!v) return std::nullopt;
        if (v->kind != Value::Kind::Array || v->items.size() != n)
            throw SpecError(origin_, v->line,
                            "'" + key + "' must be an array of " + std::to_string(n) +
                                " [lo, hi] pairs");
        std::vector<std::array<double, 2>> out;
        for (const Value& item : v->items) {
            if (item.kind != Value::Kind::Array || item.items.size() != 2 ||
                item.items[0].kind != Value::Kind::Number ||
                item.items[1].kind != Value::Kind::Number)
                throw SpecError(origin_, item.line, "'" + key + "' entries must be [lo, hi] pairs");
            out.push_back({item.items[0].number, item.items[1].number});
        }
        return out;
    }

    void finish() const {
        for (const auto& [entry, used] : entries_)
            if (!used)
                throw SpecError(origin_, entry->line,
                                "unknown key '" + entry->key + "' in [" + name_ + "]");
    }

  private:
    std::string origin_;
    std::string name_;
    std::vector<std::pair<const Entry*, bool>> entries_;
};

inline Expr parse_expr(const Chart& chart, const std::string& origin, int line,
                       const std::string& text) {
    try {
        return chart.parse(text);
    } catch (const std::exception& ex) {
        throw SpecError(origin, line, std::string("bad expression: ") + ex.what());
    }
}

}  // namespace specdetail

inline SpecFile parse_spec_text(const std::string& text, const std::string& origin) {
    using specdetail::Block;
    using specdetail::Value;
    auto sections = specdetail::parse_sections(text, origin);
    static const char* known[] = {"chart", "coframe", "ehresmann", "connection",
                                  "surface", "nmatrix", "run"};
    for (const auto& [name, sec] : sections) {
        bool ok = false;
        for (const char* k : known) ok = ok || name == k;
        if (!ok)
            throw SpecError(origin, sec.empty() ? 0 : sec.front().line,
                            "unknown section [" + name + "]");
    }
    auto section = [&](const char* name) -> const specdetail::Section* {
        auto it = sections.find(name);
        return it == sections.end() ? nullptr : &it->second;
    };

    SpecFile out;
    Chart& chart = out.structure.chart;

    {
        Block b(origin, "chart", section("chart"));
        if (auto names = b.text_array("coordinates", kDim))
            for (int k = 0; k < kDim; ++k) chart.coords[static_cast<std::size_t>(k)] = (*names)[static_cast<std::size_t>(k)];
        if (auto box = b.interval_array("domain", kDim))
            for (int k = 0; k < kDim; ++k) chart.domain[static_cast<std::size_t>(k)] = (*box)[static_cast<std::size_t>(k)];
        b.finish();
    }
    {
        Block b(origin, "coframe", section("coframe"));
        auto expr_of = [&](const char* key, double fallback) {
            const Value* v = b.find(key);
            if (!v) return Expr::constant(fallback);
            if (v->kind != Value::Kind::Text)
                throw SpecError(origin, v->line, std::string("'") + key + "' must be a quoted string");
            return specdetail::parse_expr(chart, origin, v->line, v->text);
        };
        out.structure.m11 = expr_of("m11", 1.0);
        out.structure.m21 = expr_of("m21", 0.0);
        out.structure.m22 = expr_of("m22", 1.0);
        b.finish();
    }
    {
        Block b(origin, "ehresmann", section("ehresmann"));
        auto expr_of = [&](const char* key) {
            const Value* v = b.find(key);
            if (!v) return Expr::constant(0.0);
            if (v->kind != Value::Kind::Text)
                throw SpecError(origin, v->line, std::string("'") + key + "' must be a quoted string");
            return specdetail::parse_expr(chart, origin, v->line, v->text);
        };
        out.form.w1 = expr_of("w1");
        out.form.w2 = expr_of("w2");
        const std::string role = b.text("role", "generic");
        if (role == "generic")
            out.form.role = FormRole::Generic;
        else if (role == "principal")
            out.form.role = FormRole::Principal;
        else if (role == "potential")
            out.form.role = FormRole::PotentialCandidate;
        else {
            const Value* v = b.find("role");
            throw SpecError(origin, v ? v->line : 0,
                            "role must be \"generic\", \"principal\", or \"potential\"");
        }
        b.finish();
    }
    if (const specdetail::Section* sec = section("connection")) {
        AffineConnection conn;
        for (const specdetail::Entry& e : *sec) {
            int idx[3];
            if (e.key.size() != 11 || e.key.compare(0, 6, "Gamma.") != 0 || e.key[7] != '.' ||
                e.key[9] != '.' || !std::isdigit(static_cast<unsigned char>(e.key[6])) ||
                !std::isdigit(static_cast<unsigned char>(e.key[8])) ||
                !std::isdigit(static_cast<unsigned char>(e.key[10])))
                throw SpecError(origin, e.line,
                                "connection keys must look like Gamma.a.b.c with digits a, b, c");
            idx[0] = e.key[6] - '0';
            idx[1] = e.key[8] - '0';
            idx[2] = e.key[10] - '0';
            for (int k : idx)
                if (k >= kDim) throw SpecError(origin, e.line, "connection index out of range");
            if (e.value.kind != Value::Kind::Text)
                throw SpecError(origin, e.line, "connection entries must be quoted strings");
            conn.gamma(idx[0], idx[1], idx[2]) =
                specdetail::parse_expr(chart, origin, e.line, e.value.text);
        }
        out.connection = std::move(conn);
    }
    if (const specdetail::Section* sec = section("surface")) {
        Block b(origin, "surface", sec);
        SurfaceBlock s;
        s.embedding.h = specdetail::parse_expr(chart, origin, 0, b.text("h", "0"));
        s.embedding.level = b.number("c", 0.0);
        auto covector = [&](const char* key) -> std::optional<SurfaceCovector> {
            auto arr = b.text_array(key, 2);
            if (!arr) return std::nullopt;
            return SurfaceCovector{specdetail::parse_expr(chart, origin, 0, (*arr)[0]),
                                   specdetail::parse_expr(chart, origin, 0, (*arr)[1])};
        };
        s.alpha_pullback = covector("alpha_pullback");
        s.theta = covector("theta");
        s.xi = covector("xi");
        b.finish();
        out.surface = std::move(s);
    }
    if (const specdetail::Section* sec = section("nmatrix")) {
        TensorField n(0, 2, Basis::Coordinate);
        for (const specdetail::Entry& e : *sec) {
            if (e.key.size() != 5 || e.key.compare(0, 2, "N.") != 0 || e.key[3] != '.' ||
                !std::isdigit(static_cast<unsigned char>(e.key[2])) ||
                !std::isdigit(static_cast<unsigned char>(e.key[4])))
                throw SpecError(origin, e.line, "nmatrix keys must look like N.a.b with digits");
            const int a = e.key[2] - '0', bb = e.key[4] - '0';
            if (a >= kDim || bb >= kDim)
                throw SpecError(origin, e.line, "nmatrix index out of range");
            if (e.value.kind != Value::Kind::Text)
                throw SpecError(origin, e.line, "nmatrix entries must be quoted strings");
            n.at({a, bb}) = specdetail::parse_expr(chart, origin, e.line, e.value.text);
        }
        out.n_target = std::move(n);
    }
    {
        Block b(origin, "run", section("run"));
        const double samples = b.number("samples", out.samples);
        if (samples < 1 || samples != static_cast<int>(samples))
            throw SpecError(origin, 0, "samples must be a positive integer");
        out.samples = static_cast<int>(samples);
        out.tol = b.number("tol", out.tol);
        if (out.tol <= 0) throw SpecError(origin, 0, "tol must be positive");
        const double seed = b.number("seed", 0.0);
        if (seed < 0 || seed != static_cast<std::uint64_t>(seed))
            throw SpecError(origin, 0, "seed must be a non-negative integer");
        out.seed = static_cast<std::uint64_t>(seed);
        b.finish();
    }
    return out;
}

inline SpecFile read_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError(path, 0, "cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_spec_text(buf.str(), path);
}

}  // namespace carrollforge
