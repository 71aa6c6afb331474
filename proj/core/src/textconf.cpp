// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "protoseg/textconf.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace protoseg {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

TextConfig TextConfig::parse(const std::string& text) {
    TextConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> stack;  // section path by indent level
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;

        std::size_t indent = 0;
        while (indent < line.size() && line[indent] == ' ') ++indent;
        if (indent % 2 != 0)
            throw std::runtime_error("textconf: odd indentation at line " + std::to_string(lineno));
        const std::size_t level = indent / 2;
        if (level > stack.size())
            throw std::runtime_error("textconf: over-indented line " + std::to_string(lineno));
        stack.resize(level);

        const std::size_t colon = stripped.find(':');
        if (colon == std::string::npos)
            throw std::runtime_error("textconf: missing ':' at line " + std::to_string(lineno));
        const std::string key = trim(stripped.substr(0, colon));
        const std::string value = trim(stripped.substr(colon + 1));
        if (key.empty())
            throw std::runtime_error("textconf: empty key at line " + std::to_string(lineno));

        std::string path;
        for (const auto& part : stack) path += part + ".";
        if (value.empty()) {
            stack.push_back(key);
        } else {
            cfg.set(path + key, value);
        }
    }
    return cfg;
}

TextConfig TextConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("textconf: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

const std::string* TextConfig::find(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return &v;
    return nullptr;
}

bool TextConfig::has(const std::string& key) const { return find(key) != nullptr; }

const std::string& TextConfig::get(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw std::runtime_error("textconf: missing key '" + key + "'");
    return *v;
}

std::string TextConfig::get_or(const std::string& key, const std::string& fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

long long TextConfig::get_int(const std::string& key) const {
    const std::string& s = get(key);
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw std::runtime_error("textconf: key '" + key + "' is not an integer: " + s);
    return v;
}

double TextConfig::get_double(const std::string& key) const {
    const std::string& s = get(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw std::runtime_error("textconf: key '" + key + "' is not a number: " + s);
    return v;
}

bool TextConfig::get_bool(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::runtime_error("textconf: key '" + key + "' is not a boolean: " + s);
}

void TextConfig::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

void TextConfig::set(const std::string& key, long long value) { set(key, std::to_string(value)); }
void TextConfig::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }
void TextConfig::set(const std::string& key, double value) { set(key, format_double(value)); }
void TextConfig::set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

std::vector<std::string> TextConfig::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
        if (k.rfind(prefix, 0) == 0) out.push_back(k);
    return out;
}

std::string TextConfig::dump() const {
    std::string out;
    std::vector<std::string> open;  // currently open section path
    for (const auto& [key, value] : entries_) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= key.size(); ++i) {
            if (i == key.size() || key[i] == '.') {
                parts.push_back(key.substr(start, i - start));
                start = i + 1;
            }
        }
        const std::size_t depth = parts.size() - 1;
        std::size_t common = 0;
        while (common < open.size() && common < depth && open[common] == parts[common]) ++common;
        open.resize(common);
        for (std::size_t d = common; d < depth; ++d) {
            out += std::string(2 * d, ' ') + parts[d] + ":\n";
            open.push_back(parts[d]);
        }
        out += std::string(2 * depth, ' ') + parts.back() + ": " + value + "\n";
    }
    return out;
}

void TextConfig::save(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("textconf: cannot open " + path + " for writing");
    f << dump();
    if (!f) throw std::runtime_error("textconf: write failed for " + path);
}

}  // namespace protoseg
