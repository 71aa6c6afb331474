// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace protoseg {

/// Plain structured-text key/value document. On disk the format is
/// `key: value` lines with nesting expressed by two-space indentation:
///
///     train:
///       episodes: 2000
///       optimizer:
///         lr0: 2.5e-4
///
/// In memory keys are flat dotted paths ("train.optimizer.lr0").
/// Insertion order is preserved so dumps are deterministic.
class TextConfig {
public:
    TextConfig() = default;

    static TextConfig parse(const std::string& text);
    static TextConfig load(const std::string& path);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    void set(const std::string& key, long long value);
    void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
    void set(const std::string& key, std::uint64_t value);
    void set(const std::string& key, double value);
    void set(const std::string& key, bool value);

    /// Keys in insertion order.
    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    /// Keys under a dotted prefix ("samples." -> all sample records).
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    std::string dump() const;
    void save(const std::string& path) const;

private:
    const std::string* find(const std::string& key) const;

    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Deterministic float formatting shared by config dumps and CSV writers:
/// shortest representation that round-trips a double.
std::string format_double(double v);

}  // namespace protoseg
