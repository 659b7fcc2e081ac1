/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * This file is part of scakit, a side-channel analysis toolkit.
 */

// Plain-text key=value configuration files: one `key = value` per line,
// full-line or trailing `#` comments, insertion-ordered round-trip.

#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "scakit/errors.hpp"

namespace scakit {

class Config {
  public:
    Config() = default;

    static Config parse_string(const std::string &text, const std::string &origin = "<string>") {
        Config c;
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t nl = text.find('\n', pos);
            if (nl == std::string::npos)
                nl = text.size();
            std::string line = text.substr(pos, nl - pos);
            pos = nl + 1;
            ++line_no;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos)
                line.erase(hash);
            const std::string t = trim(line);
            if (t.empty())
                continue;
            const std::size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
            c.set(key, value);
        }
        return c;
    }

    static Config parse_file(const std::string &path) {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open config file: " + path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse_string(text, path);
    }

    void set(const std::string &key, const std::string &value) {
        if (values_.find(key) == values_.end())
            order_.push_back(key);
        values_[key] = value;
    }

    bool has(const std::string &key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string &key) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            throw ConfigError("missing config key: " + key);
        return it->second;
    }

    std::string get_string(const std::string &key, const std::string &dflt) const {
        const auto it = values_.find(key);
        return it == values_.end() ? dflt : it->second;
    }

    double get_f64(const std::string &key) const { return to_f64(key, get_string(key)); }
    double get_f64(const std::string &key, double dflt) const {
        return has(key) ? get_f64(key) : dflt;
    }

    std::int64_t get_i64(const std::string &key) const { return to_i64(key, get_string(key)); }
    std::int64_t get_i64(const std::string &key, std::int64_t dflt) const {
        return has(key) ? get_i64(key) : dflt;
    }

    std::uint64_t get_u64(const std::string &key) const {
        const std::string v = get_string(key);
        char *end = nullptr;
        const std::uint64_t r = std::strtoull(v.c_str(), &end, 0);
        if (end == v.c_str() || *end != '\0')
            throw ConfigError("config key '" + key + "' is not an unsigned integer: " + v);
        return r;
    }
    std::uint64_t get_u64(const std::string &key, std::uint64_t dflt) const {
        return has(key) ? get_u64(key) : dflt;
    }

    bool get_bool(const std::string &key) const {
        const std::string v = get_string(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on")
            return true;
        if (v == "false" || v == "0" || v == "no" || v == "off")
            return false;
        throw ConfigError("config key '" + key + "' is not a boolean: " + v);
    }
    bool get_bool(const std::string &key, bool dflt) const {
        return has(key) ? get_bool(key) : dflt;
    }

    std::vector<double> get_f64_list(const std::string &key) const {
        const std::string v = get_string(key);
        std::vector<double> out;
        std::size_t pos = 0;
        while (pos < v.size()) {
            std::size_t comma = v.find(',', pos);
            if (comma == std::string::npos)
                comma = v.size();
            const std::string item = trim(v.substr(pos, comma - pos));
            if (!item.empty())
                out.push_back(to_f64(key, item));
            pos = comma + 1;
        }
        return out;
    }

    const std::vector<std::string> &keys() const { return order_; }

    std::string to_string() const {
        std::string out;
        for (const auto &k : order_) {
            out += k;
            out += " = ";
            out += values_.at(k);
            out += '\n';
        }
        return out;
    }

    void write_file(const std::string &path) const {
        std::ofstream out(path);
        if (!out)
            throw Error("cannot write config file: " + path);
        out << to_string();
    }

  private:
    static std::string trim(const std::string &s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
            ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
            --e;
        return s.substr(b, e - b);
    }

    static double to_f64(const std::string &key, const std::string &v) {
        char *end = nullptr;
        const double r = std::strtod(v.c_str(), &end);
        if (end == v.c_str() || *end != '\0')
            throw ConfigError("config key '" + key + "' is not a number: " + v);
        return r;
    }

    static std::int64_t to_i64(const std::string &key, const std::string &v) {
        char *end = nullptr;
        const std::int64_t r = std::strtoll(v.c_str(), &end, 0);
        if (end == v.c_str() || *end != '\0')
            throw ConfigError("config key '" + key + "' is not an integer: " + v);
        return r;
    }

    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

} // namespace scakit
