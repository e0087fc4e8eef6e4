#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgv/errors.hpp"

namespace mgv::detail {

using nlohmann::json;

inline size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<size_t> row(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        size_t diag = row[0];
        row[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            const size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                               diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

// Rejects keys outside `allowed`, suggesting the closest known key.
inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& context) {
    if (!obj.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& item : obj.items()) {
        const std::string& key = item.key();
        bool known = false;
        for (const char* a : allowed)
            if (key == a) {
                known = true;
                break;
            }
        if (known) continue;
        std::string best;
        size_t best_d = SIZE_MAX;
        for (const char* a : allowed) {
            const size_t d = edit_distance(key, a);
            if (d < best_d) {
                best_d = d;
                best = a;
            }
        }
        std::string msg = context + ": unknown key '" + key + "'";
        if (best_d <= std::max<size_t>(2, key.size() / 3)) msg += " (did you mean '" + best + "'?)";
        throw ConfigError(msg);
    }
}

template <typename T>
T require(const json& obj, const char* key, const std::string& context) {
    if (!obj.contains(key)) throw ConfigError(context + ": missing key '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(context + ": bad value for '" + key + "': " + e.what());
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& context) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(context + ": bad value for '" + key + "': " + e.what());
    }
}

}  // namespace mgv::detail
