#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "bcx/array_io.hpp"
#include "bcx/error.hpp"

namespace bcx {

// Reads known keys out of a JSON object and rejects the rest. Every error
// names the offending key path.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        const std::string where = path_ + "." + key;
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(where + ": expected a string");
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where + ": expected a number");
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
            for (const auto& e : v) {
                if (!e.is_number()) throw ConfigError(where + ": expected an array of numbers");
            }
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
            if (!v.is_array()) throw ConfigError(where + ": expected an array of integers");
            for (const auto& e : v) {
                if (!e.is_number_integer()) throw ConfigError(where + ": expected an array of integers");
            }
        }
        out = v.get<T>();
    }

    // Sub-object reader; an absent key yields an empty object.
    ObjectReader child(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return ObjectReader(j_.contains(key) ? j_.at(key) : empty, path_ + "." + key);
    }

    // Raw sub-object for a parser that takes json; an absent key yields {}.
    const json& sub(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return j_.contains(key) ? j_.at(key) : empty;
    }

    const std::string& path() const { return path_; }

    // Throws on the first key that was never read.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown key \"" + it.key() + "\"");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace bcx
