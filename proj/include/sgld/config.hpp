#pragma once

// Typed key = value configuration files. Syntax is the TOML subset read by
// CLI11: scalars, [a, b, c] arrays, # comments, and an optional [section]
// header naming the experiment. Every key must be declared in the schema.

#include "CLI11.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace sgld {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
T parse_scalar(const std::string& key, const std::string& text) {
  if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + text + "'");
  } else {
    T v{};
    const char* b = text.data();
    const char* e = b + text.size();
    std::from_chars_result r{};
    if constexpr (std::is_integral_v<T>) {
      // Accept integral values written in floating notation, e.g. 1e6.
      double d{};
      r = std::from_chars(b, e, d);
      if (r.ec == std::errc{} && r.ptr == e && d >= 0 && d == double(T(d))) return T(d);
      r = std::from_chars(b, e, v);
    } else {
      r = std::from_chars(b, e, v);
    }
    if (r.ec != std::errc{} || r.ptr != e)
      throw ConfigError(key + ": cannot parse '" + text + "' as a number");
    return v;
  }
}

template <class T>
std::string format_scalar(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return "\"" + v + "\"";
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
  } else {
    return std::to_string(v);
  }
}

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

}  // namespace detail

class ConfigSchema {
 public:
  /// Declares `key`, bound to *target (whose current value is the default).
  /// `check` throws ConfigError (or std::invalid_argument) for invalid values.
  template <class T>
  ConfigSchema& add(std::string key, T* target, std::string help,
                    std::function<void(const T&)> check = {}) {
    Entry e;
    e.key = key;
    e.help = std::move(help);
    e.default_text = format(*target);
    e.assign = [key, target](const std::vector<std::string>& inputs) {
      if constexpr (detail::is_vector<T>::value) {
        T v;
        for (const auto& s : inputs) v.push_back(detail::parse_scalar<typename T::value_type>(key, s));
        *target = std::move(v);
      } else {
        if (inputs.size() != 1) throw ConfigError(key + ": expected a single value");
        *target = detail::parse_scalar<T>(key, inputs[0]);
      }
    };
    e.check = [key, target, check] {
      if (!check) return;
      try {
        check(*target);
      } catch (const ConfigError& err) {
        throw ConfigError(key + ": " + err.what());
      } catch (const std::invalid_argument& err) {
        throw ConfigError(key + ": " + err.what());
      }
    };
    entries_.push_back(std::move(e));
    return *this;
  }

  /// Reads a config stream. Keys may sit at top level or under [section].
  void load(std::istream& in, const std::string& section) {
    std::vector<CLI::ConfigItem> items;
    try {
      items = CLI::ConfigTOML().from_config(in);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config syntax error: ") + e.what());
    }
    for (const auto& it : items) {
      if (it.name == "++" || it.name == "--") continue;
      if (!it.parents.empty() && !(it.parents.size() == 1 && it.parents[0] == section))
        throw ConfigError("unexpected section [" + it.parents[0] + "] (expected [" + section + "])");
      Entry* e = find(it.name);
      if (!e) throw ConfigError("unknown key '" + it.name + "'");
      e->assign(it.inputs);
    }
  }

  void load_file(const std::string& path, const std::string& section) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    load(in, section);
  }

  void validate() const {
    for (const auto& e : entries_) e.check();
  }

  /// The defaults as a loadable config file.
  std::string defaults_text(const std::string& section) const {
    std::ostringstream os;
    os << "[" << section << "]\n";
    for (const auto& e : entries_) os << "# " << e.help << "\n" << e.key << " = " << e.default_text << "\n";
    return os.str();
  }

 private:
  struct Entry {
    std::string key, help, default_text;
    std::function<void(const std::vector<std::string>&)> assign;
    std::function<void()> check;
  };

  template <class T>
  static std::string format(const T& v) {
    if constexpr (detail::is_vector<T>::value) {
      std::string s = "[";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + detail::format_scalar(v[i]);
      return s + "]";
    } else {
      return detail::format_scalar(v);
    }
  }

  Entry* find(const std::string& key) {
    for (auto& e : entries_)
      if (e.key == key) return &e;
    return nullptr;
  }

  std::vector<Entry> entries_;
};

// Common checks.

template <class T>
std::function<void(const T&)> positive() {
  return [](const T& v) {
    if (!(v > T(0))) throw ConfigError("must be positive");
  };
}

template <class T>
std::function<void(const std::vector<T>&)> nonempty_positive() {
  return [](const std::vector<T>& v) {
    if (v.empty()) throw ConfigError("grid must be nonempty");
    for (const auto& x : v)
      if (!(x > T(0))) throw ConfigError("grid values must be positive");
  };
}

inline std::function<void(const std::vector<double>&)> open_unit_interval() {
  return [](const std::vector<double>& v) {
    if (v.empty()) throw ConfigError("grid must be nonempty");
    for (double x : v)
      if (!(x > 0.0 && x < 1.0)) throw ConfigError("values must lie in (0, 1)");
  };
}

}  // namespace sgld
