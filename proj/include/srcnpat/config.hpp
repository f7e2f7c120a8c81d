#pragma once

// Flat "key = value" configuration: '#' starts a comment, blank lines are
// ignored, lists are comma separated. Every key is bound to a field of a
// settings struct, so the registry doubles as the resolved-config printer.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "srcnpat/errors.hpp"
#include "srcnpat/io.hpp"

namespace srcnpat::config {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError(key, "expected a number, got '" + text + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

class Registry {
 public:
  struct Entry {
    std::string key;
    std::string help;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
  };

  void bind_custom(std::string key, std::string help, std::function<std::string()> get,
                   std::function<void(const std::string&)> set) {
    entries_.push_back({std::move(key), std::move(help), std::move(get), std::move(set)});
  }

  void bind(const std::string& key, const std::string& help, double& ref) {
    bind_custom(key, help, [&ref] { return format_double(ref); }, [&ref, key](const std::string& v) { ref = parse_double(key, v); });
  }
  template <class U>
    requires(std::is_unsigned_v<U> && !std::is_same_v<U, bool>)
  void bind(const std::string& key, const std::string& help, U& ref) {
    bind_custom(key, help, [&ref] { return std::to_string(ref); },
                [&ref, key](const std::string& v) { ref = static_cast<U>(parse_uint(key, v)); });
  }
  void bind(const std::string& key, const std::string& help, bool& ref) {
    bind_custom(key, help, [&ref] { return std::string(ref ? "true" : "false"); },
                [&ref, key](const std::string& v) { ref = parse_bool(key, v); });
  }
  void bind(const std::string& key, const std::string& help, std::string& ref) {
    bind_custom(key, help, [&ref] { return ref; }, [&ref](const std::string& v) { ref = trim(v); });
  }
  void bind(const std::string& key, const std::string& help, std::filesystem::path& ref) {
    bind_custom(key, help, [&ref] { return ref.string(); }, [&ref](const std::string& v) { ref = trim(v); });
  }
  void bind(const std::string& key, const std::string& help, std::vector<double>& ref) {
    bind_custom(
        key, help,
        [&ref] {
          std::string s;
          for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? "," : "") + format_double(ref[i]);
          return s;
        },
        [&ref, key](const std::string& v) {
          std::vector<double> out;
          for (const auto& item : split_list(v)) out.push_back(parse_double(key, item));
          ref = std::move(out);
        });
  }
  void bind(const std::string& key, const std::string& help, std::vector<std::string>& ref) {
    bind_custom(
        key, help,
        [&ref] {
          std::string s;
          for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? "," : "") + ref[i];
          return s;
        },
        [&ref](const std::string& v) { ref = split_list(v); });
  }

  const Entry* find(std::string_view key) const {
    for (const auto& e : entries_)
      if (e.key == key) return &e;
    return nullptr;
  }

  void set(const std::string& key, const std::string& value) {
    const Entry* e = find(key);
    if (!e) throw ConfigError(key, "unknown configuration key");
    e->set(value);
  }

  // "key=value" as given on the command line.
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError(trim(assignment), "override must have the form key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
  }

  void parse(std::string_view text, const std::string& source = "config") {
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      const std::string content = trim(line);
      if (content.empty()) continue;
      const auto eq = content.find('=');
      if (eq == std::string::npos)
        throw ConfigError(content, source + ":" + std::to_string(line_no) + ": expected 'key = value'");
      set(trim(content.substr(0, eq)), content.substr(eq + 1));
    }
  }

  void load_file(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    parse(std::string_view(bytes.data(), bytes.size()), path.string());
  }

  std::vector<std::pair<std::string, std::string>> snapshot() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : entries_) out.emplace_back(e.key, e.get());
    return out;
  }

  std::string dump(bool with_help = false) const {
    std::ostringstream os;
    for (const auto& e : entries_) {
      if (with_help && !e.help.empty()) os << "# " << e.help << "\n";
      os << e.key << " = " << e.get() << "\n";
    }
    return os.str();
  }

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

}  // namespace srcnpat::config
