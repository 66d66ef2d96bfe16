#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ermlab/types.hpp"

namespace ermlab {

/// Invalid configuration. `field` names the offending key (empty for syntax
/// errors that are not tied to one key).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Flat `key = value` text with dotted keys. '#' starts a comment; values may
/// be double-quoted. Later assignments override earlier ones.
using FlatConfig = std::map<std::string, std::string>;

FlatConfig parse_flat_config(std::string_view text, const std::string& origin = "<string>");
FlatConfig load_flat_config(const std::string& path);
std::string format_flat_config(const FlatConfig& cfg);

namespace parse {
double real(const std::string& key, const std::string& value);
long long integer(const std::string& key, const std::string& value);
std::uint64_t u64(const std::string& key, const std::string& value);
bool boolean(const std::string& key, const std::string& value);
std::vector<double> real_list(const std::string& key, const std::string& value);
std::vector<int> int_list(const std::string& key, const std::string& value);
}  // namespace parse

std::string format_real(double v);
std::string join_reals(const std::vector<double>& v);
std::string join_ints(const std::vector<int>& v);

}  // namespace ermlab
