#include "deffx/core/config_reader.hpp"

#include <cmath>

namespace deffx {

ConfigReader::ConfigReader(const nlohmann::json& obj, std::string pointer) : obj_(obj), pointer_(std::move(pointer)) {
  if (!obj_.is_object()) throw ConfigError(pointer_.empty() ? "/" : pointer_, "expected an object");
}

const nlohmann::json& ConfigReader::raw(const std::string& key) {
  seen_.insert(key);
  if (!obj_.contains(key)) throw ConfigError(path(key), "missing required field");
  return obj_.at(key);
}

std::string ConfigReader::string(const std::string& key) {
  const auto& v = raw(key);
  if (!v.is_string()) throw ConfigError(path(key), "expected a string");
  return v.get<std::string>();
}

std::string ConfigReader::string(const std::string& key, const std::string& fallback) {
  return has(key) ? string(key) : (seen_.insert(key), fallback);
}

double ConfigReader::number(const std::string& key) {
  const auto& v = raw(key);
  if (!v.is_number()) throw ConfigError(path(key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path(key), "expected a finite number");
  return d;
}

double ConfigReader::number(const std::string& key, double fallback) {
  return has(key) ? number(key) : (seen_.insert(key), fallback);
}

std::size_t ConfigReader::count(const std::string& key, std::size_t fallback, std::size_t min) {
  seen_.insert(key);
  if (!has(key)) return fallback;
  const auto& v = obj_.at(key);
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min)) {
    throw ConfigError(path(key), "expected an integer >= " + std::to_string(min));
  }
  return v.get<std::size_t>();
}

std::uint64_t ConfigReader::uint64(const std::string& key, std::uint64_t fallback) {
  seen_.insert(key);
  if (!has(key)) return fallback;
  const auto& v = obj_.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError(path(key), "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool ConfigReader::boolean(const std::string& key, bool fallback) {
  seen_.insert(key);
  if (!has(key)) return fallback;
  const auto& v = obj_.at(key);
  if (!v.is_boolean()) throw ConfigError(path(key), "expected true or false");
  return v.get<bool>();
}

const nlohmann::json& ConfigReader::object(const std::string& key) {
  const auto& v = raw(key);
  if (!v.is_object()) throw ConfigError(path(key), "expected an object");
  return v;
}

const nlohmann::json& ConfigReader::array(const std::string& key) {
  const auto& v = raw(key);
  if (!v.is_array()) throw ConfigError(path(key), "expected an array");
  return v;
}

void ConfigReader::finish() const {
  for (const auto& [key, value] : obj_.items()) {
    if (!seen_.count(key)) throw ConfigError(pointer_ + "/" + key, "unknown field");
  }
}

}  // namespace deffx
