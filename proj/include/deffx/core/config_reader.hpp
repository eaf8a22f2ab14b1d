#pragma once

#include <json.hpp>
#include <set>
#include <string>

#include "deffx/core/error.hpp"

namespace deffx {

// Typed access to one JSON object with ConfigError reporting. finish() rejects
// keys that were never read.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& obj, std::string pointer);

  bool has(const std::string& key) const { return obj_.contains(key); }
  std::string path(const std::string& key) const { return pointer_ + "/" + key; }
  const nlohmann::json& raw(const std::string& key);

  std::string string(const std::string& key);
  std::string string(const std::string& key, const std::string& fallback);
  double number(const std::string& key);
  double number(const std::string& key, double fallback);
  // Integer >= `min`.
  std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 0);
  std::uint64_t uint64(const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& key, bool fallback);
  const nlohmann::json& object(const std::string& key);
  const nlohmann::json& array(const std::string& key);

  void finish() const;

 private:
  const nlohmann::json& obj_;
  std::string pointer_;
  std::set<std::string> seen_;
};

}  // namespace deffx
