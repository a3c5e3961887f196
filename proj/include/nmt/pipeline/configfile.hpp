#pragma once

#include <map>
#include <string>

namespace nmt::pipeline {

// Flat `key = value` configuration file. `#` starts a comment; keys are
// dotted (model.d_model, train.max_steps, ...).
class KeyValueConfig {
 public:
  static KeyValueConfig load(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_real(const std::string& key, double fallback) const;
  void set(const std::string& key, const std::string& value);

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace nmt::pipeline
