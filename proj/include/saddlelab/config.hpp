#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "saddlelab/errors.hpp"

namespace saddlelab {

inline constexpr const char* tool_version = "saddlelab 1.0.0";

enum class issue_kind { unknown_key, type_error, range_error };
std::string to_string(issue_kind k);

struct config_issue {
  issue_kind kind;
  std::string key;
  int line = 0;  // 0 when the issue is not tied to a line
  std::string message;
};

/// Carries every issue found, not just the first.
class config_error : public error {
 public:
  explicit config_error(std::vector<config_issue> issues);
  const std::vector<config_issue>& issues() const { return issues_; }

 private:
  std::vector<config_issue> issues_;
};

/// Flat "section.key = value" settings. Lists are comma separated. Blank lines
/// and lines starting with '#' are skipped. Values are kept verbatim, in input
/// order, so to_text() reproduces a canonical file byte for byte.
class ExperimentConfig {
 public:
  /// Defaults for every key.
  ExperimentConfig() = default;

  static ExperimentConfig parse(const std::string& text);

  /// Sets one key from its text form; throws config_error on a bad value.
  void set(const std::string& key, const std::string& raw);
  bool has(const std::string& key) const;

  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;

  /// Keys given explicitly, as "key = value" lines.
  std::string to_text() const;
  /// FNV-1a 64 of to_text(), as 16 hex digits.
  std::string hash() const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  const std::string& raw(const std::string& key) const;
  std::vector<config_issue> validate() const;

  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Every recognised key with its default value, in documentation order.
const std::vector<std::pair<std::string, std::string>>& config_defaults();

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace saddlelab
