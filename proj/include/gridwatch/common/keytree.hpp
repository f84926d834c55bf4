#pragma once

#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gridwatch {

/// Read-only view of a parsed key-tree document (JSON, `//` comments allowed)
/// that reports every error with the dotted path of the offending field.
class KeyTree {
 public:
  /// Parses `text`; throws ValidationError on malformed input.
  static KeyTree parse(std::string_view text, std::string root_name = "");

  const std::string& path() const noexcept { return path_; }

  bool has(std::string_view key) const;
  KeyTree at(std::string_view key) const;
  std::optional<KeyTree> find(std::string_view key) const;
  std::vector<KeyTree> items() const;
  /// Object members in document order.
  std::vector<std::pair<std::string, KeyTree>> members() const;

  double number() const;
  int integer() const;
  std::string string() const;
  bool boolean() const;

  double number_or(std::string_view key, double fallback) const;
  int integer_or(std::string_view key, int fallback) const;

  /// Throws if this object holds a member not listed in `allowed`.
  void reject_unknown(std::initializer_list<std::string_view> allowed) const;

  bool is_object() const noexcept { return node_->is_object(); }
  bool is_array() const noexcept { return node_->is_array(); }
  bool is_null() const noexcept { return node_->is_null(); }

 private:
  KeyTree(std::shared_ptr<const nlohmann::json> doc, const nlohmann::json* node, std::string path)
      : doc_(std::move(doc)), node_(node), path_(std::move(path)) {}

  std::string child_path(std::string_view key) const;

  std::shared_ptr<const nlohmann::json> doc_;
  const nlohmann::json* node_;
  std::string path_;
};

}  // namespace gridwatch
