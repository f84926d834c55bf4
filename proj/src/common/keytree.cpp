#include "gridwatch/common/keytree.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "gridwatch/common/error.hpp"

namespace gridwatch {

KeyTree KeyTree::parse(std::string_view text, std::string root_name) {
  auto doc = std::make_shared<nlohmann::json>();
  try {
    *doc = nlohmann::json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(root_name, std::string("malformed document: ") + e.what());
  }
  const auto* node = doc.get();
  return KeyTree(std::move(doc), node, std::move(root_name));
}

std::string KeyTree::child_path(std::string_view key) const {
  if (path_.empty()) return std::string(key);
  return path_ + "." + std::string(key);
}

bool KeyTree::has(std::string_view key) const {
  return node_->is_object() && node_->contains(std::string(key));
}

KeyTree KeyTree::at(std::string_view key) const {
  if (!node_->is_object()) throw ValidationError(path_, "expected an object");
  auto it = node_->find(std::string(key));
  if (it == node_->end()) throw ValidationError(child_path(key), "missing required field");
  return KeyTree(doc_, &*it, child_path(key));
}

std::optional<KeyTree> KeyTree::find(std::string_view key) const {
  if (!has(key)) return std::nullopt;
  return at(key);
}

std::vector<KeyTree> KeyTree::items() const {
  if (!node_->is_array()) throw ValidationError(path_, "expected a list");
  std::vector<KeyTree> out;
  for (std::size_t k = 0; k < node_->size(); ++k) {
    out.push_back(KeyTree(doc_, &(*node_)[k], path_ + "[" + std::to_string(k) + "]"));
  }
  return out;
}

std::vector<std::pair<std::string, KeyTree>> KeyTree::members() const {
  if (!node_->is_object()) throw ValidationError(path_, "expected an object");
  std::vector<std::pair<std::string, KeyTree>> out;
  for (auto it = node_->begin(); it != node_->end(); ++it) {
    out.emplace_back(it.key(), KeyTree(doc_, &it.value(), child_path(it.key())));
  }
  return out;
}

double KeyTree::number() const {
  if (!node_->is_number()) throw ValidationError(path_, "expected a number");
  const double v = node_->get<double>();
  if (!std::isfinite(v)) throw ValidationError(path_, "must be finite");
  return v;
}

int KeyTree::integer() const {
  if (!node_->is_number_integer()) throw ValidationError(path_, "expected an integer");
  return node_->get<int>();
}

std::string KeyTree::string() const {
  if (!node_->is_string()) throw ValidationError(path_, "expected a string");
  return node_->get<std::string>();
}

bool KeyTree::boolean() const {
  if (!node_->is_boolean()) throw ValidationError(path_, "expected true or false");
  return node_->get<bool>();
}

double KeyTree::number_or(std::string_view key, double fallback) const {
  auto child = find(key);
  return child ? child->number() : fallback;
}

int KeyTree::integer_or(std::string_view key, int fallback) const {
  auto child = find(key);
  return child ? child->integer() : fallback;
}

void KeyTree::reject_unknown(std::initializer_list<std::string_view> allowed) const {
  if (!node_->is_object()) throw ValidationError(path_, "expected an object");
  for (auto it = node_->begin(); it != node_->end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ValidationError(child_path(it.key()), "unknown field");
    }
  }
}

}  // namespace gridwatch
