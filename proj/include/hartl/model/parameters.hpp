#ifndef HARTL_MODEL_PARAMETERS_HPP_
#define HARTL_MODEL_PARAMETERS_HPP_

#include <cstring>
#include <string>
#include <vector>

#include "hartl/common.hpp"

namespace hartl::model {

struct ParameterGroup {
  std::string name;
  std::vector<Matrix> tensors;
};

/// Named, ordered partition of a network's parameters. Gradients and
/// optimiser state use the same layout.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::vector<ParameterGroup> groups) : groups_(std::move(groups)) {}

  std::vector<ParameterGroup>& groups() { return groups_; }
  const std::vector<ParameterGroup>& groups() const { return groups_; }

  bool has(const std::string& name) const { return find(name) != nullptr; }

  const ParameterGroup* find(const std::string& name) const {
    for (const auto& g : groups_) {
      if (g.name == name) return &g;
    }
    return nullptr;
  }
  ParameterGroup* find(const std::string& name) {
    for (auto& g : groups_) {
      if (g.name == name) return &g;
    }
    return nullptr;
  }

  ParameterGroup& group(const std::string& name) {
    ParameterGroup* g = find(name);
    if (!g) throw StructureError("no parameter group '" + name + "'");
    return *g;
  }
  const ParameterGroup& group(const std::string& name) const {
    const ParameterGroup* g = find(name);
    if (!g) throw StructureError("no parameter group '" + name + "'");
    return *g;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& g : groups_) out.push_back(g.name);
    return out;
  }

  ParameterSet zeros_like() const {
    ParameterSet z = *this;
    for (auto& g : z.groups_) {
      for (auto& t : g.tensors) t.setZero();
    }
    return z;
  }

  void set_zero() {
    for (auto& g : groups_) {
      for (auto& t : g.tensors) t.setZero();
    }
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& g : groups_) {
      for (const auto& t : g.tensors) n += static_cast<std::size_t>(t.size());
    }
    return n;
  }

  bool all_finite() const {
    for (const auto& g : groups_) {
      for (const auto& t : g.tensors) {
        if (!t.allFinite()) return false;
      }
    }
    return true;
  }

  /// True when both sets have the same group names and tensor shapes.
  bool same_structure(const ParameterSet& other) const {
    if (groups_.size() != other.groups_.size()) return false;
    for (std::size_t i = 0; i < groups_.size(); ++i) {
      if (!same_group_structure(groups_[i], other.groups_[i])) return false;
    }
    return true;
  }

  static bool same_group_structure(const ParameterGroup& a, const ParameterGroup& b) {
    if (a.name != b.name || a.tensors.size() != b.tensors.size()) return false;
    for (std::size_t j = 0; j < a.tensors.size(); ++j) {
      if (a.tensors[j].rows() != b.tensors[j].rows() || a.tensors[j].cols() != b.tensors[j].cols()) return false;
    }
    return true;
  }

  /// Bitwise equality of every tensor.
  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (!a.same_structure(b)) return false;
    for (std::size_t i = 0; i < a.groups_.size(); ++i) {
      for (std::size_t j = 0; j < a.groups_[i].tensors.size(); ++j) {
        const Matrix& x = a.groups_[i].tensors[j];
        const Matrix& y = b.groups_[i].tensors[j];
        if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) return false;
      }
    }
    return true;
  }

 private:
  std::vector<ParameterGroup> groups_;
};

}  // namespace hartl::model

#endif  // HARTL_MODEL_PARAMETERS_HPP_
