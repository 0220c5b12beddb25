#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace toda {

/// Role a formal variable plays. Scalars (coupling, symbolic weight
/// coordinates, auxiliary unknowns) are separated from geometric point
/// variables so that layer violations (a point leaking into a weight
/// coordinate, say) are caught at construction time.
enum class VarKind : uint8_t {
  Coupling,   // gamma
  Param,      // user-declared formal scalar (weight coordinates, unknowns)
  Bulk,       // z_k, upper half plane
  Conj,       // zbar_k, formally independent mirror of z_k
  Boundary,   // s_l or probe location on the real line
};

inline bool is_point_kind(VarKind k) {
  return k == VarKind::Bulk || k == VarKind::Conj || k == VarKind::Boundary;
}

using VarId = uint16_t;

/// Registry of formal variables for one symbolic computation. All polynomials
/// and rational sections produced in a computation share one context; the
/// variable order fixed here is the monomial order used everywhere, so every
/// canonical form (and hence every report) is reproducible byte for byte.
class Context {
 public:
  static constexpr std::size_t kMaxVars = 24;

  VarId add(std::string name, VarKind kind) {
    if (names_.size() >= kMaxVars)
      throw std::length_error("context: variable capacity exceeded");
    for (const auto& n : names_)
      if (n == name) throw std::invalid_argument("context: duplicate variable " + name);
    names_.push_back(std::move(name));
    kinds_.push_back(kind);
    return static_cast<VarId>(names_.size() - 1);
  }

  std::size_t size() const { return names_.size(); }
  const std::string& name(VarId v) const { return names_.at(v); }
  VarKind kind(VarId v) const { return kinds_.at(v); }

  bool has(const std::string& name) const {
    for (const auto& n : names_)
      if (n == name) return true;
    return false;
  }

  VarId id(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<VarId>(i);
    throw std::out_of_range("context: unknown variable " + name);
  }

 private:
  std::vector<std::string> names_;
  std::vector<VarKind> kinds_;
};

}  // namespace toda
