// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "autoprog/tensor.hpp"

namespace autoprog {

// Named parameter collection for one model instance. Iteration order is the
// (deterministic) lexicographic name order.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  void add(const std::string& name, Tensor t);
  bool has(const std::string& name) const { return params_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  void remove(const std::string& name);

  std::size_t size() const { return params_.size(); }
  std::vector<std::string> names() const;
  std::size_t total_elements() const;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  // Deep value copy; copies are grad-requiring leaves.
  ParamStore clone() const;

  void zero_grads();

  // True when both stores hold the same names, shapes, and bit-identical
  // values.
  static bool equal(const ParamStore& a, const ParamStore& b);

 private:
  Map params_;
};

}  // namespace autoprog
