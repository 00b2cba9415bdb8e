// SPDX-License-Identifier: Apache-2.0
#include "autoprog/param_store.hpp"

#include <stdexcept>

namespace autoprog {

void ParamStore::add(const std::string& name, Tensor t) {
  if (!t.defined()) throw std::invalid_argument("ParamStore::add: undefined tensor for " + name);
  auto [it, inserted] = params_.emplace(name, std::move(t));
  (void)it;
  if (!inserted) throw std::invalid_argument("ParamStore::add: duplicate parameter " + name);
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter named " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: no parameter named " + name);
  return it->second;
}

void ParamStore::remove(const std::string& name) {
  if (params_.erase(name) == 0) {
    throw std::out_of_range("ParamStore::remove: no parameter named " + name);
  }
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : params_) out.add(name, t.clone(/*requires_grad=*/true));
  return out;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : params_) t.zero_grad();
}

bool ParamStore::equal(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    if (ia->second.shape() != ib->second.shape()) return false;
    if (ia->second.data() != ib->second.data()) return false;
  }
  return true;
}

}  // namespace autoprog
