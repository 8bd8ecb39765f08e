// SPDX-License-Identifier: Apache-2.0
#include "potter/params.hpp"

#include "potter/error.hpp"
#include "potter/rng.hpp"

namespace potter {

void ParamStore::add(std::string name, Tensor value) {
  if (index_.contains(name)) fail(ErrorCode::invalid_argument, "duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorCode::invalid_argument, "unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

Tensor& ParamStore::get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ParamStore::numel() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

std::size_t ParamStore::numel_under(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_)
    if (name.starts_with(prefix)) n += t.size();
  return n;
}

Var ParamStore::bind(Tape& tape, const std::string& name) const {
  return tape.parameter(name, get(name));
}

Tensor init_trunc_normal(std::uint64_t seed, const std::string& name, Shape shape,
                         double sigma) {
  CounterRng rng(splitmix64(seed ^ fnv1a64(name)));
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.truncated_normal(sigma);
  return t;
}

std::size_t layout_numel(const ParamLayout& layout) {
  std::size_t n = 0;
  for (const ParamSpec& p : layout) n += shape_numel(p.shape);
  return n;
}

ParamStore initialize(const ParamLayout& layout, std::uint64_t seed) {
  ParamStore store;
  for (const ParamSpec& p : layout) {
    if (p.name.ends_with(".weight"))
      store.add(p.name, init_trunc_normal(seed, p.name, p.shape));
    else if (p.name.ends_with(".gamma"))
      store.add(p.name, Tensor::full(p.shape, 1.0));
    else
      store.add(p.name, Tensor(p.shape));
  }
  return store;
}

Binding::Binding(Tape& tape, const ParamStore& store) {
  for (const auto& [name, t] : store.entries()) vars_.emplace(name, tape.parameter(name, t));
}

Binding::Binding(const ParamLayout& layout, std::span<const Var> vars) {
  if (layout.size() != vars.size())
    fail(ErrorCode::invalid_argument, "binding needs one var per layout entry");
  for (std::size_t i = 0; i < layout.size(); ++i) vars_.emplace(layout[i].name, vars[i]);
}

Var Binding::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) fail(ErrorCode::invalid_argument, "parameter '" + name + "' is not bound");
  return it->second;
}

}  // namespace potter
