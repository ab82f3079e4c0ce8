#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reco/tensor.hpp"

namespace reco {

struct NamedTensor {
  std::string name;
  Tensor2D value;
  Tensor2D grad; // same shape as value
};

// A named group of parameter tensors with paired gradients. CTR models use
// the groups "embedding", "interaction" and "output"; the federation plan
// selects which groups are averaged across clients.
struct ParameterGroup {
  std::string name;
  std::vector<NamedTensor> tensors; // insertion-ordered

  Tensor2D& add(const std::string& tname, Tensor2D init);
  NamedTensor& find(const std::string& tname);
  const NamedTensor& find(const std::string& tname) const;
};

class ParameterSet {
 public:
  ParameterGroup& add_group(const std::string& name);
  ParameterGroup& group(const std::string& name);
  const ParameterGroup& group(const std::string& name) const;
  bool has_group(const std::string& name) const;

  std::vector<ParameterGroup>& groups() { return groups_; }
  const std::vector<ParameterGroup>& groups() const { return groups_; }

  void zero_grads();

  // Identical group/tensor names and shapes in identical order.
  bool same_structure(const ParameterSet& o) const;

  // Total scalar count across the named groups; empty plan = all groups.
  std::size_t param_count(const std::vector<std::string>& plan = {}) const;

 private:
  std::vector<ParameterGroup> groups_;
};

// Versioned binary checkpoint, byte-stable for identical state.
void save_parameters(const ParameterSet& ps, const std::string& path);
ParameterSet load_parameters(const std::string& path);
std::string serialize_parameters(const ParameterSet& ps);
ParameterSet deserialize_parameters(const std::string& bytes);

// Xavier/Glorot uniform init over (fan_in, fan_out) implied by the shape.
void fill_xavier_uniform(Tensor2D& t, std::uint64_t seed);
void fill_normal(Tensor2D& t, double mean, double stddev, std::uint64_t seed);

} // namespace reco
