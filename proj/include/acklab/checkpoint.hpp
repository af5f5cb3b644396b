#pragma once

// Versioned text container for model state. Layout (docs/checkpoint-format.md):
//
//   acklab-checkpoint 1
//   meta <key> <value to end of line>
//   list <name> <count>
//   <count lines, one item each>
//   tensor <name> <rows> <cols>
//   <rows lines of cols shortest-round-trip decimals>
//   end
//
// Sections are written in key order so identical state gives identical bytes.

#include "acklab/tensor.hpp"

#include <map>

namespace acklab {

struct Checkpoint {
  static constexpr int kVersion = 1;

  std::map<std::string, std::string> meta;
  std::map<std::string, std::vector<std::string>> lists;
  std::map<std::string, Matrix> tensors;

  void write(std::ostream& os) const;
  static Checkpoint read(std::istream& is);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  const std::string& get_meta(const std::string& key) const;
  std::string get_meta(const std::string& key, const std::string& fallback) const;
  const std::vector<std::string>& get_list(const std::string& name) const;
  const Matrix& get_tensor(const std::string& name) const;

  void put_params(const std::string& prefix, const ParameterSet& params);
  // Every parameter in `params` must have a stored tensor of the same shape.
  void load_params(const std::string& prefix, ParameterSet& params) const;
};

std::string format_double(double v);
double parse_double(std::string_view s);

}  // namespace acklab
