#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "nidsdl/nn/tensor.hpp"

namespace nidsdl::nn {

// A scalar-valued fragment to verify: `loss` evaluates at the current values
// of `wrt`, `analytic` returns the backward pass's gradient for each of them.
struct GradCheckTarget {
  std::vector<std::string> names;
  std::vector<Tensor*> wrt;
  std::function<double()> loss;
  std::function<std::vector<Tensor>()> analytic;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // 0 checks every coordinate; otherwise a seeded sample of this many per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  std::string fragment;
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
  bool passed = true;
};

// |a - n| / max(|a|, |n|, 1e-8) with n from central differences.
double relative_error(double analytic, double numeric);

GradCheckReport grad_check(const GradCheckTarget& target, const GradCheckOptions& options);

// Layer kinds covered by check_layer, in report order.
const std::vector<std::string>& gradcheck_layer_kinds();

// Builds a random fragment of the named kind (batch, time and width drawn in
// [1, 8] from `seed`), projects its output onto a fixed random direction and
// checks every parameter and input gradient.
GradCheckReport check_layer(std::string_view kind, std::uint64_t seed, const GradCheckOptions& options);

}  // namespace nidsdl::nn
