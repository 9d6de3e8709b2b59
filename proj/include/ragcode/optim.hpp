#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ragcode {

/// Adaptive moment estimation over a fixed list of parameter tensors.
class Adam {
 public:
  struct Config {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(std::vector<std::span<double>> params, Config cfg);

  /// One update; `grads` must line up with the parameter list.
  void step(std::span<const std::span<const double>> grads);
  std::size_t steps() const { return t_; }

 private:
  std::vector<std::span<double>> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  Config cfg_;
  std::size_t t_ = 0;
};

}  // namespace ragcode
