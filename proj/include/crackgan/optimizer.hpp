#pragma once

#include <cstdint>
#include <vector>

#include "crackgan/layers.hpp"

namespace crackgan {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.2;  // first-moment decay ("momentum term")
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed parameter list. Parameters without a gradient buffer
// are treated as having zero gradient.
class Adam {
 public:
  Adam(std::vector<NamedVar> parameters, AdamOptions options);

  void step();
  void zero_grad();

  std::int64_t steps() const noexcept { return steps_; }
  const AdamOptions& options() const noexcept { return options_; }

 private:
  std::vector<NamedVar> params_;
  std::vector<Tensor> m_, v_;
  AdamOptions options_;
  std::int64_t steps_ = 0;
};

}  // namespace crackgan
