#pragma once

#include <string>

namespace mulr::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome gradient_suite();
Outcome metric_oracle();
Outcome threshold_oracle();
Outcome order_awareness();
Outcome complementarity();
Outcome subword_robustness();
Outcome cnn_vs_forward();
Outcome determinism();
Outcome module_oracles();

}  // namespace mulr::acceptance
