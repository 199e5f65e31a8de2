// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Usage: acceptance [criterion number ...]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <set>
#include <string>

#include "acceptance.hpp"

using namespace mulr::acceptance;

namespace {

struct Criterion {
  int id;
  const char *name;
  Outcome (*run)();
  double budget_seconds;  // 0: no limit
};

const Criterion kCriteria[] = {
    {1, "gradient suite", gradient_suite, 60},
    {2, "metric oracle", metric_oracle, 0},
    {3, "threshold oracle", threshold_oracle, 0},
    {4, "order awareness", order_awareness, 180},
    {5, "complementarity trend", complementarity, 600},
    {6, "subword robustness", subword_robustness, 0},
    {7, "cnn vs forward", cnn_vs_forward, 0},
    {8, "determinism", determinism, 0},
    {9, "module oracles", module_oracles, 0},
};

}  // namespace

int main(int argc, char **argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto &c : kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception &e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      out.pass = false;
      out.detail += "; over the " + std::to_string(static_cast<int>(c.budget_seconds)) + "s budget";
    }
    std::printf("[%s] %d %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !out.pass;
  }
  return failed == 0 ? 0 : 1;
}
