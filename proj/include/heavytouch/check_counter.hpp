#pragma once

#include <cstdint>

namespace heavytouch {

/// Counts single-constraint checks (evaluations or subdifferentiations of one
/// g_i). One counter is owned by one solver run; tracing and diagnostics use
/// scratch counters so they never pollute a run's totals.
class CheckCounter {
 public:
  void add(std::int64_t n) noexcept { count_ += n; }
  void reset() noexcept { count_ = 0; }
  std::int64_t count() const noexcept { return count_; }

 private:
  std::int64_t count_ = 0;
};

}  // namespace heavytouch
