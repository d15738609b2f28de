#pragma once

#include <cstdint>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace wldm {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

#define WLDM_CHECK(cond, msg) \
  do { if (!(cond)) ::wldm::fail(std::string("check failed: ") + (msg)); } while (0)

/// When true, every op scans its output for NaN/Inf and throws on the first
/// hit, naming the op. Costs a full pass per op; tests turn it on, training
/// loops leave it off.
bool checked_mode();
void set_checked_mode(bool on);

/// Splits [0, n) into contiguous chunks and runs fn(begin, end) on worker
/// threads. Each element's value is produced by a serial loop inside a single
/// chunk and callers write only to disjoint output ranges, so results are
/// bit-identical for any thread count (including 1). Small n runs inline.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

/// Same contract, but splits even for small n. For loops where each index is
/// expensive (one conv output row, one attention head) rather than one float.
void parallel_for_rows(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

/// Worker count used by parallel_for (defaults to hardware concurrency).
int thread_count();
void set_thread_count(int n);

}  // namespace wldm
