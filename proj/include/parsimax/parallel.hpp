#ifndef PARSIMAX_PARALLEL_HPP
#define PARSIMAX_PARALLEL_HPP

// Minimal static-partition parallel loop. Worker count comes from
// PARSIMAX_THREADS when set, otherwise std::thread::hardware_concurrency.
// Nested calls run serially on the calling thread.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string_view>
#include <thread>
#include <vector>

namespace parsimax {

inline constexpr const char* kThreadsEnvVar = "PARSIMAX_THREADS";

namespace detail {

inline std::atomic<unsigned>& thread_override() {
  static std::atomic<unsigned> value{0};
  return value;
}

inline bool& inside_parallel_region() {
  thread_local bool inside = false;
  return inside;
}

}  // namespace detail

/// Overrides the environment for this process; 0 restores the default.
inline void set_worker_threads(unsigned count) { detail::thread_override() = count; }

inline unsigned worker_threads() {
  if (unsigned o = detail::thread_override(); o > 0) return o;
  if (const char* env = std::getenv(kThreadsEnvVar)) {
    std::string_view s(env);
    unsigned v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(k) for k in [0, count). Each index is visited exactly once; the
/// first exception thrown by any worker is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers =
      detail::inside_parallel_region() ? 1 : std::min<std::size_t>(worker_threads(), count);
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      detail::inside_parallel_region() = true;
      try {
        for (std::size_t k = w; k < count; k += workers) fn(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace parsimax

#endif  // PARSIMAX_PARALLEL_HPP
