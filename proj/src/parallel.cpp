#include "splatcull/parallel.hpp"

#include <atomic>

namespace splatcull {
namespace {
std::atomic<int> g_default_threads{0};
}

void set_default_threads(int threads) { g_default_threads.store(std::max(0, threads)); }

int default_threads() {
  const int configured = g_default_threads.load();
  if (configured > 0) return configured;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int resolve_threads(int requested) { return requested > 0 ? requested : default_threads(); }

}  // namespace splatcull
