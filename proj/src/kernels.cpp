#include "tkgc/kernels.hpp"

#include <atomic>

namespace tkgc::kernels {

namespace {
std::atomic<bool> g_parallel{true};
std::atomic<size_t> g_threshold{1u << 15};
}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel_enabled(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

size_t parallel_threshold() { return g_threshold.load(std::memory_order_relaxed); }
void set_parallel_threshold(size_t ops) { g_threshold.store(ops, std::memory_order_relaxed); }

}  // namespace tkgc::kernels
