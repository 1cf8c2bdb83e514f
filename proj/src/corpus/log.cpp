#include "seamless/log.hpp"

#include <atomic>

namespace seamless::log {
namespace {
std::atomic<Level> g_threshold{Level::Info};
}

Level threshold() { return g_threshold.load(std::memory_order_relaxed); }
void set_threshold(Level level) { g_threshold.store(level, std::memory_order_relaxed); }

}  // namespace seamless::log
