#include <atomic>
#include <cstdlib>
#include <cstring>

#include "npsc/kernels.hpp"

namespace npsc::kernels {

const Ops* avx2_ops();  // nullptr when not built for x86-64
const Ops* neon_ops();  // nullptr when not built for aarch64

namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const Ops* pick(const char* name) {
  if (std::strcmp(name, "scalar") == 0) return &scalar_ops();
  if (std::strcmp(name, "avx2") == 0)
    return (avx2_ops() && cpu_has_avx2()) ? avx2_ops() : nullptr;
  if (std::strcmp(name, "neon") == 0) return neon_ops();
  if (std::strcmp(name, "auto") == 0) {
    if (avx2_ops() && cpu_has_avx2()) return avx2_ops();
    if (neon_ops()) return neon_ops();
    return &scalar_ops();
  }
  return nullptr;
}

std::atomic<const Ops*> g_active{nullptr};

const Ops* init() {
  const char* env = std::getenv("NPSC_KERNELS");
  const Ops* ops = env ? pick(env) : nullptr;
  if (!ops) ops = pick("auto");
  g_active.store(ops, std::memory_order_release);
  return ops;
}

}  // namespace

const Ops& active_ops() {
  const Ops* ops = g_active.load(std::memory_order_acquire);
  if (!ops) ops = init();
  return *ops;
}

bool select_backend(const char* name) {
  const Ops* ops = pick(name);
  if (!ops) return false;
  g_active.store(ops, std::memory_order_release);
  return true;
}

}  // namespace npsc::kernels
