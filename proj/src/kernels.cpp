#include "pertasym/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace pertasym::kernels {

const Table* avx2_table();

namespace {

std::atomic<bool> g_force_scalar{false};

bool env_force_scalar() {
  static const bool v = [] {
    const char* e = std::getenv("PERTASYM_FORCE_SCALAR");
    return e != nullptr && *e != '\0' && *e != '0';
  }();
  return v;
}

}  // namespace

const Table* avx2() {
#if defined(__x86_64__)
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const Table& active() {
  if (g_force_scalar.load(std::memory_order_relaxed) || env_force_scalar()) return scalar();
  const Table* t = avx2();
  return t ? *t : scalar();
}

void force_scalar(bool on) { g_force_scalar.store(on, std::memory_order_relaxed); }

}  // namespace pertasym::kernels
