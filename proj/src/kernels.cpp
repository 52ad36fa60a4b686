#include "plm/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace plm::kernels {

namespace {

bool cpu_has_simd() {
#if !defined(PLM_HAVE_SIMD_TU)
  return false;
#elif defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#elif defined(__aarch64__)
  return true;
#else
  return false;
#endif
}

struct State {
  Registry scalar;
  Registry simd;
  bool have_simd;
  const Registry* current;

  State() : scalar(scalar_registry()), have_simd(cpu_has_simd()) {
#if defined(PLM_HAVE_SIMD_TU)
    if (have_simd) simd = simd_registry();
#endif
    current = &scalar;
    if (have_simd) current = &simd;
    if (const char* env = std::getenv("PLM4JOB_KERNELS")) {
      if (std::strcmp(env, "scalar") == 0) current = &scalar;
    }
  }
};

State& state() {
  static State s;
  return s;
}

}  // namespace

const Registry& active() { return *state().current; }

bool select(Backend b) {
  State& s = state();
  switch (b) {
    case Backend::scalar:
      s.current = &s.scalar;
      return true;
    case Backend::simd:
      if (!s.have_simd) return false;
      s.current = &s.simd;
      return true;
    case Backend::automatic:
      s.current = s.have_simd ? &s.simd : &s.scalar;
      return true;
  }
  return false;
}

std::string_view backend_name() { return active().name; }

bool simd_available() { return state().have_simd; }

}  // namespace plm::kernels
