#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "segseq/simd/kernels.hpp"

namespace segseq::simd {
namespace {

constexpr KernelTable kScalar{&scalar::dot, &scalar::axpy, &scalar::se_row, &scalar::exp_nonpositive};

#if defined(SEGSEQ_HAVE_AVX2)
constexpr KernelTable kAvx2{&avx2::dot, &avx2::axpy, &avx2::se_row, &avx2::exp_nonpositive};
#endif

Isa detect() {
  if (const char* env = std::getenv("SEGSEQ_SIMD")) {
    if (std::string(env) == "scalar") return Isa::scalar;
  }
  return supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool supported(Isa isa) {
  if (isa == Isa::scalar) return true;
#if defined(SEGSEQ_HAVE_AVX2)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& table(Isa isa) {
#if defined(SEGSEQ_HAVE_AVX2)
  if (isa == Isa::avx2) {
    if (!supported(isa)) throw std::invalid_argument("AVX2 kernels are not supported on this CPU");
    return kAvx2;
  }
#else
  if (isa == Isa::avx2) throw std::invalid_argument("AVX2 kernels were not compiled in");
#endif
  return kScalar;
}

const KernelTable& active() { return table(current().load(std::memory_order_relaxed)); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void force_isa(Isa isa) {
  if (!supported(isa)) throw std::invalid_argument("requested SIMD variant is not supported on this CPU");
  current().store(isa, std::memory_order_relaxed);
}

}  // namespace segseq::simd
