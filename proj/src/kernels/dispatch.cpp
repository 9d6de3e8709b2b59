#include "ragcode/kernels.hpp"

#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"

namespace ragcode::simd {

namespace {

const KernelTable kScalar{Isa::scalar, detail::dot_scalar, detail::axpy_scalar,
                          detail::row_dots_scalar, detail::scale_scalar, detail::vec_mat_acc_scalar};

#if RAGCODE_HAVE_X86
const KernelTable kAvx2{Isa::avx2, detail::dot_avx2, detail::axpy_avx2, detail::row_dots_avx2,
                        detail::scale_avx2, detail::vec_mat_acc_avx2};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable* initial_table() {
  const char* forced = std::getenv("RAGCODE_SIMD");
  if (forced != nullptr && std::string(forced) == "scalar") return &kScalar;
  if (const KernelTable* t = avx2_kernels()) return t;
  return &kScalar;
}

const KernelTable*& current() {
  static const KernelTable* table = initial_table();
  return table;
}

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
#if RAGCODE_HAVE_X86
  static const bool available = cpu_has_avx2();
  return available ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current(); }

bool select(Isa isa) {
  if (isa == Isa::scalar) {
    current() = &kScalar;
    return true;
  }
  const KernelTable* t = avx2_kernels();
  if (t == nullptr) return false;
  current() = t;
  return true;
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace ragcode::simd
