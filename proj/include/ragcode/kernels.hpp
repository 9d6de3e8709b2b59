#pragma once
// Vector kernels behind the dense retriever and the seq2seq generator.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active table is chosen once at startup from the CPU
// features, and can be pinned with RAGCODE_SIMD=scalar|avx2 in the
// environment (used by the equivalence tests and for reproducing runs on
// machines with different vector units).

#include <cstddef>
#include <span>
#include <string_view>

namespace ragcode::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// out[r] = dot(rows + r * dim, query) for r in [0, num_rows)
  void (*row_dots)(const double* rows, std::size_t num_rows, std::size_t dim,
                   const double* query, double* out);
  /// y[i] *= alpha
  void (*scale)(double alpha, double* y, std::size_t n);
  /// out[j] += sum_p a[p * a_stride] * b[p * ldb + j] for j in [0, n), p in [0, k)
  void (*vec_mat_acc)(const double* a, std::size_t a_stride, std::size_t k, const double* b, std::size_t ldb,
                      std::size_t n, double* out);
};

const KernelTable& scalar_kernels();
/// nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

/// The dispatched table. Selection happens on first call.
const KernelTable& active();
/// Override the dispatched table. Returns false if the ISA is unavailable.
bool select(Isa isa);
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace ragcode::simd
