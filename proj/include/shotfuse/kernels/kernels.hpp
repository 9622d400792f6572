#pragma once

// Dense inner-loop kernels used by the tensor ops. Every kernel has a scalar
// reference implementation; vectorized variants (AVX2+FMA on x86-64, NEON on
// AArch64) are selected once at runtime from the detected CPU features.

#include <cstddef>
#include <string_view>

namespace shotfuse::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

/// Best ISA supported by the running CPU and compiled into this binary.
Isa detected_isa();

/// ISA currently used by the dispatching entry points below.
Isa active_isa();

/// Forces a kernel family. Throws std::invalid_argument when `isa` is not
/// available on this machine.
void set_active_isa(Isa isa);

bool isa_available(Isa isa);

template <class T>
struct KernelTable {
  T (*dot)(const T* a, const T* b, std::size_t n);
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  void (*add)(const T* x, const T* y, T* out, std::size_t n);
  void (*mul)(const T* x, const T* y, T* out, std::size_t n);
  void (*scale)(T alpha, T* y, std::size_t n);
  T (*sum)(const T* x, std::size_t n);
};

/// Table for a specific ISA; `isa` must be available.
template <class T>
const KernelTable<T>& table(Isa isa);

template <class T>
const KernelTable<T>& active();

template <class T>
T dot(const T* a, const T* b, std::size_t n) { return active<T>().dot(a, b, n); }

/// y += alpha * x
template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) { active<T>().axpy(alpha, x, y, n); }

template <class T>
void add(const T* x, const T* y, T* out, std::size_t n) { active<T>().add(x, y, out, n); }

template <class T>
void mul(const T* x, const T* y, T* out, std::size_t n) { active<T>().mul(x, y, out, n); }

template <class T>
void scale(T alpha, T* y, std::size_t n) { active<T>().scale(alpha, y, n); }

template <class T>
T sum(const T* x, std::size_t n) { return active<T>().sum(x, n); }

/// Row-major C[M,N] (+)= op(A) * op(B), where op(A) is [M,K] and op(B) is
/// [K,N]. `lda`/`ldb`/`ldc` are the row strides of the stored matrices.
/// When `accumulate` is false C is overwritten.
template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
          bool accumulate);

/// Same contract as `gemm`, evaluated with plain triple loops. Used as the
/// reference in equivalence tests.
template <class T>
void gemm_reference(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                    const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
                    std::size_t ldc, bool accumulate);

}  // namespace shotfuse::kernels
