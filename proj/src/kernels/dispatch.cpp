#include <atomic>
#include <stdexcept>
#include <string>

#include "kernel_impl.hpp"

namespace shotfuse::kernels {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(SHOTFUSE_HAVE_AVX2)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(SHOTFUSE_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detected_isa() {
  static const Isa best = [] {
    if (isa_available(Isa::Avx2)) return Isa::Avx2;
    if (isa_available(Isa::Neon)) return Isa::Neon;
    return Isa::Scalar;
  }();
  return best;
}

namespace {
std::atomic<int> g_active{-1};
}

Isa active_isa() {
  int v = g_active.load(std::memory_order_relaxed);
  if (v < 0) {
    v = static_cast<int>(detected_isa());
    g_active.store(v, std::memory_order_relaxed);
  }
  return static_cast<Isa>(v);
}

void set_active_isa(Isa isa) {
  if (!isa_available(isa))
    throw std::invalid_argument("kernel ISA not available: " + std::string(isa_name(isa)));
  g_active.store(static_cast<int>(isa), std::memory_order_relaxed);
}

template <class T>
const KernelTable<T>& table(Isa isa) {
  switch (isa) {
#if defined(SHOTFUSE_HAVE_AVX2)
    case Isa::Avx2:
      if (isa_available(Isa::Avx2)) return detail::avx2_table<T>();
      break;
#endif
#if defined(SHOTFUSE_HAVE_NEON)
    case Isa::Neon: return detail::neon_table<T>();
#endif
    case Isa::Scalar: return detail::scalar_table<T>();
    default: break;
  }
  throw std::invalid_argument("kernel ISA not available: " + std::string(isa_name(isa)));
}

template <class T>
const KernelTable<T>& active() {
  return table<T>(active_isa());
}

template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  const KernelTable<T>& kt = active<T>();
  if (!accumulate)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = T(0);
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = c + i * ldc;
      const T* arow = a + i * lda;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = arow[p];
        if (av != T(0)) kt.axpy(av, b + p * ldb, crow, n);
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] += kt.dot(a + i * lda, b + j * ldb, k);
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const T* arow = a + p * lda;
      const T* brow = b + p * ldb;
      for (std::size_t i = 0; i < m; ++i) {
        const T av = arow[i];
        if (av != T(0)) kt.axpy(av, brow, c + i * ldc, n);
      }
    }
  } else {
    gemm_reference(true, true, m, n, k, a, lda, b, ldb, c, ldc, true);
  }
}

template <class T>
void gemm_reference(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                    const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
                    std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = trans_a ? a[p * lda + i] : a[i * lda + p];
        const T bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
        acc += av * bv;
      }
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + acc : acc;
    }
  }
}

#define SHOTFUSE_INSTANTIATE(T)                                                                  \
  template const KernelTable<T>& table<T>(Isa);                                                  \
  template const KernelTable<T>& active<T>();                                                    \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t, const T*, std::size_t, \
                        const T*, std::size_t, T*, std::size_t, bool);                           \
  template void gemm_reference<T>(bool, bool, std::size_t, std::size_t, std::size_t, const T*,    \
                                  std::size_t, const T*, std::size_t, T*, std::size_t, bool);
SHOTFUSE_INSTANTIATE(float)
SHOTFUSE_INSTANTIATE(double)
#undef SHOTFUSE_INSTANTIATE

}  // namespace shotfuse::kernels
