#pragma once

#include "shotfuse/kernels/kernels.hpp"

namespace shotfuse::kernels::detail {

template <class T>
const KernelTable<T>& scalar_table();

#if defined(SHOTFUSE_HAVE_AVX2)
template <class T>
const KernelTable<T>& avx2_table();
#endif

#if defined(SHOTFUSE_HAVE_NEON)
template <class T>
const KernelTable<T>& neon_table();
#endif

}  // namespace shotfuse::kernels::detail
