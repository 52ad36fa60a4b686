#pragma once
// Data-parallel inner loops behind the tensor ops: scalar reference kernels
// plus a SIMD variant (AVX2/FMA on x86-64, NEON on aarch64) compiled in a
// separate translation unit and selected at runtime. Scalar and SIMD tables
// expose the same contract and are equivalence-tested against each other.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace plm::kernels {

enum class Backend { scalar, simd, automatic };

// One function table per scalar type. All matrices are contiguous row-major.
template <typename T>
struct Table {
  T (*dot)(const T* x, const T* y, std::size_t n);
  void (*axpy)(T* y, const T* x, T a, std::size_t n);  // y += a*x
  void (*scale)(T* x, T a, std::size_t n);
  T (*sum)(const T* x, std::size_t n);
  // C[M,N] += A[M,K] * B[K,N]
  void (*matmul)(T* c, const T* a, const T* b, std::size_t m, std::size_t k,
                 std::size_t n);
  // C[M,N] += A[M,K] * B[N,K]^T
  void (*matmul_nt)(T* c, const T* a, const T* b, std::size_t m, std::size_t k,
                    std::size_t n);
  // C[M,N] += A[K,M]^T * B[K,N]
  void (*matmul_tn)(T* c, const T* a, const T* b, std::size_t m, std::size_t k,
                    std::size_t n);
  void (*softmax)(T* x, std::size_t n);  // in place, max-subtracted
  void (*gelu)(T* out, const T* x, std::size_t n);
  void (*gelu_bwd)(T* dx, const T* x, const T* dy, std::size_t n);  // dx += g'(x)*dy
  // p -= lr * mhat/(sqrt(vhat)+eps) with bias-corrected moments
  void (*adam)(T* p, const T* g, T* m, T* v, std::size_t n, T lr, T beta1,
               T beta2, T eps, T bc1, T bc2);
};

struct Registry {
  Table<float> f32;
  Table<double> f64;
  const char* name;
};

Registry scalar_registry();
#if defined(PLM_HAVE_SIMD_TU)
Registry simd_registry();
#endif

const Registry& active();
// Returns false when the requested backend is not available on this machine.
bool select(Backend b);
std::string_view backend_name();
bool simd_available();

template <typename T>
const Table<T>& table() {
  if constexpr (sizeof(T) == sizeof(float))
    return active().f32;
  else
    return active().f64;
}

template <typename T>
inline T dot(const T* x, const T* y, std::size_t n) {
  return table<T>().dot(x, y, n);
}
template <typename T>
inline void axpy(T* y, const T* x, T a, std::size_t n) {
  table<T>().axpy(y, x, a, n);
}
template <typename T>
inline void scale(T* x, T a, std::size_t n) {
  table<T>().scale(x, a, n);
}
template <typename T>
inline T sum(const T* x, std::size_t n) {
  return table<T>().sum(x, n);
}
template <typename T>
inline void matmul(T* c, const T* a, const T* b, std::size_t m, std::size_t k,
                   std::size_t n) {
  table<T>().matmul(c, a, b, m, k, n);
}
template <typename T>
inline void matmul_nt(T* c, const T* a, const T* b, std::size_t m,
                      std::size_t k, std::size_t n) {
  table<T>().matmul_nt(c, a, b, m, k, n);
}
template <typename T>
inline void matmul_tn(T* c, const T* a, const T* b, std::size_t m,
                      std::size_t k, std::size_t n) {
  table<T>().matmul_tn(c, a, b, m, k, n);
}
template <typename T>
inline void softmax(T* x, std::size_t n) {
  table<T>().softmax(x, n);
}
template <typename T>
inline void gelu(T* out, const T* x, std::size_t n) {
  table<T>().gelu(out, x, n);
}
template <typename T>
inline void gelu_bwd(T* dx, const T* x, const T* dy, std::size_t n) {
  table<T>().gelu_bwd(dx, x, dy, n);
}
template <typename T>
inline void adam(T* p, const T* g, T* m, T* v, std::size_t n, T lr, T beta1,
                 T beta2, T eps, T bc1, T bc2) {
  table<T>().adam(p, g, m, v, n, lr, beta1, beta2, eps, bc1, bc2);
}

}  // namespace plm::kernels
