// Cloned into one translation unit per backend (kernels_scalar.cpp,
// kernels_simd.cpp). The SIMD TU is compiled with -mavx2 -mfma on x86-64, so
// the __AVX2__ blocks below light up there; on aarch64 NEON is always on.
// Every function must stay static to keep the clones TU-local.

#ifndef PLM_KERNEL_BACKEND
#error "PLM_KERNEL_BACKEND is not defined"
#endif

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "plm/kernels.hpp"

#if !defined(PLM_FORCE_SCALAR) && defined(__AVX2__)
#define PLM_USE_AVX2 1
#include <immintrin.h>
#endif
#if !defined(PLM_FORCE_SCALAR) && defined(__aarch64__) && defined(__ARM_NEON)
#define PLM_USE_NEON 1
#include <arm_neon.h>
#endif

namespace {

using std::size_t;

#if defined(PLM_USE_AVX2)
inline float hsum256(__m256 x) {
  __m128 lo = _mm256_castps256_ps128(x);
  __m128 hi = _mm256_extractf128_ps(x, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x1));
  return _mm_cvtss_f32(s);
}
inline double hsum256d(__m256d x) {
  __m128d lo = _mm256_castpd256_pd128(x);
  __m128d hi = _mm256_extractf128_pd(x, 1);
  __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}
#endif

// ---------------------------------------------------------------- dot / axpy

static float dot_f32(const float* x, const float* y, size_t n) {
  size_t i = 0;
  float acc = 0.0f;
#if defined(PLM_USE_AVX2)
  __m256 v0 = _mm256_setzero_ps(), v1 = _mm256_setzero_ps();
  for (; i + 16 <= n; i += 16) {
    v0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), v0);
    v1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), v1);
  }
  for (; i + 8 <= n; i += 8)
    v0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), v0);
  acc = hsum256(_mm256_add_ps(v0, v1));
#elif defined(PLM_USE_NEON)
  float32x4_t v0 = vdupq_n_f32(0.0f), v1 = vdupq_n_f32(0.0f);
  for (; i + 8 <= n; i += 8) {
    v0 = vfmaq_f32(v0, vld1q_f32(x + i), vld1q_f32(y + i));
    v1 = vfmaq_f32(v1, vld1q_f32(x + i + 4), vld1q_f32(y + i + 4));
  }
  acc = vaddvq_f32(vaddq_f32(v0, v1));
#endif
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

static double dot_f64(const double* x, const double* y, size_t n) {
  size_t i = 0;
  double acc = 0.0;
#if defined(PLM_USE_AVX2)
  __m256d v0 = _mm256_setzero_pd(), v1 = _mm256_setzero_pd();
  for (; i + 8 <= n; i += 8) {
    v0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), v0);
    v1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), v1);
  }
  acc = hsum256d(_mm256_add_pd(v0, v1));
#elif defined(PLM_USE_NEON)
  float64x2_t v0 = vdupq_n_f64(0.0);
  for (; i + 2 <= n; i += 2)
    v0 = vfmaq_f64(v0, vld1q_f64(x + i), vld1q_f64(y + i));
  acc = vaddvq_f64(v0);
#endif
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

static void axpy_f32(float* y, const float* x, float a, size_t n) {
  size_t i = 0;
#if defined(PLM_USE_AVX2)
  __m256 va = _mm256_set1_ps(a);
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i),
                                            _mm256_loadu_ps(y + i)));
#elif defined(PLM_USE_NEON)
  float32x4_t va = vdupq_n_f32(a);
  for (; i + 4 <= n; i += 4)
    vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
#endif
  for (; i < n; ++i) y[i] += a * x[i];
}

static void axpy_f64(double* y, const double* x, double a, size_t n) {
  size_t i = 0;
#if defined(PLM_USE_AVX2)
  __m256d va = _mm256_set1_pd(a);
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
#elif defined(PLM_USE_NEON)
  float64x2_t va = vdupq_n_f64(a);
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
#endif
  for (; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
static void scale_impl(T* x, T a, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= a;
}

static void scale_f32(float* x, float a, size_t n) {
  size_t i = 0;
#if defined(PLM_USE_AVX2)
  __m256 va = _mm256_set1_ps(a);
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
#endif
  scale_impl(x + i, a, n - i);
}

static void scale_f64(double* x, double a, size_t n) {
  size_t i = 0;
#if defined(PLM_USE_AVX2)
  __m256d va = _mm256_set1_pd(a);
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
#endif
  scale_impl(x + i, a, n - i);
}

static float sum_f32(const float* x, size_t n) {
  size_t i = 0;
  float acc = 0.0f;
#if defined(PLM_USE_AVX2)
  __m256 v = _mm256_setzero_ps();
  for (; i + 8 <= n; i += 8) v = _mm256_add_ps(v, _mm256_loadu_ps(x + i));
  acc = hsum256(v);
#elif defined(PLM_USE_NEON)
  float32x4_t v = vdupq_n_f32(0.0f);
  for (; i + 4 <= n; i += 4) v = vaddq_f32(v, vld1q_f32(x + i));
  acc = vaddvq_f32(v);
#endif
  for (; i < n; ++i) acc += x[i];
  return acc;
}

static double sum_f64(const double* x, size_t n) {
  size_t i = 0;
  double acc = 0.0;
#if defined(PLM_USE_AVX2)
  __m256d v = _mm256_setzero_pd();
  for (; i + 4 <= n; i += 4) v = _mm256_add_pd(v, _mm256_loadu_pd(x + i));
  acc = hsum256d(v);
#endif
  for (; i < n; ++i) acc += x[i];
  return acc;
}

// ------------------------------------------------------------------- matmul
// Accumulating, row-major. The axpy/dot shapes above carry the SIMD.

template <typename T, void (*Axpy)(T*, const T*, T, size_t)>
static void matmul_impl(T* c, const T* a, const T* b, size_t m, size_t k,
                        size_t n) {
  for (size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (size_t p = 0; p < k; ++p)
      if (arow[p] != T(0)) Axpy(crow, b + p * n, arow[p], n);
  }
}

template <typename T, T (*Dot)(const T*, const T*, size_t)>
static void matmul_nt_impl(T* c, const T* a, const T* b, size_t m, size_t k,
                           size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) crow[j] += Dot(arow, b + j * k, k);
  }
}

template <typename T, void (*Axpy)(T*, const T*, T, size_t)>
static void matmul_tn_impl(T* c, const T* a, const T* b, size_t m, size_t k,
                           size_t n) {
  // a is [k, m]: c[i,:] += sum_p a[p,i] * b[p,:]
  for (size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (size_t i = 0; i < m; ++i)
      if (arow[i] != T(0)) Axpy(c + i * n, brow, arow[i], n);
  }
}

static void matmul_f32(float* c, const float* a, const float* b, size_t m,
                       size_t k, size_t n) {
  matmul_impl<float, axpy_f32>(c, a, b, m, k, n);
}
static void matmul_f64(double* c, const double* a, const double* b, size_t m,
                       size_t k, size_t n) {
  matmul_impl<double, axpy_f64>(c, a, b, m, k, n);
}
static void matmul_nt_f32(float* c, const float* a, const float* b, size_t m,
                          size_t k, size_t n) {
  matmul_nt_impl<float, dot_f32>(c, a, b, m, k, n);
}
static void matmul_nt_f64(double* c, const double* a, const double* b,
                          size_t m, size_t k, size_t n) {
  matmul_nt_impl<double, dot_f64>(c, a, b, m, k, n);
}
static void matmul_tn_f32(float* c, const float* a, const float* b, size_t m,
                          size_t k, size_t n) {
  matmul_tn_impl<float, axpy_f32>(c, a, b, m, k, n);
}
static void matmul_tn_f64(double* c, const double* a, const double* b,
                          size_t m, size_t k, size_t n) {
  matmul_tn_impl<double, axpy_f64>(c, a, b, m, k, n);
}

// ------------------------------------------------------- softmax / gelu / adam
// The f32 SIMD variants use a polynomial exp/tanh (~1 ulp); the scalar tables
// stay on libm. Equivalence tests compare the two within a small tolerance.

#if defined(PLM_USE_AVX2)
// exp(x) = 2^k * exp(r) with r = x - k*ln2 (hi/lo split), degree-5 polynomial.
static inline __m256 exp256_ps(__m256 x) {
  const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
  const __m256 ln2_hi = _mm256_set1_ps(0.693359375f);
  const __m256 ln2_lo = _mm256_set1_ps(-2.12194440e-4f);
  x = _mm256_min_ps(x, _mm256_set1_ps(88.3762626647949f));
  x = _mm256_max_ps(x, _mm256_set1_ps(-87.3365478515625f));
  __m256 k = _mm256_round_ps(_mm256_mul_ps(x, log2e),
                             _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256 r = _mm256_fnmadd_ps(k, ln2_hi, x);
  r = _mm256_fnmadd_ps(k, ln2_lo, r);
  __m256 p = _mm256_set1_ps(1.9875691500e-4f);
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(1.3981999507e-3f));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(8.3334519073e-3f));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(4.1665795894e-2f));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(1.6666665459e-1f));
  p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(5.0000001201e-1f));
  __m256 r2 = _mm256_mul_ps(r, r);
  p = _mm256_fmadd_ps(p, r2, _mm256_add_ps(r, _mm256_set1_ps(1.0f)));
  __m256i ik = _mm256_cvtps_epi32(k);
  ik = _mm256_add_epi32(ik, _mm256_set1_epi32(127));
  __m256 two_k = _mm256_castsi256_ps(_mm256_slli_epi32(ik, 23));
  return _mm256_mul_ps(p, two_k);
}

// tanh(x) = 1 - 2/(exp(2x)+1)
static inline __m256 tanh256_ps(__m256 x) {
  __m256 e = exp256_ps(_mm256_mul_ps(x, _mm256_set1_ps(2.0f)));
  __m256 num = _mm256_sub_ps(e, _mm256_set1_ps(1.0f));
  __m256 den = _mm256_add_ps(e, _mm256_set1_ps(1.0f));
  return _mm256_div_ps(num, den);
}
#endif

template <typename T>
static void softmax_impl(T* x, size_t n) {
  if (n == 0) return;
  T mx = x[0];
  for (size_t i = 1; i < n; ++i) mx = x[i] > mx ? x[i] : mx;
  T total = T(0);
  for (size_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    total += x[i];
  }
  T inv = T(1) / total;
  for (size_t i = 0; i < n; ++i) x[i] *= inv;
}

static void softmax_f32(float* x, size_t n) {
#if defined(PLM_USE_AVX2)
  if (n >= 16) {
    __m256 vmx = _mm256_set1_ps(-std::numeric_limits<float>::infinity());
    size_t i = 0;
    for (; i + 8 <= n; i += 8) vmx = _mm256_max_ps(vmx, _mm256_loadu_ps(x + i));
    float mx = vmx[0];
    for (int l = 1; l < 8; ++l) mx = std::max(mx, vmx[l]);
    for (; i < n; ++i) mx = std::max(mx, x[i]);
    __m256 vm = _mm256_set1_ps(mx), vsum = _mm256_setzero_ps();
    for (i = 0; i + 8 <= n; i += 8) {
      __m256 e = exp256_ps(_mm256_sub_ps(_mm256_loadu_ps(x + i), vm));
      _mm256_storeu_ps(x + i, e);
      vsum = _mm256_add_ps(vsum, e);
    }
    float total = hsum256(vsum);
    for (; i < n; ++i) {
      x[i] = std::exp(x[i] - mx);
      total += x[i];
    }
    scale_f32(x, 1.0f / total, n);
    return;
  }
#endif
  softmax_impl(x, n);
}
static void softmax_f64(double* x, size_t n) { softmax_impl(x, n); }

template <typename T>
static void gelu_impl(T* out, const T* x, size_t n) {
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  for (size_t i = 0; i < n; ++i) {
    T v = x[i];
    T u = c * (v + T(0.044715) * v * v * v);
    out[i] = T(0.5) * v * (T(1) + std::tanh(u));
  }
}

template <typename T>
static void gelu_bwd_impl(T* dx, const T* x, const T* dy, size_t n) {
  const T c = T(0.7978845608028654);
  for (size_t i = 0; i < n; ++i) {
    T v = x[i];
    T u = c * (v + T(0.044715) * v * v * v);
    T th = std::tanh(u);
    T du = c * (T(1) + T(0.134145) * v * v);
    T g = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du;
    dx[i] += g * dy[i];
  }
}

static void gelu_f32(float* out, const float* x, size_t n) {
  size_t i = 0;
#if defined(PLM_USE_AVX2)
  const __m256 c = _mm256_set1_ps(0.7978845608028654f);
  const __m256 a = _mm256_set1_ps(0.044715f);
  const __m256 half = _mm256_set1_ps(0.5f), one = _mm256_set1_ps(1.0f);
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    __m256 u = _mm256_mul_ps(c, _mm256_fmadd_ps(a, _mm256_mul_ps(_mm256_mul_ps(v, v), v), v));
    __m256 th = tanh256_ps(u);
    _mm256_storeu_ps(out + i,
                     _mm256_mul_ps(_mm256_mul_ps(half, v), _mm256_add_ps(one, th)));
  }
#endif
  gelu_impl(out + i, x + i, n - i);
}
static void gelu_f64(double* out, const double* x, size_t n) { gelu_impl(out, x, n); }
static void gelu_bwd_f32(float* dx, const float* x, const float* dy, size_t n) {
  size_t i = 0;
#if defined(PLM_USE_AVX2)
  const __m256 c = _mm256_set1_ps(0.7978845608028654f);
  const __m256 a = _mm256_set1_ps(0.044715f);
  const __m256 a3 = _mm256_set1_ps(0.134145f);
  const __m256 half = _mm256_set1_ps(0.5f), one = _mm256_set1_ps(1.0f);
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    __m256 v2 = _mm256_mul_ps(v, v);
    __m256 u = _mm256_mul_ps(c, _mm256_fmadd_ps(a, _mm256_mul_ps(v2, v), v));
    __m256 th = tanh256_ps(u);
    __m256 du = _mm256_mul_ps(c, _mm256_fmadd_ps(a3, v2, one));
    __m256 sech2 = _mm256_fnmadd_ps(th, th, one);
    __m256 g = _mm256_fmadd_ps(_mm256_mul_ps(half, v), _mm256_mul_ps(sech2, du),
                               _mm256_mul_ps(half, _mm256_add_ps(one, th)));
    _mm256_storeu_ps(dx + i,
                     _mm256_fmadd_ps(g, _mm256_loadu_ps(dy + i),
                                     _mm256_loadu_ps(dx + i)));
  }
#endif
  gelu_bwd_impl(dx + i, x + i, dy + i, n - i);
}
static void gelu_bwd_f64(double* dx, const double* x, const double* dy, size_t n) {
  gelu_bwd_impl(dx, x, dy, n);
}

template <typename T>
static void adam_impl(T* p, const T* g, T* m, T* v, size_t n, T lr, T beta1,
                      T beta2, T eps, T bc1, T bc2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    T mhat = m[i] * bc1;
    T vhat = v[i] * bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

static void adam_f32(float* p, const float* g, float* m, float* v, size_t n,
                     float lr, float b1, float b2, float eps, float bc1,
                     float bc2) {
  size_t i = 0;
#if defined(PLM_USE_AVX2)
  __m256 vb1 = _mm256_set1_ps(b1), vb2 = _mm256_set1_ps(b2);
  __m256 v1mb1 = _mm256_set1_ps(1.0f - b1), v1mb2 = _mm256_set1_ps(1.0f - b2);
  __m256 vlr = _mm256_set1_ps(lr), veps = _mm256_set1_ps(eps);
  __m256 vbc1 = _mm256_set1_ps(bc1), vbc2 = _mm256_set1_ps(bc2);
  for (; i + 8 <= n; i += 8) {
    __m256 gi = _mm256_loadu_ps(g + i);
    __m256 mi = _mm256_fmadd_ps(v1mb1, gi, _mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)));
    __m256 vi = _mm256_fmadd_ps(v1mb2, _mm256_mul_ps(gi, gi),
                                _mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    __m256 mhat = _mm256_mul_ps(mi, vbc1);
    __m256 vhat = _mm256_mul_ps(vi, vbc2);
    __m256 den = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
    __m256 upd = _mm256_div_ps(_mm256_mul_ps(vlr, mhat), den);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
  }
#endif
  adam_impl(p + i, g + i, m + i, v + i, n - i, lr, b1, b2, eps, bc1, bc2);
}

static void adam_f64(double* p, const double* g, double* m, double* v,
                     size_t n, double lr, double b1, double b2, double eps,
                     double bc1, double bc2) {
  adam_impl(p, g, m, v, n, lr, b1, b2, eps, bc1, bc2);
}

}  // namespace

namespace plm::kernels {

Registry PLM_KERNEL_BACKEND() {
  Registry r;
  r.f32 = Table<float>{dot_f32,       axpy_f32,      scale_f32,  sum_f32,
                       matmul_f32,    matmul_nt_f32, matmul_tn_f32,
                       softmax_f32,   gelu_f32,      gelu_bwd_f32, adam_f32};
  r.f64 = Table<double>{dot_f64,      axpy_f64,      scale_f64,  sum_f64,
                        matmul_f64,   matmul_nt_f64, matmul_tn_f64,
                        softmax_f64,  gelu_f64,      gelu_bwd_f64, adam_f64};
  r.name = PLM_KERNEL_NAME;
  return r;
}

}  // namespace plm::kernels
