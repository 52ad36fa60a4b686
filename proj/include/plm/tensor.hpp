#pragma once
// Dense tensors plus a define-by-run tape for reverse-mode autodiff. Ops are
// coarse (whole-matrix) so the tape stays short and the flops live in the
// kernels layer. Instantiated for float and double; double is the mode the
// finite-difference checks run in.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "plm/kernels.hpp"

namespace plm::nn {

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until ensure_grad()

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s) { resize(std::move(s)); }

  void resize(std::vector<std::int64_t> s) {
    shape = std::move(s);
    data.assign(static_cast<std::size_t>(numel_of(shape)), T(0));
  }
  static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }
  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  std::int64_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }
  T* row(std::int64_t r) { return data.data() + r * cols(); }
  const T* row(std::int64_t r) const { return data.data() + r * cols(); }
  T* grow(std::int64_t r) { return grad.data() + r * cols(); }
};

template <typename T>
class Tape {
 public:
  Tensor<T>* make(std::vector<std::int64_t> shape) {
    nodes_.push_back(std::make_unique<Tensor<T>>(std::move(shape)));
    nodes_.back()->ensure_grad();
    return nodes_.back().get();
  }

  void record(std::function<void()> backward_fn) {
    ops_.push_back(std::move(backward_fn));
  }

  // Seeds d(loss)=1 and unwinds the recorded ops.
  void backward(Tensor<T>* loss) {
    if (loss->numel() != 1) throw TensorError("backward needs a scalar loss");
    loss->grad[0] = T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  void reset() {
    ops_.clear();
    nodes_.clear();
  }

  std::size_t size() const { return ops_.size(); }

 private:
  std::vector<std::unique_ptr<Tensor<T>>> nodes_;
  std::vector<std::function<void()>> ops_;
};

// ------------------------------------------------------------------ tape ops
// Parameters passed as Tensor* leaves must have grad buffers allocated; their
// gradients accumulate across instances until the optimizer clears them.

template <typename T>
Tensor<T>* matmul(Tape<T>& tape, Tensor<T>* a, Tensor<T>* b) {
  if (a->cols() != b->rows()) throw TensorError("matmul shape mismatch");
  Tensor<T>* c = tape.make({a->rows(), b->cols()});
  std::int64_t m = a->rows(), k = a->cols(), n = b->cols();
  kernels::matmul(c->data.data(), a->data.data(), b->data.data(), m, k, n);
  tape.record([a, b, c, m, k, n] {
    // dA += dC * B^T ; dB += A^T * dC
    kernels::matmul_nt(a->grad.data(), c->grad.data(), b->data.data(), m, n, k);
    kernels::matmul_tn(b->grad.data(), a->data.data(), c->grad.data(), k, m, n);
  });
  return c;
}

// y[r,:] = x[r,:] + bias for every row.
template <typename T>
Tensor<T>* add_row_bias(Tape<T>& tape, Tensor<T>* x, Tensor<T>* bias) {
  if (x->cols() != bias->numel()) throw TensorError("bias length mismatch");
  Tensor<T>* y = tape.make({x->rows(), x->cols()});
  std::int64_t rows = x->rows(), cols = x->cols();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x->row(r);
    T* yr = y->row(r);
    for (std::int64_t c = 0; c < cols; ++c) yr[c] = xr[c] + bias->data[c];
  }
  tape.record([x, bias, y, rows, cols] {
    for (std::int64_t r = 0; r < rows; ++r) {
      kernels::axpy(x->grow(r), y->grow(r), T(1), cols);
      kernels::axpy(bias->grad.data(), y->grow(r), T(1), cols);
    }
  });
  return y;
}

template <typename T>
Tensor<T>* add(Tape<T>& tape, Tensor<T>* a, Tensor<T>* b) {
  if (a->numel() != b->numel()) throw TensorError("add shape mismatch");
  Tensor<T>* y = tape.make(a->shape);
  std::int64_t n = a->numel();
  for (std::int64_t i = 0; i < n; ++i) y->data[i] = a->data[i] + b->data[i];
  tape.record([a, b, y, n] {
    kernels::axpy(a->grad.data(), y->grad.data(), T(1), n);
    kernels::axpy(b->grad.data(), y->grad.data(), T(1), n);
  });
  return y;
}

template <typename T>
Tensor<T>* gelu(Tape<T>& tape, Tensor<T>* x) {
  Tensor<T>* y = tape.make(x->shape);
  std::int64_t n = x->numel();
  kernels::gelu(y->data.data(), x->data.data(), n);
  tape.record([x, y, n] {
    kernels::gelu_bwd(x->grad.data(), x->data.data(), y->grad.data(), n);
  });
  return y;
}

// Row-wise layer norm with learnable gain/bias.
template <typename T>
Tensor<T>* layer_norm(Tape<T>& tape, Tensor<T>* x, Tensor<T>* gain,
                      Tensor<T>* bias, T eps = T(1e-5)) {
  std::int64_t rows = x->rows(), cols = x->cols();
  if (gain->numel() != cols || bias->numel() != cols)
    throw TensorError("layer_norm gain/bias length mismatch");
  Tensor<T>* y = tape.make({rows, cols});
  // Cached per-row statistics for backward.
  auto stats = std::make_shared<std::vector<T>>(rows * 2);
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x->row(r);
    T mean = kernels::sum(xr, cols) / T(cols);
    T var = T(0);
    for (std::int64_t c = 0; c < cols; ++c) {
      T d = xr[c] - mean;
      var += d * d;
    }
    var /= T(cols);
    T rstd = T(1) / std::sqrt(var + eps);
    (*stats)[r * 2] = mean;
    (*stats)[r * 2 + 1] = rstd;
    T* yr = y->row(r);
    for (std::int64_t c = 0; c < cols; ++c)
      yr[c] = (xr[c] - mean) * rstd * gain->data[c] + bias->data[c];
  }
  tape.record([x, gain, bias, y, stats, rows, cols] {
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* xr = x->row(r);
      const T* dyr = y->grow(r);
      T mean = (*stats)[r * 2], rstd = (*stats)[r * 2 + 1];
      T dnorm_mean = T(0), dnorm_norm_mean = T(0);
      for (std::int64_t c = 0; c < cols; ++c) {
        T norm = (xr[c] - mean) * rstd;
        T dnorm = dyr[c] * gain->data[c];
        dnorm_mean += dnorm;
        dnorm_norm_mean += dnorm * norm;
        gain->grad[c] += dyr[c] * norm;
        bias->grad[c] += dyr[c];
      }
      dnorm_mean /= T(cols);
      dnorm_norm_mean /= T(cols);
      T* dxr = x->grow(r);
      for (std::int64_t c = 0; c < cols; ++c) {
        T norm = (xr[c] - mean) * rstd;
        T dnorm = dyr[c] * gain->data[c];
        dxr[c] += (dnorm - dnorm_mean - norm * dnorm_norm_mean) * rstd;
      }
    }
  });
  return y;
}

// out = sum of coeff * x over the given scalars.
template <typename T>
Tensor<T>* combine_scalars(Tape<T>& tape, std::vector<Tensor<T>*> xs, T coeff) {
  if (xs.empty()) throw TensorError("combining no scalars");
  Tensor<T>* y = tape.make({1});
  for (Tensor<T>* x : xs) y->data[0] += x->data[0] * coeff;
  tape.record([xs = std::move(xs), y, coeff] {
    for (Tensor<T>* x : xs) x->grad[0] += coeff * y->grad[0];
  });
  return y;
}

template <typename T>
Tensor<T>* mean_scalars(Tape<T>& tape, const std::vector<Tensor<T>*>& xs) {
  return combine_scalars(tape, xs, T(1) / T(xs.size()));
}

template <typename T>
Tensor<T>* sum_scalars(Tape<T>& tape, const std::vector<Tensor<T>*>& xs) {
  return combine_scalars(tape, xs, T(1));
}

}  // namespace plm::nn
