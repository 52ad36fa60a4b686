#pragma once
// Splitmix64-based PRNG. Self-contained so that sampling is bit-reproducible
// across standard libraries; std::uniform_int_distribution makes no such
// promise. State is a single u64, which keeps checkpointing trivial.

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace plm {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n), n > 0. Multiply-shift bounded reduction.
  std::uint64_t uniform(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double uniform_real() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform_real() < p; }

  double normal(double mean = 0.0, double stddev = 1.0) {
    // Box-Muller, spare discarded: one draw = two u64s, state stays scalar.
    double u1 = uniform_real();
    double u2 = uniform_real();
    while (u1 <= 0.0) u1 = uniform_real();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Uniform sample of k distinct elements, order randomized.
  template <typename T>
  std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k) {
    if (k > pool.size()) k = pool.size();
    std::vector<T> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + uniform(pool.size() - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

// Stateless per-instance seed derivation: hash of (run seed, node, epoch,
// purpose tag). FNV-1a over the components.
inline std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t a,
                                 std::uint64_t b, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (i * 8)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(run_seed);
  mix(a);
  mix(b);
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace plm
