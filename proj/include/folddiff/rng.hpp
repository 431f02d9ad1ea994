#ifndef FOLDDIFF_RNG_HPP
#define FOLDDIFF_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

#include "folddiff/mathutil.hpp"

namespace folddiff {

// splitmix64 finalizer; used both as a stream mixer and to derive independent
// seeds from (seed, stream tags...). Every randomized task in the pipeline
// owns a seed derived this way, so results do not depend on execution order.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t t : tags) {
    s = mix64(s ^ mix64(t + 0x243f6a8885a308d3ULL));
  }
  return s;
}

// Stream tags for the main randomized tasks.
namespace rngtag {
constexpr std::uint64_t kFolds = 1;
constexpr std::uint64_t kPropensity = 2;
constexpr std::uint64_t kPresence = 3;
constexpr std::uint64_t kPositiveMean = 4;
constexpr std::uint64_t kMaxT = 5;
constexpr std::uint64_t kReplicate = 6;
constexpr std::uint64_t kPermutation = 7;
constexpr std::uint64_t kLatent = 8;
}  // namespace rngtag

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::mt19937_64& engine() { return engine_; }

  double uniform() {
    // 53-bit mantissa draw in [0,1).
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased bounded draw by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t rem = std::numeric_limits<std::uint64_t>::max() % n;
    const std::uint64_t cutoff = std::numeric_limits<std::uint64_t>::max() - rem;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v > cutoff);
    return v % n;
  }

  // Inverse-CDF normal draw (portable across standard libraries).
  double normal() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return norm_quantile(u);
  }

  double gamma(double shape, double scale) {
    std::gamma_distribution<double> d(shape, scale);
    return d(engine_);
  }

  long long poisson(double mean) {
    std::poisson_distribution<long long> d(mean);
    return d(engine_);
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // Fisher-Yates shuffle using the rejection draw above.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Random permutation of {0, ..., n-1}.
  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    shuffle(p);
    return p;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace folddiff

#endif
