#ifndef HPO_UTIL_RNG_H_
#define HPO_UTIL_RNG_H_

#include <cstdint>
#include <span>
#include <vector>

namespace hpo {

// Counter-based generator: draw n of stream (key) is a pure hash of
// (key, n), so results are identical on every platform and independent of
// how draws are interleaved across streams. All distribution transforms are
// implemented here rather than via <random> distributions, whose outputs are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  // Child generator with an independent key.
  Rng Split(std::uint64_t stream) const;

  std::uint64_t NextU64();
  // Uniform on [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::uint64_t UniformInt(std::uint64_t n);
  double Normal();
  // Poisson by sequential inversion of the CDF; exact for the small means
  // used by the inventory benchmarks.
  int Poisson(double mean);
  // Index drawn with probability proportional to probs[i].
  int Categorical(std::span<const double> probs);
  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> Permutation(int n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t SplitMix64(std::uint64_t x);

}  // namespace hpo

#endif  // HPO_UTIL_RNG_H_
