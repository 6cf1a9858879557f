#include "hpo/util/rng.h"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace hpo {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : key_(SplitMix64(SplitMix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL))) {}

Rng Rng::Split(std::uint64_t stream) const { return Rng(key_, stream + 1); }

std::uint64_t Rng::NextU64() {
  // Two rounds of mixing over (key, counter).
  const std::uint64_t c = counter_++;
  return SplitMix64(key_ ^ SplitMix64(c + 0x632BE59BD9B4E019ULL));
}

double Rng::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double Rng::Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

std::uint64_t Rng::UniformInt(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::UniformInt: n must be > 0");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t r;
  do {
    r = NextU64();
  } while (r >= limit);
  return r % n;
}

double Rng::Normal() {
  // Box-Muller, one variate per call (the sine branch is discarded so that
  // each call consumes a fixed number of counter slots).
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::Poisson(double mean) {
  if (!(mean >= 0.0)) throw std::invalid_argument("Rng::Poisson: mean < 0");
  if (mean == 0.0) return 0;
  if (mean > 500.0) {
    throw std::invalid_argument("Rng::Poisson: mean too large for inversion");
  }
  const double u = Uniform();
  int k = 0;
  double pmf = std::exp(-mean);
  double cdf = pmf;
  while (u >= cdf) {
    ++k;
    pmf *= mean / k;
    cdf += pmf;
    if (pmf == 0.0 && k > mean) break;  // cdf saturated below u by rounding
  }
  return k;
}

int Rng::Categorical(std::span<const double> probs) {
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  const double u = Uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding can leave u == total; return the last index with mass.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  throw std::invalid_argument("Rng::Categorical: no positive probability");
}

std::vector<int> Rng::Permutation(int n) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(UniformInt(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

}  // namespace hpo
