#include "mvp/zipf.hpp"

#include <algorithm>
#include <cmath>

#include "mvp/error.hpp"

namespace mvp {

ZipfSampler::ZipfSampler(double alpha, std::size_t n) : alpha_(alpha), cdf_(n) {
  if (n == 0) throw InvalidArgument("zipf support must be non-empty");
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw InvalidArgument("zipf alpha must be finite and >= 0");
  long double acc = 0;
  std::vector<long double> prefix(n);
  for (std::size_t r = 1; r <= n; ++r) {
    acc += std::pow(static_cast<long double>(r), -static_cast<long double>(alpha));
    prefix[r - 1] = acc;
  }
  for (std::size_t i = 0; i < n; ++i) cdf_[i] = static_cast<double>(prefix[i] / acc);
  cdf_.back() = 1.0;
}

std::size_t ZipfSampler::sample(Rng& rng) const {
  const double u = rng.unit();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), cdf_.size() - 1)) + 1;
}

double ZipfSampler::pmf(std::size_t rank) const {
  if (rank == 0 || rank > cdf_.size()) return 0.0;
  return rank == 1 ? cdf_[0] : cdf_[rank - 1] - cdf_[rank - 2];
}

}  // namespace mvp
