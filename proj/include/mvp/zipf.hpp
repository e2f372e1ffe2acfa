#pragma once

#include <cstddef>
#include <vector>

#include "mvp/rng.hpp"

namespace mvp {

/// Ranks 1..n with probability proportional to r^-alpha, drawn by inverse CDF.
class ZipfSampler {
 public:
  ZipfSampler(double alpha, std::size_t n);

  std::size_t sample(Rng& rng) const;
  double pmf(std::size_t rank) const;
  std::size_t size() const noexcept { return cdf_.size(); }
  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
  std::vector<double> cdf_;
};

}  // namespace mvp
