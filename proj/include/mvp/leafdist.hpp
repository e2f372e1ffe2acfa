#pragma once

// Distributions of the number of distinct leaves touched by c concurrent
// accesses: uniform leaves (X) versus c accesses to one Zipf-placed block (Y).

#include <cstdint>
#include <vector>

namespace mvp {

/// probs[k-1] = Pr(count = k), k = 1..c.
using Distribution = std::vector<double>;

/// w_d for d = 0..L: share of Zipf mass held by ranks [2^d, 2^(d+1)) clipped
/// to N. The serial and parallel versions split the sum into the same fixed
/// chunks and combine them in the same order, so they agree bit for bit.
std::vector<double> level_weights_serial(unsigned L, double alpha, std::uint64_t N);
std::vector<double> level_weights_parallel(unsigned L, double alpha, std::uint64_t N);

/// Exact: P(2^L, k) S(c, k) / 2^(L c).
Distribution dist_X(unsigned L, unsigned c);
/// Exact mixture over levels of the X formula with 2^(L-d) leaves.
Distribution dist_Y(unsigned L, unsigned c, double alpha, std::uint64_t N);
Distribution dist_Y_weighted(unsigned L, unsigned c, const std::vector<double>& weights);

/// Half the L1 distance. Throws InvalidArgument on a support mismatch.
double statistical_distance(const Distribution& p, const Distribution& q);

/// Strong-mode bound: 0 for c <= sigma + 1, otherwise the distance at
/// c - sigma concurrent accesses.
double mu(std::uint64_t N, unsigned c, double alpha, unsigned sigma, unsigned L);

/// One grid point; `delta` is mu(N, c, alpha, sigma, L), which is the plain
/// distance when sigma = 0.
struct TvdCell {
  unsigned L = 1;
  unsigned c = 1;
  double alpha = 1.0;
  unsigned sigma = 0;
  std::uint64_t N = 3;
  double delta = 0;
};

/// Fill in `delta` for every cell. Level weights are shared between cells
/// with the same (L, alpha, N); both versions give identical results.
void compute_tvd_serial(std::vector<TvdCell>& cells);
void compute_tvd_parallel(std::vector<TvdCell>& cells);

struct McOptions {
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 1;
  std::uint64_t chunk = 1 << 14;
};

/// Monte-Carlo estimates. Chunk i always uses the stream derived from
/// (seed, i), so the serial and parallel kernels return identical results.
Distribution mc_dist_X_serial(unsigned L, unsigned c, const McOptions& opt);
Distribution mc_dist_X_parallel(unsigned L, unsigned c, const McOptions& opt);
Distribution mc_dist_Y_serial(unsigned L, unsigned c, const std::vector<double>& weights,
                              const McOptions& opt);
Distribution mc_dist_Y_parallel(unsigned L, unsigned c, const std::vector<double>& weights,
                                const McOptions& opt);

}  // namespace mvp
