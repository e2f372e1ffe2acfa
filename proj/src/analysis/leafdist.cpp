#include "mvp/leafdist.hpp"

#include <omp.h>

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <map>
#include <tuple>

#include "mvp/error.hpp"
#include "mvp/rng.hpp"

namespace mvp {
namespace {

using boost::multiprecision::cpp_int;

constexpr std::uint64_t kWeightChunk = 1 << 16;

struct Chunk {
  unsigned level;
  std::uint64_t first;
  std::uint64_t last;  // inclusive
};

std::vector<Chunk> weight_chunks(unsigned L, std::uint64_t N) {
  std::vector<Chunk> out;
  for (unsigned d = 0; d <= L; ++d) {
    const std::uint64_t lo = std::uint64_t{1} << d;
    const std::uint64_t hi = std::min<std::uint64_t>((lo << 1) - 1, N);
    for (std::uint64_t a = lo; a <= hi; a += kWeightChunk) {
      out.push_back({d, a, std::min(hi, a + kWeightChunk - 1)});
    }
  }
  return out;
}

long double chunk_sum(const Chunk& c, double alpha) {
  long double sum = 0, comp = 0;  // Kahan
  for (std::uint64_t j = c.first; j <= c.last; ++j) {
    const long double term = std::exp(-alpha * std::log(static_cast<double>(j)));
    const long double y = term - comp;
    const long double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

std::vector<double> combine(unsigned L, const std::vector<Chunk>& chunks,
                            const std::vector<long double>& sums) {
  std::vector<long double> level(L + 1, 0);
  long double total = 0;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    level[chunks[i].level] += sums[i];
    total += sums[i];
  }
  std::vector<double> w(L + 1);
  for (unsigned d = 0; d <= L; ++d) w[d] = static_cast<double>(level[d] / total);
  return w;
}

void check_weight_args(unsigned L, double alpha, std::uint64_t N) {
  if (L == 0 || L > 40) throw InvalidArgument("height must be in [1, 40]");
  if (N == 0) throw InvalidArgument("N must be positive");
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be finite and >= 0");
}

// num / 2^e as a double without overflow.
double ratio_pow2(const cpp_int& num, std::uint64_t e) {
  if (num == 0) return 0.0;
  const auto bits = static_cast<std::int64_t>(boost::multiprecision::msb(num)) + 1;
  if (bits > 62) {
    const cpp_int top = num >> static_cast<unsigned>(bits - 62);
    return std::ldexp(static_cast<double>(top.convert_to<std::uint64_t>()),
                      static_cast<int>(bits - 62 - static_cast<std::int64_t>(e)));
  }
  return std::ldexp(static_cast<double>(num.convert_to<std::uint64_t>()), -static_cast<int>(e));
}

// S(c, k) for k = 0..c.
std::vector<cpp_int> stirling_row(unsigned c) {
  std::vector<cpp_int> row(c + 1, 0);
  row[0] = 1;
  for (unsigned n = 1; n <= c; ++n) {
    for (unsigned k = n; k >= 1; --k) row[k] = k * row[k] + row[k - 1];
    row[0] = 0;
  }
  return row;
}

// P(2^m, k) S(c, k) / 2^(m c), k = 1..c.
Distribution leaf_count(unsigned m, unsigned c, const std::vector<cpp_int>& stirling) {
  Distribution p(c, 0.0);
  const cpp_int leaves = cpp_int(1) << m;
  cpp_int falling = 1;
  for (unsigned k = 1; k <= c; ++k) {
    if (leaves < k) break;
    falling *= leaves - (k - 1);
    p[k - 1] = ratio_pow2(falling * stirling[k], std::uint64_t{m} * c);
  }
  return p;
}

unsigned distinct(const std::uint64_t* xs, unsigned c) {
  unsigned count = 0;
  for (unsigned i = 0; i < c; ++i) {
    bool seen = false;
    for (unsigned j = 0; j < i && !seen; ++j) seen = xs[j] == xs[i];
    if (!seen) ++count;
  }
  return count;
}

template <class Trial>
std::vector<std::uint64_t> mc_chunk(const McOptions& opt, std::uint64_t chunk, unsigned c, Trial trial) {
  std::vector<std::uint64_t> hist(c + 1, 0);
  Rng rng(derive_seed(opt.seed, chunk));
  const std::uint64_t first = chunk * opt.chunk;
  const std::uint64_t n = std::min(opt.chunk, opt.samples - first);
  std::vector<std::uint64_t> buf(c);
  for (std::uint64_t i = 0; i < n; ++i) ++hist[trial(rng, buf.data())];
  return hist;
}

Distribution normalise(const std::vector<std::uint64_t>& hist, unsigned c, std::uint64_t samples) {
  Distribution p(c);
  for (unsigned k = 1; k <= c; ++k) p[k - 1] = static_cast<double>(hist[k]) / static_cast<double>(samples);
  return p;
}

template <class Trial>
Distribution mc_run(const McOptions& opt, unsigned c, bool parallel, Trial trial) {
  if (c == 0 || opt.samples == 0 || opt.chunk == 0) throw InvalidArgument("bad Monte-Carlo options");
  const std::uint64_t chunks = (opt.samples + opt.chunk - 1) / opt.chunk;
  std::vector<std::vector<std::uint64_t>> parts(chunks);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(chunks); ++i) {
      parts[i] = mc_chunk(opt, static_cast<std::uint64_t>(i), c, trial);
    }
  } else {
    for (std::uint64_t i = 0; i < chunks; ++i) parts[i] = mc_chunk(opt, i, c, trial);
  }
  std::vector<std::uint64_t> hist(c + 1, 0);
  for (const auto& part : parts) {
    for (unsigned k = 0; k <= c; ++k) hist[k] += part[k];
  }
  return normalise(hist, c, opt.samples);
}

auto x_trial(unsigned L, unsigned c) {
  return [L, c](Rng& rng, std::uint64_t* buf) {
    for (unsigned i = 0; i < c; ++i) buf[i] = rng.below(std::uint64_t{1} << L);
    return distinct(buf, c);
  };
}

auto y_trial(unsigned L, unsigned c, const std::vector<double>& weights) {
  std::vector<double> cdf(weights.size());
  double acc = 0;
  for (std::size_t d = 0; d < weights.size(); ++d) cdf[d] = acc += weights[d];
  cdf.back() = 1.0;
  return [L, c, cdf](Rng& rng, std::uint64_t* buf) {
    const double u = rng.unit();
    const auto d = static_cast<unsigned>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const unsigned level = std::min<unsigned>(d, L);
    for (unsigned i = 0; i < c; ++i) buf[i] = rng.below(std::uint64_t{1} << (L - level));
    return distinct(buf, c);
  };
}

}  // namespace

std::vector<double> level_weights_serial(unsigned L, double alpha, std::uint64_t N) {
  check_weight_args(L, alpha, N);
  const auto chunks = weight_chunks(L, N);
  std::vector<long double> sums(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) sums[i] = chunk_sum(chunks[i], alpha);
  return combine(L, chunks, sums);
}

std::vector<double> level_weights_parallel(unsigned L, double alpha, std::uint64_t N) {
  check_weight_args(L, alpha, N);
  const auto chunks = weight_chunks(L, N);
  std::vector<long double> sums(chunks.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(chunks.size()); ++i) {
    sums[i] = chunk_sum(chunks[i], alpha);
  }
  return combine(L, chunks, sums);
}

Distribution dist_X(unsigned L, unsigned c) {
  if (L == 0 || c == 0) throw InvalidArgument("need L >= 1 and c >= 1");
  return leaf_count(L, c, stirling_row(c));
}

Distribution dist_Y_weighted(unsigned L, unsigned c, const std::vector<double>& weights) {
  if (L == 0 || c == 0) throw InvalidArgument("need L >= 1 and c >= 1");
  if (weights.size() != L + 1) throw InvalidArgument("need one weight per level");
  const auto stirling = stirling_row(c);
  Distribution p(c, 0.0);
  for (unsigned d = 0; d <= L; ++d) {
    if (weights[d] == 0) continue;
    const auto part = leaf_count(L - d, c, stirling);
    for (unsigned k = 0; k < c; ++k) p[k] += weights[d] * part[k];
  }
  return p;
}

Distribution dist_Y(unsigned L, unsigned c, double alpha, std::uint64_t N) {
  return dist_Y_weighted(L, c, level_weights_parallel(L, alpha, N));
}

double statistical_distance(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) throw InvalidArgument("distributions have different supports");
  double s = 0;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
  return 0.5 * s;
}

double mu(std::uint64_t N, unsigned c, double alpha, unsigned sigma, unsigned L) {
  if (c <= sigma + 1) return 0.0;
  const unsigned cs = c - sigma;
  return statistical_distance(dist_X(L, cs), dist_Y(L, cs, alpha, N));
}

namespace {

using WeightKey = std::tuple<unsigned, double, std::uint64_t>;

double cell_delta(const TvdCell& cell, const std::vector<double>& w) {
  if (cell.c <= cell.sigma + 1) return 0.0;
  const unsigned cs = cell.c - cell.sigma;
  return statistical_distance(dist_X(cell.L, cs), dist_Y_weighted(cell.L, cs, w));
}

std::map<WeightKey, std::vector<double>> weight_table(const std::vector<TvdCell>& cells, bool parallel) {
  std::map<WeightKey, std::vector<double>> table;
  for (const auto& cell : cells) {
    const WeightKey k{cell.L, cell.alpha, cell.N};
    if (table.count(k)) continue;
    table[k] = parallel ? level_weights_parallel(cell.L, cell.alpha, cell.N)
                        : level_weights_serial(cell.L, cell.alpha, cell.N);
  }
  return table;
}

}  // namespace

void compute_tvd_serial(std::vector<TvdCell>& cells) {
  const auto table = weight_table(cells, false);
  for (auto& cell : cells) cell.delta = cell_delta(cell, table.at({cell.L, cell.alpha, cell.N}));
}

void compute_tvd_parallel(std::vector<TvdCell>& cells) {
  const auto table = weight_table(cells, true);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(cells.size()); ++i) {
    auto& cell = cells[i];
    cell.delta = cell_delta(cell, table.at({cell.L, cell.alpha, cell.N}));
  }
}

Distribution mc_dist_X_serial(unsigned L, unsigned c, const McOptions& opt) {
  return mc_run(opt, c, false, x_trial(L, c));
}

Distribution mc_dist_X_parallel(unsigned L, unsigned c, const McOptions& opt) {
  return mc_run(opt, c, true, x_trial(L, c));
}

Distribution mc_dist_Y_serial(unsigned L, unsigned c, const std::vector<double>& weights,
                              const McOptions& opt) {
  return mc_run(opt, c, false, y_trial(L, c, weights));
}

Distribution mc_dist_Y_parallel(unsigned L, unsigned c, const std::vector<double>& weights,
                                const McOptions& opt) {
  return mc_run(opt, c, true, y_trial(L, c, weights));
}

}  // namespace mvp
