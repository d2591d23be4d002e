#include "qchain/chain_sim.hpp"

#include <algorithm>
#include <array>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace qchain {

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64 &engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

namespace {

double ipow(double x, int k) {
  double out = 1.0;
  for (int i = 0; i < k; ++i) out *= x;
  return out;
}

std::size_t draw(const double *cumulative, std::size_t n, double u) {
  const double target = u * cumulative[n - 1];
  const double *hit = std::upper_bound(cumulative, cumulative + n, target);
  return std::min<std::size_t>(static_cast<std::size_t>(hit - cumulative), n - 1);
}

}  // namespace

PathSample sample_path(const TransitionKernel<double> &k, std::size_t length, std::uint64_t seed,
                       std::string kernel_id) {
  if (length < 2) throw std::invalid_argument("sample_path: length must be at least 2");
  if (k.is_signed()) throw std::invalid_argument("sample_path: kernel has negative entries");
  if (k.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw std::invalid_argument("sample_path: too many states");
  }
  const auto n = static_cast<std::size_t>(k.size());
  std::vector<double> start(n);
  std::vector<double> rows(n * n);
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) start[j] = acc += k.weights()[j];
  for (std::size_t i = 0; i < n; ++i) {
    acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) rows[i * n + j] = acc += k.matrix()(i, j);
  }

  auto engine = make_stream(seed);
  PathSample out;
  out.seed = seed;
  out.kernel_id = std::move(kernel_id);
  out.node_count = static_cast<std::uint16_t>(n);
  out.state_indices.resize(length);
  std::size_t state = draw(start.data(), n, uniform01(engine));
  out.state_indices[0] = static_cast<std::uint32_t>(state);
  for (std::size_t t = 1; t < length; ++t) {
    state = draw(rows.data() + state * n, n, uniform01(engine));
    out.state_indices[t] = static_cast<std::uint32_t>(state);
  }
  return out;
}

namespace {

/// Batch means of term(t) for t < count without materializing the series.
template <typename Term>
Estimate streamed_batch_means(std::size_t count, int batches, Term term) {
  if (batches < 2) throw std::invalid_argument("batch_means: need at least two batches");
  const std::size_t size = count / static_cast<std::size_t>(batches);
  if (size == 0) return {0.0, 0.0, false};
  double mean = 0.0, sum_sq = 0.0;
  std::vector<double> means(static_cast<std::size_t>(batches));
  for (int b = 0; b < batches; ++b) {
    double sum = 0.0;
    const std::size_t start = static_cast<std::size_t>(b) * size;
    for (std::size_t t = start; t < start + size; ++t) sum += term(t);
    means[b] = sum / static_cast<double>(size);
    mean += means[b];
  }
  mean /= batches;
  for (double m : means) sum_sq += (m - mean) * (m - mean);
  return {mean, std::sqrt(sum_sq / (batches - 1) / batches), true};
}

}  // namespace

Estimate batch_means(const std::vector<double> &series, int batches) {
  return streamed_batch_means(series.size(), batches, [&](std::size_t t) { return series[t]; });
}

std::vector<double> path_values(const PathSample &p, const Vector<double> &nodes) {
  std::vector<double> x(p.size());
  for (std::size_t t = 0; t < p.size(); ++t) {
    const auto s = p.state_indices[t];
    if (s >= static_cast<std::uint32_t>(nodes.size())) {
      throw std::out_of_range("path state index exceeds the node set");
    }
    x[t] = nodes[s];
  }
  return x;
}

Estimate empirical_correlation(const std::vector<double> &x, std::size_t lag) {
  if (lag >= x.size()) throw std::out_of_range("empirical_correlation: lag must be below length");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  if (!(var > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), 0.0, false};
  auto est = streamed_batch_means(x.size() - lag, kBatchCount, [&](std::size_t t) {
    return (x[t] - mean) * (x[t + lag] - mean) / var;
  });
  if (lag == 0) est.value = 1.0;
  return est;
}

Estimate empirical_correlation(const PathSample &p, const Vector<double> &nodes, std::size_t lag) {
  return empirical_correlation(path_values(p, nodes), lag);
}

Estimate empirical_mixed_moment(const std::vector<double> &x, const std::vector<int> &exponents) {
  if (exponents.empty() || exponents.size() > x.size()) {
    throw std::invalid_argument("empirical_mixed_moment: bad exponent list");
  }
  for (int e : exponents) {
    if (e < 0) throw std::invalid_argument("empirical_mixed_moment: negative exponent");
  }
  const std::size_t d = exponents.size();
  return streamed_batch_means(x.size() - d + 1, kBatchCount, [&](std::size_t t) {
    double prod = 1.0;
    for (std::size_t m = 0; m < d; ++m) prod *= ipow(x[t + m], exponents[m]);
    return prod;
  });
}

Estimate empirical_mixed_moment(const PathSample &p, const Vector<double> &nodes,
                                const std::vector<int> &exponents) {
  return empirical_mixed_moment(path_values(p, nodes), exponents);
}

std::vector<Estimate> empirical_conditional_moment(const PathSample &p, const Vector<double> &nodes,
                                                   int power, std::size_t min_visits) {
  if (power < 0) throw std::invalid_argument("empirical_conditional_moment: negative power");
  const auto n = static_cast<std::size_t>(nodes.size());
  std::vector<double> sum(n, 0.0), sum2(n, 0.0);
  std::vector<std::size_t> visits(n, 0);
  for (std::size_t t = 0; t + 1 < p.size(); ++t) {
    const auto s = p.state_indices[t];
    const double v = ipow(nodes[p.state_indices[t + 1]], power);
    sum[s] += v;
    sum2[s] += v * v;
    ++visits[s];
  }
  std::vector<Estimate> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (visits[i] < std::max<std::size_t>(min_visits, 2)) {
      out[i] = {std::numeric_limits<double>::quiet_NaN(), 0.0, false};
      continue;
    }
    const double c = static_cast<double>(visits[i]);
    const double mean = sum[i] / c;
    const double var = std::max(0.0, (sum2[i] - c * mean * mean) / (c - 1));
    out[i] = {mean, std::sqrt(var / c), true};
  }
  return out;
}

std::size_t decorrelation_stride(const TransitionKernel<double> &k, double residual) {
  const auto &lambda = k.spectral().eigenvalues;
  const Eigen::Index modes = std::min<Eigen::Index>(lambda.size(), k.size());
  double slowest = 0.0;
  for (Eigen::Index j = 1; j < modes; ++j) slowest = std::max(slowest, std::abs(lambda[j]));
  if (slowest <= 0.0) return 1;
  if (slowest >= 1.0) throw std::invalid_argument("decorrelation_stride: kernel does not mix");
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::log(residual) / std::log(slowest))));
}

OccupancyTest occupancy_chi_square(const PathSample &p, const Vector<double> &weights,
                                   std::size_t thinning, double min_expected) {
  if (thinning == 0) throw std::invalid_argument("occupancy_chi_square: thinning must be positive");
  const auto n = static_cast<std::size_t>(weights.size());
  OccupancyTest out;
  out.thinning = thinning;
  out.counts.assign(n, 0);
  for (std::size_t t = 0; t < p.size(); t += thinning) {
    ++out.counts.at(p.state_indices[t]);
    ++out.samples;
  }
  const double total = static_cast<double>(out.samples);
  std::vector<std::pair<double, double>> cells;  // (observed, expected)
  double observed = 0.0, expected = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    observed += static_cast<double>(out.counts[i]);
    expected += total * weights[i];
    if (expected >= min_expected) {
      cells.emplace_back(observed, expected);
      observed = expected = 0.0;
    }
  }
  if (expected > 0.0 || observed > 0.0) {
    if (cells.empty()) {
      cells.emplace_back(observed, expected);
    } else {
      cells.back().first += observed;
      cells.back().second += expected;
    }
  }
  double stat = 0.0;
  for (const auto &[o, e] : cells) stat += (o - e) * (o - e) / e;
  const int cell_count = static_cast<int>(cells.size());
  out.statistic = stat;
  out.degrees_of_freedom = std::max(cell_count - 1, 0);
  return out;
}

double chi_square_quantile(double probability, int degrees_of_freedom) {
  if (degrees_of_freedom < 1)
    throw std::invalid_argument("chi_square_quantile: dof must be positive");
  return boost::math::quantile(boost::math::chi_squared(degrees_of_freedom), probability);
}

namespace {

constexpr std::array<char, 4> kMagic{'Q', 'C', 'H', 'N'};
constexpr std::uint16_t kPathVersion = 1;

template <typename T>
void put_le(std::ostream &out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * b)) & 0xff));
  }
}

template <typename T>
T get_le(std::istream &in) {
  std::uint64_t value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw PathFormatError("path: truncated input");
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
  }
  return static_cast<T>(value);
}

}  // namespace

void write_path_binary(const PathSample &p, std::ostream &out) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(out, kPathVersion);
  put_le<std::uint16_t>(out, p.node_count);
  put_le<std::uint64_t>(out, p.size());
  for (auto s : p.state_indices) put_le<std::uint32_t>(out, s);
  if (!out) throw std::ios_base::failure("path: write failed");
}

PathSample read_path_binary(std::istream &in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw PathFormatError("path: bad magic");
  const auto version = get_le<std::uint16_t>(in);
  if (version != kPathVersion) throw PathFormatError("path: unsupported version");
  PathSample p;
  p.node_count = get_le<std::uint16_t>(in);
  const auto length = get_le<std::uint64_t>(in);
  p.state_indices.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(length, 1u << 20)));
  for (std::uint64_t t = 0; t < length; ++t) {
    const auto s = get_le<std::uint32_t>(in);
    if (s >= p.node_count) throw PathFormatError("path: state index out of range");
    p.state_indices.push_back(s);
  }
  return p;
}

void write_path_csv(const PathSample &p, const Vector<double> &nodes, std::ostream &out) {
  const auto precision = out.precision(17);
  out << "t,state,value\n";
  for (std::size_t t = 0; t < p.size(); ++t) {
    out << t << ',' << p.state_indices[t] << ',' << nodes[p.state_indices[t]] << '\n';
  }
  out.precision(precision);
  if (!out) throw std::ios_base::failure("path: write failed");
}

}  // namespace qchain
