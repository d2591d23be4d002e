#ifndef QCHAIN_CHAIN_SIM_HPP_
#define QCHAIN_CHAIN_SIM_HPP_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qchain/kernels.hpp"

namespace qchain {

/// Name recorded in reports; the engine is fully specified by the standard.
inline constexpr const char *kRandomEngineName = "mt19937_64+seed_seq";

struct PathSample {
  std::vector<std::uint32_t> state_indices;
  std::uint64_t seed = 0;
  std::string kernel_id;
  std::uint16_t node_count = 0;

  std::size_t size() const { return state_indices.size(); }
};

/// One deterministic stream per (seed, stream) pair.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream = 0);

/// Uniform on [0, 1) from the top 53 bits, independent of the library's
/// distribution implementations.
double uniform01(std::mt19937_64 &engine);

/*
 * Stationary path: X_0 from the weights, then inverse-CDF steps along the
 * cumulative rows.  Signed kernels cannot be sampled.
 */
PathSample sample_path(const TransitionKernel<double> &k, std::size_t length, std::uint64_t seed,
                       std::string kernel_id = {});

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
  bool defined = true;
};

inline constexpr int kBatchCount = 100;

/// Mean of the series with a batch-means standard error over kBatchCount batches.
Estimate batch_means(const std::vector<double> &series, int batches = kBatchCount);

std::vector<double> path_values(const PathSample &p, const Vector<double> &nodes);

/// Sample lag correlation; undefined when the path has no spread.
Estimate empirical_correlation(const PathSample &p, const Vector<double> &nodes, std::size_t lag);
Estimate empirical_correlation(const std::vector<double> &values, std::size_t lag);

/// Window average of prod_m X_{t+m}^{exponents[m]}.
Estimate empirical_mixed_moment(const PathSample &p, const Vector<double> &nodes,
                                const std::vector<int> &exponents);
Estimate empirical_mixed_moment(const std::vector<double> &values,
                                const std::vector<int> &exponents);

/*
 * Per-state average of X_{t+1}^power over visits to state i.  Given the
 * visited states the successors are independent, so the plain standard
 * error applies.  States visited fewer than min_visits times are undefined.
 */
std::vector<Estimate> empirical_conditional_moment(const PathSample &p, const Vector<double> &nodes,
                                                   int power, std::size_t min_visits = 100);

struct OccupancyTest {
  std::vector<std::size_t> counts;  // per node, over the thinned path
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  std::size_t thinning = 1;
  std::size_t samples = 0;
};

/// Thinning stride after which |lambda|^stride < residual for the slowest mode.
std::size_t decorrelation_stride(const TransitionKernel<double> &k, double residual = 1e-3);

/*
 * Pearson chi-square of thinned occupancy counts against the weights.
 * Adjacent nodes are pooled until each cell expects at least min_expected.
 */
OccupancyTest occupancy_chi_square(const PathSample &p, const Vector<double> &weights,
                                   std::size_t thinning, double min_expected = 5.0);

double chi_square_quantile(double probability, int degrees_of_freedom);

class PathFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 16-byte header ("QCHN", u16 version, u16 node count, u64 length) followed
/// by u32 indices, all little-endian.
void write_path_binary(const PathSample &p, std::ostream &out);
PathSample read_path_binary(std::istream &in);

/// "t,state,value" rows.
void write_path_csv(const PathSample &p, const Vector<double> &nodes, std::ostream &out);

}  // namespace qchain

#endif  // QCHAIN_CHAIN_SIM_HPP_
