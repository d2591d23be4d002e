#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qchain/chain_sim.hpp"
#include "qchain/moments.hpp"

using namespace qchain;

namespace {

bool within(const Estimate &e, double exact, double sigmas) {
  return e.defined && std::abs(e.value - exact) <= sigmas * e.standard_error;
}

}  // namespace

TEST_CASE("uniform01 lies in [0, 1) and streams differ") {
  auto a = make_stream(7, 0);
  auto b = make_stream(7, 1);
  auto c = make_stream(7, 0);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(a);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double w = uniform01(b);
    differs = differs || u != w;
    CHECK(uniform01(c) == u);
  }
  CHECK(differs);
}

TEST_CASE("sample_path is deterministic") {
  const auto k = q_mehler_kernel(0.5, 0.6, 16);
  const auto p1 = sample_path(k, 10000, 42, "k");
  const auto p2 = sample_path(k, 10000, 42, "k");
  const auto p3 = sample_path(k, 10000, 43, "k");
  CHECK(p1.state_indices == p2.state_indices);
  CHECK(p1.state_indices != p3.state_indices);
  CHECK(p1.node_count == 16);
  CHECK(p1.kernel_id == "k");
  for (auto s : p1.state_indices) CHECK(s < 16u);
  CHECK_THROWS_AS(sample_path(k, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_path(q_mehler_kernel(1.0, 0.9, 32, NegativityPolicy::keep_signed), 10, 1),
                  std::invalid_argument);
}

TEST_CASE("sample_path never takes a zero-probability transition") {
  Vector<double> x(3), w(3);
  x << -std::sqrt(1.5), 0.0, std::sqrt(1.5);
  w << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  Matrix<double> P(3, 3);
  P << 0, 1, 0, 0.5, 0, 0.5, 0, 1, 0;
  const TransitionKernel<double> k(KernelFamily::mehler, DiscreteMeasure<double>(x, w), P, 0.5, 0.0,
                                   {build_q_recurrence(0.0, 4), Vector<double>::Zero(4)}, {});
  const auto p = sample_path(k, 20000, 3);
  for (std::size_t t = 1; t < p.size(); ++t) {
    CHECK(P(p.state_indices[t - 1], p.state_indices[t]) > 0.0);
  }
}

TEST_CASE("batch means") {
  std::vector<double> constant(1000, 2.5);
  const auto e = batch_means(constant);
  CHECK(e.value == doctest::Approx(2.5));
  CHECK(e.standard_error == doctest::Approx(0.0));
  // Batch b holds the value b: mean 49.5, sd of the batch means sqrt(841.67)/10.
  std::vector<double> ramp;
  for (int b = 0; b < 100; ++b) ramp.insert(ramp.end(), 10, static_cast<double>(b));
  const auto r = batch_means(ramp);
  CHECK(r.value == doctest::Approx(49.5));
  CHECK(r.standard_error == doctest::Approx(std::sqrt(100.0 * 101.0 / 12.0) / 10.0));
  CHECK(!batch_means(std::vector<double>(50, 1.0)).defined);
  CHECK_THROWS_AS(batch_means(ramp, 1), std::invalid_argument);
}

TEST_CASE("empirical correlations") {
  const auto two = two_valued_kernel(0.25, 0.25);
  const auto p = sample_path(two, 1'000'000, 11);
  CHECK(empirical_correlation(p, two.nodes(), 0).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(within(empirical_correlation(p, two.nodes(), 1), 0.5, 3));
  CHECK(within(empirical_correlation(p, two.nodes(), 2), 0.25, 3));

  const auto cheb = chebyshev_kernel(0.6, 32);
  const auto pc = sample_path(cheb, 1'000'000, 12);
  CHECK(within(empirical_correlation(pc, cheb.nodes(), 1), 0.3, 3));

  const auto near = q_mehler_kernel(1.0, 1e-6, 32);
  const auto pn = sample_path(near, 1'000'000, 13);
  CHECK(within(empirical_correlation(pn, near.nodes(), 1), 0.0, 3));

  CHECK(!empirical_correlation(std::vector<double>(100, 1.0), 1).defined);
  CHECK_THROWS_AS(empirical_correlation(p, two.nodes(), p.size()), std::out_of_range);
}

TEST_CASE("empirical mixed moments") {
  // E(X_0^2 X_1^2) = 1 + 2 r^2 for a standard gaussian pair.
  const auto g = q_mehler_kernel(1.0, 0.3, 32);
  const auto p = sample_path(g, 1'000'000, 21);
  CHECK(within(empirical_mixed_moment(p, g.nodes(), {1}), 0.0, 3));
  CHECK(within(empirical_mixed_moment(p, g.nodes(), {2, 2}), 1.18, 3));

  const auto pm = q_mehler_kernel(-1.0, 0.5, 2);
  const auto e = empirical_mixed_moment(sample_path(pm, 10000, 22), pm.nodes(), {4});
  CHECK(std::abs(e.value - 1.0) < 1e-12);
}

TEST_CASE("empirical conditional moments") {
  const auto k = q_mehler_kernel(0.0, 0.6, 8);
  const auto p = sample_path(k, 1'000'000, 31);
  const auto est = empirical_conditional_moment(p, k.nodes(), 2);
  const Vector<double> exact = conditional_moment(k, 2);
  int defined = 0;
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    if (!est[i].defined) continue;
    ++defined;
    CHECK(std::abs(est[i].value - exact[i]) <= 4 * est[i].standard_error);
  }
  CHECK(defined >= 4);
  const auto sparse = empirical_conditional_moment(sample_path(k, 50, 31), k.nodes(), 2);
  for (const auto &e : sparse) CHECK(!e.defined);
}

TEST_CASE("decorrelation stride") {
  CHECK(decorrelation_stride(two_valued_kernel(0.25, 0.25)) ==
        static_cast<std::size_t>(std::ceil(std::log(1e-3) / std::log(0.5))));
  CHECK(decorrelation_stride(q_mehler_kernel(0.5, -0.6, 32)) ==
        static_cast<std::size_t>(std::ceil(std::log(1e-3) / std::log(0.6))));
}

TEST_CASE("occupancy chi-square") {
  const auto k = q_mehler_kernel(0.5, 0.3, 32);
  const auto p = sample_path(k, 1'000'000, 41);
  const auto occ = occupancy_chi_square(p, k.weights(), decorrelation_stride(k));
  std::size_t total = 0;
  for (auto c : occ.counts) total += c;
  CHECK(total == occ.samples);
  CHECK(occ.degrees_of_freedom >= 1);
  CHECK(occ.degrees_of_freedom < 31);  // the tail nodes are pooled
  CHECK(occ.statistic < chi_square_quantile(0.999, occ.degrees_of_freedom));
  CHECK_THROWS_AS(occupancy_chi_square(p, k.weights(), 0), std::invalid_argument);
}

TEST_CASE("chi-square quantile against Wilson-Hilferty") {
  const double z = 3.090232306167813;  // standard normal 0.999 quantile
  for (int dof : {10, 20, 50, 200}) {
    const double h = 2.0 / (9.0 * dof);
    const double approx = dof * std::pow(1 - h + z * std::sqrt(h), 3);
    CHECK(std::abs(chi_square_quantile(0.999, dof) - approx) < 0.01 * approx);
  }
  CHECK(chi_square_quantile(0.95, 1) == doctest::Approx(3.841458820694124));
  CHECK_THROWS_AS(chi_square_quantile(0.5, 0), std::invalid_argument);
}

TEST_CASE("binary path round trip") {
  const auto k = q_mehler_kernel(0.0, 0.3, 12);
  const auto p = sample_path(k, 1000, 5);
  std::stringstream buffer;
  write_path_binary(p, buffer);
  const std::string bytes = buffer.str();
  REQUIRE(bytes.size() == 16 + 4 * 1000);
  CHECK(bytes.substr(0, 4) == "QCHN");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[6]) == 12);
  CHECK(static_cast<unsigned char>(bytes[8]) == (1000 & 0xff));
  CHECK(static_cast<unsigned char>(bytes[9]) == (1000 >> 8));
  CHECK(static_cast<unsigned char>(bytes[16]) == p.state_indices[0]);
  const auto back = read_path_binary(buffer);
  CHECK(back.state_indices == p.state_indices);
  CHECK(back.node_count == 12);
}

TEST_CASE("binary path rejects malformed input") {
  std::stringstream bad_magic("QCHX");
  CHECK_THROWS_AS(read_path_binary(bad_magic), PathFormatError);

  const auto k = two_valued_kernel(0.25, 0.25);
  std::stringstream buffer;
  write_path_binary(sample_path(k, 10, 1), buffer);
  std::string bytes = buffer.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 2));
  CHECK_THROWS_AS(read_path_binary(truncated), PathFormatError);

  bytes[16] = 5;  // node count is 2
  std::stringstream out_of_range(bytes);
  CHECK_THROWS_AS(read_path_binary(out_of_range), PathFormatError);

  std::string huge = buffer.str().substr(0, 16);
  for (int b = 8; b < 16; ++b) huge[b] = static_cast<char>(0xff);
  std::stringstream claims_too_much(huge);
  CHECK_THROWS_AS(read_path_binary(claims_too_much), PathFormatError);
}

TEST_CASE("csv path export") {
  const auto k = two_valued_kernel(0.2, 0.3);
  const auto p = sample_path(k, 5, 9);
  std::ostringstream out;
  write_path_csv(p, k.nodes(), out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,state,value");
  for (std::size_t t = 0; t < 5; ++t) {
    REQUIRE(std::getline(in, line));
    std::istringstream row(line);
    std::string a, b, c;
    std::getline(row, a, ',');
    std::getline(row, b, ',');
    std::getline(row, c, ',');
    CHECK(std::stoul(a) == t);
    CHECK(std::stoul(b) == p.state_indices[t]);
    CHECK(std::stod(c) == k.nodes()[p.state_indices[t]]);
  }
  CHECK(!std::getline(in, line));
}
