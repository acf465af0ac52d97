#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dpfl/mechanisms.hpp"
#include "dpfl/rng.hpp"
#include "support.hpp"

using namespace dpfl;

TEST_CASE("streams are bit-reproducible for identical ids") {
  RngStream a(42, 3, 17);
  RngStream b(42, 3, 17);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42, 3, 18);
  RngStream d(42, 3, 17);
  bool all_equal = true;
  for (int i = 0; i < 64; ++i) all_equal = all_equal && (c.next_u64() == d.next_u64());
  CHECK_FALSE(all_equal);
}

TEST_CASE("distinct streams are uncorrelated") {
  const long n = 1000000;
  RngStream a(7, 1, 5);
  RngStream b(7, 2, 5);
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (long i = 0; i < n; ++i) {
    double x = a.next_unit();
    double y = b.next_unit();
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  double mx = sx / n, my = sy / n;
  double r = (sxy / n - mx * my) /
             std::sqrt((sxx / n - mx * mx) * (syy / n - my * my));
  CHECK(std::fabs(r) < 0.01);
}

TEST_CASE("unit draws stay strictly inside (0,1)") {
  RngStream rng(3, 0, 0);
  for (int i = 0; i < 100000; ++i) {
    double u = rng.next_unit();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("laplace mean absolute value equals the scale") {
  RngStream rng(11, 0, 0);
  const long n = 1000000;
  double sum_abs = 0.0;
  for (long i = 0; i < n; ++i) sum_abs += std::fabs(rng.next_laplace(1.0));
  CHECK(std::fabs(sum_abs / n - 1.0) <= 0.01);
}

TEST_CASE("laplace empirical cdf at +-scale matches 1 - e^-1 / 2") {
  RngStream rng(12, 0, 0);
  const long n = 1000000;
  long below_minus = 0, below_plus = 0;
  for (long i = 0; i < n; ++i) {
    double v = rng.next_laplace(1.0);
    if (v <= -1.0) ++below_minus;
    if (v <= 1.0) ++below_plus;
  }
  double lower = std::exp(-1.0) / 2.0;             // P(X <= -b)
  double upper = 1.0 - std::exp(-1.0) / 2.0;       // P(X <= +b)
  CHECK(std::fabs(static_cast<double>(below_minus) / n - lower) <= 0.01);
  CHECK(std::fabs(static_cast<double>(below_plus) / n - upper) <= 0.01);
}

TEST_CASE("doubling eps_bar exactly halves laplace draws from the same stream") {
  Matrix a = [] {
    RngStream rng(9, 2, 4);
    return sample_laplace_noise(6, 5, 1.0, 1.0, rng);
  }();
  Matrix b = [] {
    RngStream rng(9, 2, 4);
    return sample_laplace_noise(6, 5, 1.0, 2.0, rng);
  }();
  for (long i = 0; i < a.size(); ++i)
    CHECK(a.data()[i] == doctest::Approx(2.0 * b.data()[i]).epsilon(1e-15));
  double mean_a = a.abs_sum() / a.size();
  double mean_b = b.abs_sum() / b.size();
  CHECK(std::fabs(mean_a / mean_b - 2.0) <= 0.02 * 2.0);
}

TEST_CASE("laplace sampler contracts") {
  RngStream rng(10, 0, 0);
  Matrix zero = sample_laplace_noise(3, 4, 0.0, 1.0, rng);
  for (double v : zero) CHECK(v == 0.0);
  CHECK_THROWS_AS(sample_laplace_noise(2, 2, -1.0, 1.0, rng), validation_error);
  CHECK_THROWS_AS(sample_laplace_noise(2, 2, 1.0, 0.0, rng), validation_error);
}

TEST_CASE("gaussian sampler moments") {
  RngStream rng(13, 0, 0);
  const long n = 1000000;
  double sum = 0.0, sum2 = 0.0, sum_abs2 = 0.0;
  for (long i = 0; i < n; ++i) {
    double v = rng.next_gaussian(1.0);
    sum += v;
    sum2 += v * v;
    sum_abs2 += std::fabs(2.0 * v);  // draws at sigma = 2 are exact rescalings
  }
  double var = sum2 / n - (sum / n) * (sum / n);
  CHECK(std::fabs(var - 1.0) <= 0.01);
  double expected_abs = 2.0 * std::sqrt(2.0 / 3.14159265358979323846);
  CHECK(std::fabs(sum_abs2 / n - expected_abs) <= 0.02 * expected_abs);
}

TEST_CASE("gaussian sampler contracts") {
  RngStream rng(14, 0, 0);
  Matrix zero = sample_gaussian_noise(4, 3, 0.0, rng);
  for (double v : zero) CHECK(v == 0.0);
  CHECK_THROWS_AS(sample_gaussian_noise(2, 2, -0.5, rng), validation_error);
}

TEST_CASE("sensitivities on hand-checkable blocks") {
  // Single sample: the max is that sample's own term.
  Matrix features(1, 2);
  features(0, 0) = 0.5;
  features(0, 1) = -1.5;
  AgentData data = make_agent_data(features, {1}, 3);
  ProblemDims dims{1, 2, 3, 4, 0.9};
  Matrix z(2, 3, 0.0);

  double l1 = l1_sensitivity(z, data, dims);
  // h = 1/3 each; sum_k |h_k - y_k| = 1/3 + 2/3 + 1/3 = 4/3; sum_j |x_j| = 2.
  CHECK(l1 == doctest::Approx(2.0 * (4.0 / 3.0) / 4.0).epsilon(1e-13));

  // All features zero: nothing to leak.
  AgentData zeros = make_agent_data(Matrix(3, 2, 0.0), {0, 1, 2}, 3);
  CHECK(l1_sensitivity(z, zeros, dims) == 0.0);
  CHECK(l2_sensitivity(z, zeros, dims) == 0.0);
}

TEST_CASE("l2 equals l1 on a single-coordinate contribution") {
  // K = 1 with a zero label row leaves h - y = 1, so the contribution matrix
  // has the lone entry x/I.
  Matrix features(1, 1);
  features(0, 0) = -2.5;
  AgentData data{features, Matrix(1, 1, 0.0)};
  ProblemDims dims{1, 1, 1, 5, 0.0};
  Matrix z(1, 1, 0.3);
  double l1 = l1_sensitivity(z, data, dims);
  double l2 = l2_sensitivity(z, data, dims);
  CHECK(l1 == doctest::Approx(2.5 / 5.0).epsilon(1e-14));
  CHECK(l2 == doctest::Approx(l1).epsilon(1e-14));
}

TEST_CASE("norm equivalence between the sensitivity flavors") {
  for (uint64_t trial = 0; trial < 30; ++trial) {
    RngStream rng(15, 0, trial);
    long J = 1 + static_cast<long>(rng.next_u64() % 5);
    long K = 1 + static_cast<long>(rng.next_u64() % 5);
    AgentData data = testsupport::random_agent_data(rng, 6, J, K);
    ProblemDims dims{2, J, K, 9, 0.1};
    Matrix z = testsupport::random_matrix(rng, J, K);
    double l1 = l1_sensitivity(z, data, dims);
    double l2 = l2_sensitivity(z, data, dims);
    CHECK(l2 <= l1 * (1.0 + 1e-12));
    CHECK(l2 >= l1 / std::sqrt(static_cast<double>(J * K)) * (1.0 - 1e-12));
  }
}

TEST_CASE("empty agent data reports a warning and zero sensitivity") {
  AgentData empty{Matrix(0, 2), Matrix(0, 3)};
  ProblemDims dims{1, 2, 3, 10, 0.0};
  bool warned = false;
  CHECK(l1_sensitivity(Matrix(2, 3, 0.0), empty, dims, &warned) == 0.0);
  CHECK(warned);
  warned = false;
  CHECK(l2_sensitivity(Matrix(2, 3, 0.0), empty, dims, &warned) == 0.0);
  CHECK(warned);
}

TEST_CASE("avg_noise_magnitude") {
  std::vector<Matrix> noises;
  CHECK_THROWS_AS(avg_noise_magnitude(noises), validation_error);

  noises.assign(3, Matrix(2, 2, 0.0));
  CHECK(avg_noise_magnitude(noises) == 0.0);

  noises.assign(3, Matrix(2, 2, 1.0));
  CHECK(avg_noise_magnitude(noises) == 1.0);

  RngStream rng(16, 0, 0);
  noises.clear();
  long double expected = 0.0L;
  for (int p = 0; p < 4; ++p) {
    noises.push_back(testsupport::random_matrix(rng, 3, 2));
    for (double v : noises.back()) expected += std::fabs(static_cast<long double>(v));
  }
  expected /= 4.0L * 3.0L * 2.0L;
  CHECK(avg_noise_magnitude(noises) ==
        doctest::Approx(static_cast<double>(expected)).epsilon(1e-14));

  noises.push_back(Matrix(2, 2, 0.0));
  CHECK_THROWS_AS(avg_noise_magnitude(noises), validation_error);
}

TEST_CASE("compose_epsilon is plain multiplication") {
  CHECK(compose_epsilon(1.0, 0) == 0.0);
  CHECK(compose_epsilon(1.0, 1) == 1.0);
  CHECK(compose_epsilon(0.05, 20000) == doctest::Approx(1000.0).epsilon(1e-14));
  CHECK_THROWS_AS(compose_epsilon(1.0, -1), validation_error);
}

TEST_CASE("gaussian sigma schedule decreases in t and in eps") {
  PrivacyConfig privacy;
  privacy.eps_bar = 0.1;
  privacy.mechanism = Mechanism::GaussianOutput;
  privacy.delta_bar = 1e-6;
  privacy.sigma_scale = 1.0;
  double s1 = gaussian_sigma_schedule(privacy, 0.5, 1);
  double s16 = gaussian_sigma_schedule(privacy, 0.5, 16);
  CHECK(s1 == doctest::Approx(0.5 * std::sqrt(2.0 * std::log(1.25e6)) / 0.1));
  CHECK(s16 == doctest::Approx(s1 / 2.0));  // 16^(-1/4) = 1/2
  privacy.eps_bar = 0.2;
  CHECK(gaussian_sigma_schedule(privacy, 0.5, 1) == doctest::Approx(s1 / 2.0));
}
