#pragma once

// Shared helpers for the test suites: seeded generators plus independent
// high-precision oracles for the model formulas. The oracles are deliberately
// written as direct summations so they share no code with the library paths
// they check.

#include <cmath>
#include <vector>

#include "dpfl/rng.hpp"
#include "dpfl/types.hpp"

namespace testsupport {

inline dpfl::Matrix random_matrix(dpfl::RngStream& rng, long rows, long cols,
                                  double scale = 1.0) {
  dpfl::Matrix m(rows, cols);
  for (double& v : m) v = scale * rng.next_gaussian(1.0);
  return m;
}

inline dpfl::AgentData random_agent_data(dpfl::RngStream& rng, long rows, long J, long K) {
  dpfl::Matrix features(rows, J);
  for (double& v : features) v = rng.next_gaussian(1.0);
  std::vector<int> labels(static_cast<size_t>(rows));
  for (auto& l : labels) l = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(K));
  return dpfl::make_agent_data(features, labels, K);
}

inline double rel_err(double actual, double expected) {
  double denom = std::max(std::fabs(expected), 1e-300);
  return std::fabs(actual - expected) / denom;
}

// Extended-precision softmax for one sample.
inline std::vector<long double> softmax_oracle(const dpfl::Matrix& w,
                                               const std::vector<double>& x) {
  std::vector<long double> logits(static_cast<size_t>(w.cols()), 0.0L);
  for (long k = 0; k < w.cols(); ++k)
    for (long j = 0; j < w.rows(); ++j)
      logits[static_cast<size_t>(k)] += static_cast<long double>(x[static_cast<size_t>(j)]) *
                                        static_cast<long double>(w(j, k));
  long double m = logits[0];
  for (long double v : logits) m = std::max(m, v);
  long double denom = 0.0L;
  for (long double& v : logits) {
    v = std::exp(v - m);
    denom += v;
  }
  for (long double& v : logits) v /= denom;
  return logits;
}

// Extended-precision local objective by direct re-summation.
inline long double loss_oracle(const dpfl::Matrix& z, const dpfl::AgentData& data,
                               const dpfl::ProblemDims& dims) {
  long double total = 0.0L;
  for (long i = 0; i < data.rows(); ++i) {
    std::vector<double> x(static_cast<size_t>(data.features.cols()));
    for (long j = 0; j < data.features.cols(); ++j) x[static_cast<size_t>(j)] =
        data.features(i, j);
    std::vector<long double> h = softmax_oracle(z, x);
    for (long k = 0; k < data.labels.cols(); ++k)
      if (data.labels(i, k) != 0.0)
        total -= static_cast<long double>(data.labels(i, k)) *
                 std::log(h[static_cast<size_t>(k)]);
  }
  total /= static_cast<long double>(dims.I);
  long double reg = 0.0L;
  for (double v : z) reg += static_cast<long double>(v) * static_cast<long double>(v);
  return total + reg * static_cast<long double>(dims.beta) /
                     static_cast<long double>(dims.P);
}

}  // namespace testsupport
