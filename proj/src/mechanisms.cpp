#include "dpfl/mechanisms.hpp"

#include <cmath>

#include "dpfl/model.hpp"

namespace dpfl {

namespace {

void check_sensitivity_inputs(const Matrix& z, const AgentData& data) {
  if (data.features.rows() != data.labels.rows())
    throw validation_error("sensitivity: features and labels row counts differ");
  if (data.rows() > 0 &&
      (data.features.cols() != z.rows() || data.labels.cols() != z.cols()))
    throw validation_error("sensitivity: agent block shape does not match z");
}

// Shared max-over-samples loop; norm(|x| aggregate, |h - y| aggregate) is the
// L1 product for the L1 case and the product of Euclidean norms for L2, both
// exact because the per-sample term is the outer product x (h - y)^T.
template <bool kEuclidean>
double max_removal_norm(const AgentData& data, const Matrix& probs, const ProblemDims& dims) {
  double best = 0.0;
  for (long i = 0; i < data.rows(); ++i) {
    double x_norm = 0.0;
    for (long j = 0; j < data.features.cols(); ++j) {
      double v = data.features(i, j);
      x_norm += kEuclidean ? v * v : std::fabs(v);
    }
    double r_norm = 0.0;
    for (long k = 0; k < data.labels.cols(); ++k) {
      double d = probs(i, k) - data.labels(i, k);
      r_norm += kEuclidean ? d * d : std::fabs(d);
    }
    double term = kEuclidean ? std::sqrt(x_norm) * std::sqrt(r_norm) : x_norm * r_norm;
    best = std::max(best, term);
  }
  return best / static_cast<double>(dims.I);
}

}  // namespace

double l1_sensitivity_from_probs(const AgentData& data, const Matrix& probs,
                                 const ProblemDims& dims) {
  return max_removal_norm<false>(data, probs, dims);
}

double l2_sensitivity_from_probs(const AgentData& data, const Matrix& probs,
                                 const ProblemDims& dims) {
  return max_removal_norm<true>(data, probs, dims);
}

double l1_sensitivity(const Matrix& z, const AgentData& data, const ProblemDims& dims,
                      bool* empty_warning) {
  check_sensitivity_inputs(z, data);
  if (empty_warning != nullptr) *empty_warning = data.rows() == 0;
  if (data.rows() == 0) return 0.0;
  return l1_sensitivity_from_probs(data, softmax_matrix(z, data.features), dims);
}

double l2_sensitivity(const Matrix& z, const AgentData& data, const ProblemDims& dims,
                      bool* empty_warning) {
  check_sensitivity_inputs(z, data);
  if (empty_warning != nullptr) *empty_warning = data.rows() == 0;
  if (data.rows() == 0) return 0.0;
  return l2_sensitivity_from_probs(data, softmax_matrix(z, data.features), dims);
}

Matrix sample_laplace_noise(long rows, long cols, double delta_bar_t, double eps_bar,
                            RngStream& rng) {
  if (delta_bar_t < 0.0) throw validation_error("sample_laplace_noise: negative sensitivity");
  if (eps_bar <= 0.0) throw validation_error("sample_laplace_noise: eps_bar must be > 0");
  double scale = delta_bar_t / eps_bar;
  Matrix noise(rows, cols);
  for (double& v : noise) v = rng.next_laplace(scale);
  return noise;
}

Matrix sample_gaussian_noise(long rows, long cols, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw validation_error("sample_gaussian_noise: negative sigma");
  Matrix noise(rows, cols);
  for (double& v : noise) v = rng.next_gaussian(sigma);
  return noise;
}

double avg_noise_magnitude(std::span<const Matrix> noises) {
  if (noises.empty()) throw validation_error("avg_noise_magnitude: empty noise list");
  double total = 0.0;
  long entries = 0;
  for (const Matrix& m : noises) {
    if (!m.same_shape(noises[0]))
      throw validation_error("avg_noise_magnitude: noise matrices have mixed shapes");
    total += m.abs_sum();
    entries += m.size();
  }
  if (entries == 0) throw validation_error("avg_noise_magnitude: zero-sized noise matrices");
  return total / static_cast<double>(entries);
}

double compose_epsilon(double eps_bar, long iterations) {
  if (iterations < 0) throw validation_error("compose_epsilon: negative iteration count");
  return eps_bar * static_cast<double>(iterations);
}

double gaussian_sigma_schedule(const PrivacyConfig& privacy, double l2_sens, long t) {
  if (t < 1) throw validation_error("gaussian_sigma_schedule: t must be >= 1");
  double width = std::sqrt(2.0 * std::log(1.25 / privacy.delta_bar));
  return privacy.sigma_scale * l2_sens * width / privacy.eps_bar *
         std::pow(static_cast<double>(t), -privacy.sigma_decay);
}

}  // namespace dpfl
