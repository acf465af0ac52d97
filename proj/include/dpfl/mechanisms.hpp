#pragma once

#include <span>

#include "dpfl/rng.hpp"
#include "dpfl/types.hpp"

namespace dpfl {

enum class Mechanism { LaplaceObjective, GaussianOutput, None };

/// Per-iteration privacy parameters. eps_bar is the per-iteration budget;
/// delta_bar, sigma_scale and sigma_decay only matter for the Gaussian
/// output-perturbation baseline.
struct PrivacyConfig {
  double eps_bar = 1.0;
  Mechanism mechanism = Mechanism::None;
  double delta_bar = 1e-6;
  double sigma_scale = 1.0;
  double sigma_decay = 0.25;

  void validate() const {
    if (eps_bar <= 0.0) throw validation_error("PrivacyConfig: eps_bar must be > 0");
    if (mechanism == Mechanism::GaussianOutput && (delta_bar <= 0.0 || delta_bar >= 1.0))
      throw validation_error("PrivacyConfig: delta_bar must be in (0,1) for GaussianOutput");
    if (sigma_scale < 0.0) throw validation_error("PrivacyConfig: sigma_scale must be >= 0");
  }
};

/// L1 sensitivity of the local gradient under removal of one sample with the
/// global normalizer I held fixed:
///   max_{i*} sum_{j,k} | (1/I) x_{i*j} (h_k(z; x_{i*}) - y_{i*k}) |.
/// The regularizer cancels between neighbors and contributes nothing.
/// Empty agent data yields 0; *empty_warning (if given) is set accordingly.
double l1_sensitivity(const Matrix& z, const AgentData& data, const ProblemDims& dims,
                      bool* empty_warning = nullptr);

/// Same structure with the Euclidean norm of the per-sample gradient term.
/// Used to calibrate the Gaussian output-perturbation baseline.
double l2_sensitivity(const Matrix& z, const AgentData& data, const ProblemDims& dims,
                      bool* empty_warning = nullptr);

/// Variants that reuse a precomputed softmax_matrix(z, data.features).
double l1_sensitivity_from_probs(const AgentData& data, const Matrix& probs,
                                 const ProblemDims& dims);
double l2_sensitivity_from_probs(const AgentData& data, const Matrix& probs,
                                 const ProblemDims& dims);

/// I.i.d. per-coordinate Laplace(0, delta_bar_t / eps_bar) noise matrix; the
/// joint density proportional to exp(-eps ||xi||_1 / delta) factorizes per
/// coordinate. delta_bar_t == 0 yields an exact zero matrix.
Matrix sample_laplace_noise(long rows, long cols, double delta_bar_t, double eps_bar,
                            RngStream& rng);

/// I.i.d. per-coordinate N(0, sigma^2) noise matrix; sigma == 0 yields zeros.
Matrix sample_gaussian_noise(long rows, long cols, double sigma, RngStream& rng);

/// Mean absolute entry over a set of equally shaped noise matrices:
///   (1 / (P J K)) sum_{p,j,k} |xi_pjk|.
double avg_noise_magnitude(std::span<const Matrix> noises);

/// Basic sequential composition: total budget after T iterations at eps_bar each.
double compose_epsilon(double eps_bar, long iterations);

/// Gaussian baseline noise level at iteration t:
///   sigma_scale * l2_sens * sqrt(2 ln(1.25/delta_bar)) / eps_bar * t^(-sigma_decay).
/// This approximates a decreasing-variance output-perturbation schedule; it is
/// not a reproduction of any specific published schedule.
double gaussian_sigma_schedule(const PrivacyConfig& privacy, double l2_sens, long t);

}  // namespace dpfl
