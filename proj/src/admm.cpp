#include "dpfl/admm.hpp"

#include <algorithm>
#include <cmath>

namespace dpfl {

double rho_schedule(long t, double eps_bar, const Schedules& sched) {
  if (t < 1) throw validation_error("rho_schedule: t must be >= 1");
  if (eps_bar <= 0.0) throw validation_error("rho_schedule: eps_bar must be > 0");
  double growth = std::pow(1.2, static_cast<double>(t / sched.rho.Tc));
  return std::min(sched.rho.cap, sched.rho.c1 * growth + sched.rho.c2 / eps_bar);
}

double eta_schedule(long t, double prox_scale) {
  if (t < 1) throw validation_error("eta_schedule: t must be >= 1");
  return prox_scale / std::sqrt(static_cast<double>(t));
}

double delta_schedule(long t, double prox_scale) {
  if (t < 1) throw validation_error("delta_schedule: t must be >= 1");
  return prox_scale / (static_cast<double>(t) * static_cast<double>(t));
}

Matrix w_update(std::span<const Matrix> z_list, std::span<const Matrix> lambda_list,
                double rho_t) {
  if (z_list.empty()) throw validation_error("w_update: no agents");
  if (z_list.size() != lambda_list.size())
    throw validation_error("w_update: z and lambda list sizes differ");
  if (rho_t <= 0.0) throw validation_error("w_update: rho_t must be > 0");

  Matrix w(z_list[0].rows(), z_list[0].cols(), 0.0);
  for (size_t p = 0; p < z_list.size(); ++p) {
    require_same_shape(z_list[p], w, "w_update");
    require_same_shape(lambda_list[p], w, "w_update");
    const Matrix& z = z_list[p];
    const Matrix& lambda = lambda_list[p];
    for (long i = 0; i < w.size(); ++i)
      w.data()[i] += z.data()[i] - lambda.data()[i] / rho_t;
  }
  double inv_p = 1.0 / static_cast<double>(z_list.size());
  for (double& v : w) v *= inv_p;
  return w;
}

Matrix project_box(const Matrix& v, const Matrix& lo, const Matrix& hi) {
  require_same_shape(v, lo, "project_box");
  require_same_shape(v, hi, "project_box");
  Matrix out = v;
  for (long i = 0; i < out.size(); ++i) {
    if (lo.data()[i] > hi.data()[i])
      throw validation_error("project_box: empty box (lo > hi)");
    out.data()[i] = std::clamp(out.data()[i], lo.data()[i], hi.data()[i]);
  }
  return out;
}

Matrix project_box(const Matrix& v, const FeasibleBox& box) {
  if (!box.bounded) return v;
  Matrix out = v;
  for (double& x : out) x = std::clamp(x, box.lo(), box.hi());
  return out;
}

Matrix z_update_prox(const Matrix& z_t, const Matrix& w_next, const Matrix& lambda_t,
                     const Matrix& grad, const Matrix& xi, double rho_t, double eta_t,
                     const FeasibleBox& box) {
  if (rho_t <= 0.0) throw validation_error("z_update_prox: rho_t must be > 0");
  if (eta_t <= 0.0) throw validation_error("z_update_prox: eta_t must be > 0");
  require_same_shape(z_t, w_next, "z_update_prox");
  require_same_shape(z_t, lambda_t, "z_update_prox");
  require_same_shape(z_t, grad, "z_update_prox");
  require_same_shape(z_t, xi, "z_update_prox");

  double inv_eta = 1.0 / eta_t;
  double denom = rho_t + inv_eta;
  Matrix z(z_t.rows(), z_t.cols());
  for (long i = 0; i < z.size(); ++i)
    z.data()[i] = (rho_t * w_next.data()[i] + lambda_t.data()[i] - xi.data()[i] -
                   grad.data()[i] + inv_eta * z_t.data()[i]) /
                  denom;
  return project_box(z, box);
}

Matrix z_update_trust(const Matrix& z_t, const Matrix& w_next, const Matrix& lambda_t,
                      const Matrix& grad, const Matrix& xi, double rho_t, double delta_t,
                      const FeasibleBox& box) {
  if (rho_t <= 0.0) throw validation_error("z_update_trust: rho_t must be > 0");
  if (delta_t < 0.0) throw validation_error("z_update_trust: delta_t must be >= 0");
  require_same_shape(z_t, w_next, "z_update_trust");
  require_same_shape(z_t, lambda_t, "z_update_trust");
  require_same_shape(z_t, grad, "z_update_trust");
  require_same_shape(z_t, xi, "z_update_trust");

  Matrix z(z_t.rows(), z_t.cols());
  for (long i = 0; i < z.size(); ++i) {
    double lo = std::max(z_t.data()[i] - delta_t, box.lo());
    double hi = std::min(z_t.data()[i] + delta_t, box.hi());
    // Nonempty by the loop invariant z_t in W; a violation is a caller bug.
    if (lo > hi)
      throw validation_error("z_update_trust: empty trust-region intersection (z_t outside box)");
    double unconstrained =
        w_next.data()[i] + (lambda_t.data()[i] - xi.data()[i] - grad.data()[i]) / rho_t;
    z.data()[i] = std::clamp(unconstrained, lo, hi);
  }
  return z;
}

Matrix z_update_outp(const Matrix& z_t, const Matrix& w_next, const Matrix& lambda_t,
                     const Matrix& grad, double rho_t, double eta_t, double sigma_t,
                     const FeasibleBox& box, RngStream& rng, Matrix* noise_out) {
  Matrix zero_xi(z_t.rows(), z_t.cols(), 0.0);
  Matrix z = z_update_prox(z_t, w_next, lambda_t, grad, zero_xi, rho_t, eta_t, box);
  Matrix noise = sample_gaussian_noise(z.rows(), z.cols(), sigma_t, rng);
  for (long i = 0; i < z.size(); ++i) z.data()[i] += noise.data()[i];
  if (noise_out != nullptr) *noise_out = std::move(noise);
  return project_box(z, box);
}

Matrix dual_update(const Matrix& lambda_t, const Matrix& w_next, const Matrix& z_next,
                   double rho_t) {
  require_same_shape(lambda_t, w_next, "dual_update");
  require_same_shape(lambda_t, z_next, "dual_update");
  Matrix out(lambda_t.rows(), lambda_t.cols());
  for (long i = 0; i < out.size(); ++i)
    out.data()[i] = lambda_t.data()[i] + rho_t * (w_next.data()[i] - z_next.data()[i]);
  return out;
}

}  // namespace dpfl
