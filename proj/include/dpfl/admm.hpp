#pragma once

#include <limits>
#include <span>

#include "dpfl/mechanisms.hpp"
#include "dpfl/rng.hpp"
#include "dpfl/types.hpp"

namespace dpfl {

/// Penalty schedule rho^t = min(cap, c1 * 1.2^floor(t/Tc) + c2/eps_bar):
/// nondecreasing in t and bounded by cap.
struct RhoSchedule {
  double c1 = 2.0;
  double c2 = 5.0;
  long Tc = 10000;
  double cap = 1e9;

  void validate() const {
    if (c1 <= 0.0) throw validation_error("RhoSchedule: c1 must be > 0");
    if (c2 < 0.0) throw validation_error("RhoSchedule: c2 must be >= 0");
    if (Tc < 1) throw validation_error("RhoSchedule: Tc must be >= 1");
    if (cap <= 0.0) throw validation_error("RhoSchedule: cap must be > 0");
  }
};

/// All per-iteration parameters: the penalty schedule plus the proximity
/// scale `a` multiplying both eta^t = a/sqrt(t) and delta^t = a/t^2.
struct Schedules {
  RhoSchedule rho;
  double prox_scale = 1.0;

  void validate() const {
    rho.validate();
    if (prox_scale <= 0.0) throw validation_error("Schedules: prox_scale must be > 0");
  }
};

/// Feasible region W = [-bound, bound]^(J x K), or unbounded. The unbounded
/// escape hatch voids the compactness assumptions behind the convergence
/// guarantees.
struct FeasibleBox {
  double bound = 100.0;
  bool bounded = true;

  static FeasibleBox unbounded() { return FeasibleBox{0.0, false}; }

  double lo() const { return bounded ? -bound : -std::numeric_limits<double>::infinity(); }
  double hi() const { return bounded ? bound : std::numeric_limits<double>::infinity(); }

  void validate() const {
    if (bounded && bound <= 0.0) throw validation_error("FeasibleBox: bound must be > 0");
  }
};

double rho_schedule(long t, double eps_bar, const Schedules& sched);
double eta_schedule(long t, double prox_scale);
double delta_schedule(long t, double prox_scale);

/// Closed-form consensus update: w = (1/P) sum_p (z_p - lambda_p / rho_t).
Matrix w_update(std::span<const Matrix> z_list, std::span<const Matrix> lambda_list,
                double rho_t);

/// Coordinate-wise clamp of v into [lo, hi]. Exact as a constrained minimizer
/// here because every subproblem objective is an isotropic quadratic around
/// its unconstrained minimizer.
Matrix project_box(const Matrix& v, const Matrix& lo, const Matrix& hi);
Matrix project_box(const Matrix& v, const FeasibleBox& box);

/// Proximal subproblem solution: unconstrained minimizer
///   z* = (rho_t * w_next + lambda_t - xi - grad + z_t / eta_t) / (rho_t + 1/eta_t),
/// projected onto the feasible box. xi = 0 recovers the nonprivate update.
Matrix z_update_prox(const Matrix& z_t, const Matrix& w_next, const Matrix& lambda_t,
                     const Matrix& grad, const Matrix& xi, double rho_t, double eta_t,
                     const FeasibleBox& box);

/// Trust-region subproblem solution: unconstrained minimizer
///   z* = w_next + (lambda_t - xi - grad) / rho_t,
/// clamped coordinate-wise into [z_t - delta_t, z_t + delta_t] intersected
/// with the feasible box. Requires z_t inside the box so the intersection is
/// nonempty.
Matrix z_update_trust(const Matrix& z_t, const Matrix& w_next, const Matrix& lambda_t,
                      const Matrix& grad, const Matrix& xi, double rho_t, double delta_t,
                      const FeasibleBox& box);

/// Output-perturbation baseline: solve the noiseless proximal subproblem, add
/// Gaussian noise of level sigma_t, then project back onto the box. The drawn
/// noise is returned through noise_out when requested (for noise metrics).
Matrix z_update_outp(const Matrix& z_t, const Matrix& w_next, const Matrix& lambda_t,
                     const Matrix& grad, double rho_t, double eta_t, double sigma_t,
                     const FeasibleBox& box, RngStream& rng, Matrix* noise_out = nullptr);

/// Dual ascent step: lambda_t + rho_t * (w_next - z_next).
Matrix dual_update(const Matrix& lambda_t, const Matrix& w_next, const Matrix& z_next,
                   double rho_t);

}  // namespace dpfl
