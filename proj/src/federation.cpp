#include "dpfl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dpfl/model.hpp"

namespace dpfl {

bool algorithm_uses_trust_region(Algorithm a) {
  return a == Algorithm::ObjT || a == Algorithm::NonPrivateTrust;
}

Mechanism default_mechanism(Algorithm a) {
  switch (a) {
    case Algorithm::ObjP:
    case Algorithm::ObjT:
      return Mechanism::LaplaceObjective;
    case Algorithm::OutP:
      return Mechanism::GaussianOutput;
    default:
      return Mechanism::None;
  }
}

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::ObjP: return "ObjP";
    case Algorithm::ObjT: return "ObjT";
    case Algorithm::OutP: return "OutP";
    case Algorithm::NonPrivateProx: return "NonPrivate-Prox";
    case Algorithm::NonPrivateTrust: return "NonPrivate-Trust";
  }
  return "?";
}

const char* mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::LaplaceObjective: return "LaplaceObjective";
    case Mechanism::GaussianOutput: return "GaussianOutput";
    case Mechanism::None: return "None";
  }
  return "?";
}

void RunConfig::validate() const {
  if (iterations < 0) throw validation_error("RunConfig: T must be >= 0");
  if (log_every < 1) throw validation_error("RunConfig: log_every must be >= 1");
  privacy.validate();
  schedules.validate();
  box.validate();
  dims.validate();
  Mechanism expected = default_mechanism(algorithm);
  if (privacy.mechanism != expected)
    throw validation_error(std::string("RunConfig: algorithm ") + algorithm_name(algorithm) +
                           " requires mechanism " + mechanism_name(expected));
}

std::vector<AgentData> partition_homogeneous(const Matrix& features, const Matrix& labels,
                                             long num_agents, RngStream& rng) {
  const long rows = features.rows();
  if (num_agents < 1) throw validation_error("partition_homogeneous: P must be >= 1");
  if (features.rows() != labels.rows())
    throw validation_error("partition_homogeneous: features and labels row counts differ");
  if (num_agents > rows)
    throw validation_error("partition_homogeneous: more agents (" + std::to_string(num_agents) +
                           ") than rows (" + std::to_string(rows) + ")");

  std::vector<long> order(static_cast<size_t>(rows));
  std::iota(order.begin(), order.end(), 0L);
  // Fisher-Yates on the keyed stream so the partition depends only on the seed.
  for (long i = rows - 1; i > 0; --i) {
    long j = static_cast<long>(rng.next_u64() % static_cast<uint64_t>(i + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }

  long base = rows / num_agents;
  long extra = rows % num_agents;
  std::vector<AgentData> agents;
  agents.reserve(static_cast<size_t>(num_agents));
  long offset = 0;
  for (long p = 0; p < num_agents; ++p) {
    long count = base + (p < extra ? 1 : 0);
    Matrix f(count, features.cols());
    Matrix y(count, labels.cols());
    for (long r = 0; r < count; ++r) {
      long src = order[static_cast<size_t>(offset + r)];
      for (long j = 0; j < features.cols(); ++j) f(r, j) = features(src, j);
      for (long k = 0; k < labels.cols(); ++k) y(r, k) = labels(src, k);
    }
    agents.push_back(AgentData{std::move(f), std::move(y)});
    offset += count;
  }
  return agents;
}

double consensus_violation(const Matrix& w, std::span<const Matrix> z_list) {
  double total = 0.0;
  for (const Matrix& z : z_list) {
    require_same_shape(w, z, "consensus_violation");
    for (long i = 0; i < w.size(); ++i) total += std::fabs(w.data()[i] - z.data()[i]);
  }
  return total;
}

namespace {

struct RoundOutput {
  double noise_abs_sum = 0.0;
  long bad_agent = -1;  // agent whose state went non-finite, if any
  std::string error;    // deferred exception message from the parallel section
};

int resolve_threads(int requested, long num_agents) {
  if (requested > 0) return static_cast<int>(std::min<long>(requested, num_agents));
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return static_cast<int>(std::min<long>(static_cast<long>(hw), num_agents));
}

}  // namespace

RunResult run_experiment(const RunConfig& config, const std::vector<AgentData>& agents,
                         const AgentData* test) {
  config.validate();
  const long P = static_cast<long>(agents.size());
  if (P == 0) throw validation_error("run_experiment: no agents");
  if (config.dims.P != P)
    throw validation_error("run_experiment: dims.P = " + std::to_string(config.dims.P) +
                           " but " + std::to_string(P) + " agent blocks were given");
  long total_rows = 0;
  for (const AgentData& a : agents) total_rows += a.rows();
  if (config.dims.I != total_rows)
    throw validation_error("run_experiment: dims.I = " + std::to_string(config.dims.I) +
                           " but agents hold " + std::to_string(total_rows) + " rows");

  const long J = config.dims.J;
  const long K = config.dims.K;
  const bool trust = algorithm_uses_trust_region(config.algorithm);
  const Mechanism mech = config.privacy.mechanism;

  RunResult result;
  result.w = Matrix::zeros(J, K);
  result.z.assign(static_cast<size_t>(P), Matrix::zeros(J, K));
  result.lambda.assign(static_cast<size_t>(P), Matrix::zeros(J, K));
  result.w_avg = Matrix::zeros(J, K);
  result.z_avg.assign(static_cast<size_t>(P), Matrix::zeros(J, K));
  if (config.iterations == 0) return result;

  std::vector<AgentState> states;
  states.reserve(static_cast<size_t>(P));
  for (long p = 0; p < P; ++p)
    states.push_back(AgentState{static_cast<int>(p), agents[static_cast<size_t>(p)],
                                Matrix::zeros(J, K), Matrix::zeros(J, K)});

  // Shape-compatible scratch lists feeding the span-based consensus ops.
  std::vector<Matrix> z_list(static_cast<size_t>(P), Matrix::zeros(J, K));
  std::vector<Matrix> lambda_list(static_cast<size_t>(P), Matrix::zeros(J, K));
  auto gather = [&] {
    for (long p = 0; p < P; ++p) {
      z_list[static_cast<size_t>(p)] = states[static_cast<size_t>(p)].z;
      lambda_list[static_cast<size_t>(p)] = states[static_cast<size_t>(p)].lambda;
    }
  };

  std::vector<Matrix> z_sum(static_cast<size_t>(P), Matrix::zeros(J, K));
  Matrix w_sum = Matrix::zeros(J, K);
  std::vector<RoundOutput> round_out(static_cast<size_t>(P));
  const int threads = resolve_threads(config.threads, P);
  (void)threads;  // only consumed by the omp pragma

  for (long t = 1; t <= config.iterations; ++t) {
    const double rho_t = rho_schedule(t, config.privacy.eps_bar, config.schedules);
    const double prox_t = trust ? delta_schedule(t, config.schedules.prox_scale)
                                : eta_schedule(t, config.schedules.prox_scale);

    // Averaged iterates use the round's starting z (z^1 included) and the
    // freshly computed w.
    for (long p = 0; p < P; ++p) {
      const Matrix& z = states[static_cast<size_t>(p)].z;
      Matrix& acc = z_sum[static_cast<size_t>(p)];
      for (long i = 0; i < acc.size(); ++i) acc.data()[i] += z.data()[i];
    }

    gather();
    const Matrix w_next = w_update(z_list, lambda_list, rho_t);
    for (long i = 0; i < w_sum.size(); ++i) w_sum.data()[i] += w_next.data()[i];

#pragma omp parallel for schedule(static) num_threads(threads)
    for (long p = 0; p < P; ++p) {
      AgentState& state = states[static_cast<size_t>(p)];
      const AgentData& data = state.data;
      Matrix& z = state.z;
      Matrix& lambda = state.lambda;
      RoundOutput& out = round_out[static_cast<size_t>(p)];
      out = RoundOutput{};
      try {
        Matrix probs = data.rows() > 0 ? softmax_matrix(z, data.features) : Matrix();
        Matrix grad = local_gradient_from_probs(z, data, probs, config.dims);
        RngStream stream(config.seed, static_cast<uint64_t>(p), static_cast<uint64_t>(t));

        switch (mech) {
          case Mechanism::LaplaceObjective: {
            double delta_bar_t = l1_sensitivity_from_probs(data, probs, config.dims);
            Matrix xi =
                sample_laplace_noise(J, K, delta_bar_t, config.privacy.eps_bar, stream);
            out.noise_abs_sum = xi.abs_sum();
            z = trust ? z_update_trust(z, w_next, lambda, grad, xi, rho_t, prox_t, config.box)
                      : z_update_prox(z, w_next, lambda, grad, xi, rho_t, prox_t, config.box);
            break;
          }
          case Mechanism::GaussianOutput: {
            double l2 = l2_sensitivity_from_probs(data, probs, config.dims);
            double sigma_t = gaussian_sigma_schedule(config.privacy, l2, t);
            Matrix noise;
            z = z_update_outp(z, w_next, lambda, grad, rho_t, prox_t, sigma_t, config.box,
                              stream, &noise);
            out.noise_abs_sum = noise.abs_sum();
            break;
          }
          case Mechanism::None: {
            Matrix xi(J, K, 0.0);
            z = trust ? z_update_trust(z, w_next, lambda, grad, xi, rho_t, prox_t, config.box)
                      : z_update_prox(z, w_next, lambda, grad, xi, rho_t, prox_t, config.box);
            break;
          }
        }

        lambda = dual_update(lambda, w_next, z, rho_t);
        if (!z.all_finite() || !lambda.all_finite()) out.bad_agent = p;
      } catch (const std::exception& e) {
        out.error = e.what();
        out.bad_agent = p;
      }
    }

    result.w = w_next;
    if (!result.w.all_finite())
      throw numeric_error("non-finite global iterate at iteration " + std::to_string(t));
    for (long p = 0; p < P; ++p) {
      const RoundOutput& out = round_out[static_cast<size_t>(p)];
      if (!out.error.empty()) throw numeric_error(out.error + " (iteration " +
                                                  std::to_string(t) + ", agent " +
                                                  std::to_string(p) + ")");
      if (out.bad_agent >= 0)
        throw numeric_error("non-finite state at iteration " + std::to_string(t) + ", agent " +
                            std::to_string(p));
    }

    if (t % config.log_every == 0 || t == config.iterations) {
      gather();
      MetricsRecord rec;
      rec.t = t;
      rec.rho_t = rho_t;
      rec.prox_t = prox_t;
      double noise_total = 0.0;
      for (const RoundOutput& out : round_out) noise_total += out.noise_abs_sum;
      rec.avg_noise_mag = noise_total / static_cast<double>(P * J * K);
      rec.consensus_violation = consensus_violation(result.w, z_list);
      rec.objective = global_objective(z_list, agents, config.dims);
      rec.test_error = (test != nullptr && test->rows() > 0)
                           ? testing_error(result.w, *test)
                           : std::numeric_limits<double>::quiet_NaN();
      result.metrics.push_back(rec);
    }
  }

  for (long p = 0; p < P; ++p) {
    result.z[static_cast<size_t>(p)] = std::move(states[static_cast<size_t>(p)].z);
    result.lambda[static_cast<size_t>(p)] = std::move(states[static_cast<size_t>(p)].lambda);
  }
  result.iterations_run = config.iterations;
  double inv_t = 1.0 / static_cast<double>(config.iterations);
  result.w_avg = w_sum;
  for (double& v : result.w_avg) v *= inv_t;
  for (long p = 0; p < P; ++p) {
    result.z_avg[static_cast<size_t>(p)] = z_sum[static_cast<size_t>(p)];
    for (double& v : result.z_avg[static_cast<size_t>(p)]) v *= inv_t;
  }
  return result;
}

}  // namespace dpfl
