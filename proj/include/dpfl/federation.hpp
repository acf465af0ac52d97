#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dpfl/admm.hpp"
#include "dpfl/mechanisms.hpp"
#include "dpfl/types.hpp"

namespace dpfl {

enum class Algorithm { ObjP, ObjT, OutP, NonPrivateProx, NonPrivateTrust };

bool algorithm_uses_trust_region(Algorithm a);
Mechanism default_mechanism(Algorithm a);
const char* algorithm_name(Algorithm a);
const char* mechanism_name(Mechanism m);

/// Per-agent state carried across rounds; z stays inside the feasible box for
/// the whole run (every update ends with a projection).
struct AgentState {
  int id = 0;
  AgentData data;
  Matrix z;
  Matrix lambda;
};

/// One logged row: iteration index, testing error at the fresh global iterate,
/// this round's average noise magnitude, consensus violation, objective value,
/// and the schedule values used in the round. prox_t is eta^t for proximal
/// algorithms and delta^t for trust-region ones.
struct MetricsRecord {
  long t = 0;
  double test_error = 0.0;
  double avg_noise_mag = 0.0;
  double consensus_violation = 0.0;
  double objective = 0.0;
  double rho_t = 0.0;
  double prox_t = 0.0;
};

struct RunConfig {
  Algorithm algorithm = Algorithm::NonPrivateProx;
  long iterations = 0;  // T
  PrivacyConfig privacy;
  Schedules schedules;
  FeasibleBox box;
  uint64_t seed = 0;
  long log_every = 100;
  ProblemDims dims;
  int threads = 0;  // 0: one thread per agent up to the hardware limit

  void validate() const;
};

/// Final state plus the running averages (1/T) sum_t z^t and
/// (1/T) sum_t w^{t+1} used for rate diagnostics.
struct RunResult {
  std::vector<MetricsRecord> metrics;
  Matrix w;
  std::vector<Matrix> z;
  std::vector<Matrix> lambda;
  Matrix w_avg;
  std::vector<Matrix> z_avg;
  long iterations_run = 0;
};

/// Shuffles rows with the given stream and splits them into P blocks of size
/// floor(I/P), the first (I mod P) agents receiving one extra row. The union
/// of the outputs is exactly the input rows.
std::vector<AgentData> partition_homogeneous(const Matrix& features, const Matrix& labels,
                                             long num_agents, RngStream& rng);

/// Consensus violation sum_{p,j,k} |w_jk - z_pjk|.
double consensus_violation(const Matrix& w, std::span<const Matrix> z_list);

/// Runs T synchronous rounds of the configured algorithm:
/// w-update, per-agent perturbed z-update (parallel), dual update. Metrics are
/// logged every log_every rounds; the whole trajectory is a deterministic
/// function of (config, agents, test) regardless of thread count. Non-finite
/// state aborts with a numeric_error naming the iteration and agent.
RunResult run_experiment(const RunConfig& config, const std::vector<AgentData>& agents,
                         const AgentData* test);

}  // namespace dpfl
