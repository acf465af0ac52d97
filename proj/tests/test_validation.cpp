#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dpfl/mechanisms.hpp"
#include "dpfl/model.hpp"
#include "dpfl/validation.hpp"
#include "support.hpp"

using namespace dpfl;
using testsupport::rel_err;

TEST_CASE("brute force sensitivity on a single sample") {
  Matrix features(1, 2);
  features(0, 0) = 0.4;
  features(0, 1) = -0.8;
  AgentData data = make_agent_data(features, {0}, 2);
  ProblemDims dims{1, 2, 2, 3, 0.5};
  RngStream rng(81, 0, 0);
  Matrix z = testsupport::random_matrix(rng, 2, 2);

  double brute = brute_force_sensitivity(z, data, dims);
  // Lone sample: the difference is exactly that sample's gradient term.
  std::vector<double> x = {0.4, -0.8};
  auto h = softmax_probs(z, x);
  double expected = 0.0;
  for (long j = 0; j < 2; ++j)
    for (long k = 0; k < 2; ++k)
      expected += std::fabs(x[static_cast<size_t>(j)] *
                            (h[static_cast<size_t>(k)] - data.labels(0, k)) / 3.0);
  CHECK(rel_err(brute, expected) <= 1e-13);
}

TEST_CASE("brute force sensitivity ignores which duplicate is removed") {
  Matrix features(4, 2);
  for (long i = 0; i < 4; ++i) {
    features(i, 0) = 0.7;
    features(i, 1) = -0.2;
  }
  AgentData data = make_agent_data(features, {1, 1, 1, 1}, 3);
  ProblemDims dims{1, 2, 3, 4, 0.1};
  RngStream rng(82, 0, 0);
  Matrix z = testsupport::random_matrix(rng, 2, 3);
  double brute = brute_force_sensitivity(z, data, dims);
  double closed = l1_sensitivity(z, data, dims);
  CHECK(rel_err(closed, brute) <= 1e-12);
}

TEST_CASE("brute force sensitivity guards its quadratic cost") {
  AgentData big{Matrix(1001, 1, 0.5), Matrix(1001, 1, 1.0)};
  ProblemDims dims{1, 1, 1, 1001, 0.0};
  CHECK_THROWS_AS(brute_force_sensitivity(Matrix(1, 1, 0.0), big, dims), validation_error);
}

TEST_CASE("closed-form sensitivity equals brute force over the corpus") {
  CHECK(sensitivity_check_max_rel_err(123, 150) <= 1e-12);
}

TEST_CASE("the corpus check flags a wrong sensitivity formula") {
  // Sum over samples instead of max: wrong by construction.
  double err = sensitivity_corpus_max_rel_err(
      123, 50, [](const Matrix& z, const AgentData& data, const ProblemDims& dims) {
        Matrix probs = softmax_matrix(z, data.features);
        double total = 0.0;
        for (long i = 0; i < data.rows(); ++i) {
          double x_norm = 0.0, r_norm = 0.0;
          for (long j = 0; j < data.features.cols(); ++j)
            x_norm += std::fabs(data.features(i, j));
          for (long k = 0; k < data.labels.cols(); ++k)
            r_norm += std::fabs(probs(i, k) - data.labels(i, k));
          total += x_norm * r_norm / static_cast<double>(dims.I);
        }
        return total;
      });
  CHECK(err > 1e-10);
}

TEST_CASE("reference solver on pure ridge returns zero") {
  std::vector<AgentData> agents;
  agents.push_back(AgentData{Matrix(0, 2), Matrix(0, 3)});
  ProblemDims dims{1, 2, 3, 1, 0.5};
  ReferenceSolution sol = reference_solver(agents, dims, FeasibleBox{10.0, true}, 1e-10, 1000);
  CHECK(sol.converged);
  CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-12));
  for (double v : sol.w) CHECK(std::fabs(v) <= 1e-10);
}

TEST_CASE("reference solver matches a 1-D grid search on a two-class toy") {
  // One feature, two classes; by symmetry of the regularizer the optimum has
  // w = (d/2, -d/2), so the objective reduces to a function of d alone.
  Matrix features(8, 1);
  std::vector<int> labels(8);
  for (long i = 0; i < 8; ++i) {
    features(i, 0) = 1.0;
    labels[static_cast<size_t>(i)] = i < 6 ? 0 : 1;  // separable-ish majority
  }
  AgentData data = make_agent_data(features, labels, 2);
  ProblemDims dims{1, 1, 2, 8, 0.05};
  std::vector<AgentData> agents = {data};

  ReferenceSolution sol =
      reference_solver(agents, dims, FeasibleBox{50.0, true}, 1e-9, 200000);
  CHECK(sol.converged);

  auto objective_of_gap = [&](double d) {
    Matrix w(1, 2);
    w(0, 0) = d / 2.0;
    w(0, 1) = -d / 2.0;
    return local_loss(w, data, dims);
  };
  double best_d = 0.0, best_f = objective_of_gap(0.0);
  for (long s = -40000; s <= 40000; ++s) {
    double d = s * 2.5e-4;
    double f = objective_of_gap(d);
    if (f < best_f) {
      best_f = f;
      best_d = d;
    }
  }
  CHECK(std::fabs(sol.objective - best_f) <= 1e-6);
  CHECK(std::fabs((sol.w(0, 0) - sol.w(0, 1)) - best_d) <= 1e-3);
}

TEST_CASE("reference solver beats random feasible probes") {
  SyntheticInstance inst = make_synthetic_instance(83, 2, 3, 3, 30, 10, 1e-3);
  FeasibleBox box{5.0, true};
  ReferenceSolution sol = reference_solver(inst.agents, inst.dims, box, 1e-9, 100000);
  CHECK(sol.converged);
  RngStream rng(84, 0, 0);
  for (int probe = 0; probe < 1000; ++probe) {
    Matrix w(3, 3);
    for (double& v : w) v = (2.0 * rng.next_unit() - 1.0) * 5.0;
    double f = 0.0;
    for (const AgentData& a : inst.agents) f += local_loss(w, a, inst.dims);
    CHECK(sol.objective <= f + 1e-12);
  }
}

TEST_CASE("finite differences: quadratic exact, zero function zero") {
  Matrix z(2, 2);
  z(0, 0) = 1.0;
  z(0, 1) = -2.0;
  z(1, 0) = 0.5;
  z(1, 1) = 3.0;
  auto quadratic = [](const Matrix& m) {
    double s = 0.0;
    for (double v : m) s += v * v;
    return s;
  };
  Matrix grad = finite_diff_gradient(quadratic, z, 1e-5);
  for (long i = 0; i < z.size(); ++i)
    CHECK(grad.data()[i] == doctest::Approx(2.0 * z.data()[i]).epsilon(1e-8));

  Matrix zero = finite_diff_gradient([](const Matrix&) { return 0.0; }, z, 1e-5);
  for (double v : zero) CHECK(v == 0.0);
}

TEST_CASE("finite differences validate the analytic model gradient") {
  RngStream rng(85, 0, 0);
  AgentData data = testsupport::random_agent_data(rng, 6, 3, 3);
  ProblemDims dims{2, 3, 3, 9, 0.2};
  Matrix z = testsupport::random_matrix(rng, 3, 3);
  Matrix fd = finite_diff_gradient(
      [&](const Matrix& m) { return local_loss(m, data, dims); }, z, 1e-6);
  Matrix analytic = local_gradient(z, data, dims);
  double err2 = 0.0, norm2 = 0.0;
  for (long i = 0; i < z.size(); ++i) {
    err2 += (fd.data()[i] - analytic.data()[i]) * (fd.data()[i] - analytic.data()[i]);
    norm2 += analytic.data()[i] * analytic.data()[i];
  }
  CHECK(std::sqrt(err2) <= 1e-6 * std::max(1.0, std::sqrt(norm2)));
}

TEST_CASE("audit instance is a valid scalar neighbor pair") {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    DpAuditInstance inst = make_audit_instance(seed, false);
    CHECK(inst.dims.J == 1);
    CHECK(inst.dims.K == 1);
    CHECK(inst.d.rows() == inst.d_prime.rows() + 1);
    // The removed sample is never the strict maximum, so both datasets
    // calibrate to the same sensitivity.
    double s = l1_sensitivity(inst.z_t, inst.d, inst.dims);
    double s_prime = l1_sensitivity(inst.z_t, inst.d_prime, inst.dims);
    CHECK(s == doctest::Approx(s_prime).epsilon(1e-15));
    CHECK(s == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
  }
}

TEST_CASE("audit: identical datasets measure epsilon near zero") {
  DpAuditInstance inst = make_audit_instance(11, false);
  inst.d_prime = inst.d;
  DpAuditConfig config;
  config.eps_target = 1.0;
  config.seed = 21;
  DpAuditReport report = empirical_dp_audit(inst, config);
  CHECK_FALSE(report.inconclusive);
  CHECK_FALSE(report.violation);
  CHECK(report.eps_measured <= 0.2);
}

TEST_CASE("audit: calibrated mechanism passes, half-scale noise is flagged") {
  for (bool trust : {false, true}) {
    DpAuditInstance inst = make_audit_instance(31, trust);
    DpAuditConfig config;
    config.eps_target = 1.0;
    config.seed = 41;

    DpAuditReport calibrated = empirical_dp_audit(inst, config);
    CHECK_FALSE(calibrated.inconclusive);
    CHECK_FALSE(calibrated.violation);
    CHECK(calibrated.eps_measured <= 1.1);

    config.noise_scale_factor = 0.5;
    DpAuditReport under = empirical_dp_audit(inst, config);
    CHECK_FALSE(under.inconclusive);
    CHECK(under.violation);
    CHECK(under.eps_measured > 1.1);
  }
}

TEST_CASE("audit: degenerate support is inconclusive") {
  DpAuditInstance inst = make_audit_instance(51, false);
  for (double& v : inst.d.features) v = 0.0;       // sensitivity collapses to zero
  for (double& v : inst.d_prime.features) v = 0.0;
  DpAuditConfig config;
  config.seed = 61;
  DpAuditReport report = empirical_dp_audit(inst, config);
  CHECK(report.inconclusive);
}

TEST_CASE("audit rejects undersized sample counts") {
  DpAuditInstance inst = make_audit_instance(71, false);
  DpAuditConfig config;
  config.samples = 1000;
  CHECK_THROWS_AS(empirical_dp_audit(inst, config), validation_error);
}

TEST_CASE("audit report formatting and CSV") {
  DpAuditReport report;
  report.eps_target = 1.0;
  report.eps_measured = 0.7;
  report.slack = 0.1;
  report.bins = 60;
  report.samples = 1000000;
  std::string text = format_audit_report(report);
  CHECK(text.find("eps_measured=0.7") != std::string::npos);
  CHECK(text.find("verdict=ok") != std::string::npos);
  report.violation = true;
  CHECK(format_audit_report(report).find("VIOLATION") != std::string::npos);
}

TEST_CASE("synthetic instances have learnable structure") {
  SyntheticInstance inst = make_synthetic_instance(91, 3, 4, 3, 60, 30, 1e-3);
  CHECK(inst.agents.size() == 3);
  long total = 0;
  for (const auto& a : inst.agents) total += a.rows();
  CHECK(total == 60);
  CHECK(inst.test.rows() == 30);
  // A trained reference beats the zero parameter matrix on its own objective.
  ReferenceSolution sol =
      reference_solver(inst.agents, inst.dims, FeasibleBox{50.0, true}, 1e-8, 50000);
  double at_zero = 0.0;
  for (const auto& a : inst.agents) at_zero += local_loss(Matrix(4, 3, 0.0), a, inst.dims);
  CHECK(sol.objective < at_zero);
}
