#include "dpfl/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace dpfl {

namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapConst = Eigen::Map<const EigenRowMajor>;
using Map = Eigen::Map<EigenRowMajor>;

MapConst as_eigen(const Matrix& m) { return MapConst(m.data(), m.rows(), m.cols()); }
Map as_eigen(Matrix& m) { return Map(m.data(), m.rows(), m.cols()); }

// ln arguments are clamped away from zero so a fully saturated probability
// cannot produce -inf.
double safe_log(double x) { return std::log(std::max(x, 1e-300)); }

void check_sample_shape(const Matrix& w, std::span<const double> x) {
  if (static_cast<long>(x.size()) != w.rows())
    throw validation_error("softmax_probs: feature length " + std::to_string(x.size()) +
                           " does not match parameter rows " + std::to_string(w.rows()));
}

void check_agent_shape(const Matrix& z, const AgentData& data, const char* what) {
  if (data.features.rows() != data.labels.rows())
    throw validation_error(std::string(what) + ": features and labels row counts differ");
  if (data.features.rows() > 0 && data.features.cols() != z.rows())
    throw validation_error(std::string(what) + ": feature width " +
                           std::to_string(data.features.cols()) + " does not match z rows " +
                           std::to_string(z.rows()));
  if (data.labels.rows() > 0 && data.labels.cols() != z.cols())
    throw validation_error(std::string(what) + ": label width " +
                           std::to_string(data.labels.cols()) + " does not match z cols " +
                           std::to_string(z.cols()));
}

void check_one_hot(const AgentData& data, const char* what) {
  for (long i = 0; i < data.labels.rows(); ++i) {
    double sum = 0.0;
    for (long k = 0; k < data.labels.cols(); ++k) {
      double v = data.labels(i, k);
      if (v != 0.0 && v != 1.0)
        throw validation_error(std::string(what) + ": label row " + std::to_string(i) +
                               " is not one-hot");
      sum += v;
    }
    if (sum != 1.0)
      throw validation_error(std::string(what) + ": label row " + std::to_string(i) +
                             " does not sum to 1");
  }
}

}  // namespace

AgentData make_agent_data(const Matrix& features, const std::vector<int>& class_indices,
                          long num_classes) {
  if (features.rows() != static_cast<long>(class_indices.size()))
    throw validation_error("make_agent_data: " + std::to_string(features.rows()) +
                           " feature rows but " + std::to_string(class_indices.size()) +
                           " labels");
  if (num_classes < 1) throw validation_error("make_agent_data: num_classes must be >= 1");
  Matrix labels(features.rows(), num_classes, 0.0);
  for (long i = 0; i < features.rows(); ++i) {
    int c = class_indices[static_cast<size_t>(i)];
    if (c < 0 || c >= num_classes)
      throw validation_error("make_agent_data: label " + std::to_string(c) + " at row " +
                             std::to_string(i) + " outside [0, " + std::to_string(num_classes) +
                             ")");
    labels(i, c) = 1.0;
  }
  return AgentData{features, std::move(labels)};
}

std::vector<double> softmax_probs(const Matrix& w, std::span<const double> x) {
  check_sample_shape(w, x);
  const long K = w.cols();
  std::vector<double> logits(static_cast<size_t>(K), 0.0);
  for (long j = 0; j < w.rows(); ++j) {
    double xj = x[static_cast<size_t>(j)];
    if (xj == 0.0) continue;
    for (long k = 0; k < K; ++k) logits[static_cast<size_t>(k)] += xj * w(j, k);
  }
  double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (long k = 0; k < K; ++k) {
    logits[static_cast<size_t>(k)] = std::exp(logits[static_cast<size_t>(k)] - m);
    denom += logits[static_cast<size_t>(k)];
  }
  for (long k = 0; k < K; ++k) logits[static_cast<size_t>(k)] /= denom;
  return logits;
}

Matrix softmax_matrix(const Matrix& z, const Matrix& features) {
  if (features.rows() > 0 && features.cols() != z.rows())
    throw validation_error("softmax_matrix: feature width does not match z rows");
  Matrix probs(features.rows(), z.cols());
  if (features.rows() == 0) return probs;
  as_eigen(probs).noalias() = as_eigen(features) * as_eigen(z);
  for (long i = 0; i < probs.rows(); ++i) {
    double m = probs(i, 0);
    for (long k = 1; k < probs.cols(); ++k) m = std::max(m, probs(i, k));
    double denom = 0.0;
    for (long k = 0; k < probs.cols(); ++k) {
      probs(i, k) = std::exp(probs(i, k) - m);
      denom += probs(i, k);
    }
    for (long k = 0; k < probs.cols(); ++k) probs(i, k) /= denom;
  }
  return probs;
}

double local_loss(const Matrix& z, const AgentData& data, const ProblemDims& dims) {
  check_agent_shape(z, data, "local_loss");
  check_one_hot(data, "local_loss");
  if (dims.I < data.rows())
    throw validation_error("local_loss: global I smaller than agent row count");

  double reg = 0.0;
  for (double v : z) reg += v * v;
  reg *= dims.beta / static_cast<double>(dims.P);
  if (data.rows() == 0) return reg;

  // Cross entropy in log-sum-exp form: sum_k y_k (lse - logit_k).
  Matrix logits(data.rows(), z.cols());
  as_eigen(logits).noalias() = as_eigen(data.features) * as_eigen(z);
  double total = 0.0;
  for (long i = 0; i < logits.rows(); ++i) {
    double m = logits(i, 0);
    for (long k = 1; k < logits.cols(); ++k) m = std::max(m, logits(i, k));
    double denom = 0.0;
    for (long k = 0; k < logits.cols(); ++k) denom += std::exp(logits(i, k) - m);
    double lse = m + safe_log(denom);
    for (long k = 0; k < logits.cols(); ++k)
      if (data.labels(i, k) != 0.0) total += data.labels(i, k) * (lse - logits(i, k));
  }
  return total / static_cast<double>(dims.I) + reg;
}

Matrix local_gradient_from_probs(const Matrix& z, const AgentData& data, const Matrix& probs,
                                 const ProblemDims& dims) {
  check_agent_shape(z, data, "local_gradient");
  Matrix grad(z.rows(), z.cols());
  double reg_coef = 2.0 * dims.beta / static_cast<double>(dims.P);
  if (data.rows() == 0) {
    for (long j = 0; j < z.rows(); ++j)
      for (long k = 0; k < z.cols(); ++k) grad(j, k) = reg_coef * z(j, k);
    return grad;
  }
  if (dims.I < data.rows())
    throw validation_error("local_gradient: global I smaller than agent row count");
  Matrix residual(probs.rows(), probs.cols());
  for (long i = 0; i < probs.rows(); ++i)
    for (long k = 0; k < probs.cols(); ++k) residual(i, k) = probs(i, k) - data.labels(i, k);
  as_eigen(grad).noalias() =
      as_eigen(data.features).transpose() * as_eigen(residual) / static_cast<double>(dims.I);
  as_eigen(grad) += reg_coef * as_eigen(z);
  return grad;
}

Matrix local_gradient(const Matrix& z, const AgentData& data, const ProblemDims& dims) {
  check_agent_shape(z, data, "local_gradient");
  if (data.rows() == 0) return local_gradient_from_probs(z, data, Matrix(), dims);
  return local_gradient_from_probs(z, data, softmax_matrix(z, data.features), dims);
}

int predict(const Matrix& w, std::span<const double> x) {
  std::vector<double> probs = softmax_probs(w, x);
  int best = 0;
  for (int k = 1; k < static_cast<int>(probs.size()); ++k)
    if (probs[static_cast<size_t>(k)] > probs[static_cast<size_t>(best)]) best = k;
  return best;
}

double testing_error(const Matrix& w, const AgentData& test) {
  if (test.rows() == 0) throw validation_error("testing_error: empty test set");
  if (test.features.cols() != w.rows() || test.labels.cols() != w.cols())
    throw validation_error("testing_error: test block shape does not match parameters");

  Matrix logits(test.rows(), w.cols());
  as_eigen(logits).noalias() = as_eigen(test.features) * as_eigen(w);
  long mistakes = 0;
#pragma omp parallel for reduction(+ : mistakes) schedule(static)
  for (long i = 0; i < logits.rows(); ++i) {
    long pred = 0;
    for (long k = 1; k < logits.cols(); ++k)
      if (logits(i, k) > logits(i, pred)) pred = k;
    long truth = 0;
    for (long k = 1; k < test.labels.cols(); ++k)
      if (test.labels(i, k) > test.labels(i, truth)) truth = k;
    if (pred != truth) ++mistakes;
  }
  return static_cast<double>(mistakes) / static_cast<double>(test.rows());
}

double global_objective(std::span<const Matrix> z_list, std::span<const AgentData> agents,
                        const ProblemDims& dims) {
  if (z_list.size() != agents.size())
    throw validation_error("global_objective: " + std::to_string(z_list.size()) +
                           " parameter matrices for " + std::to_string(agents.size()) +
                           " agents");
  double total = 0.0;
  for (size_t p = 0; p < agents.size(); ++p) total += local_loss(z_list[p], agents[p], dims);
  return total;
}

}  // namespace dpfl
