#pragma once

#include <span>
#include <vector>

#include "dpfl/types.hpp"

namespace dpfl {

/// Class probabilities h_k(w; x) for a single sample, computed with
/// max-subtracted exponentials so large logits cannot overflow.
std::vector<double> softmax_probs(const Matrix& w, std::span<const double> x);

/// Row-wise class probabilities for a whole feature block: returns an
/// I_p x K matrix whose row i is softmax_probs(z, features row i).
Matrix softmax_matrix(const Matrix& z, const Matrix& features);

/// Local objective value
///   (1/I) sum_i sum_k -y_ik ln h_k(z; x_i)  +  (beta/P) ||z||^2,
/// evaluated in log-sum-exp form. Normalizes by the global sample count
/// dims.I, not by the agent's own row count.
double local_loss(const Matrix& z, const AgentData& data, const ProblemDims& dims);

/// Gradient of local_loss: entry (j,k) is
///   (1/I) sum_i x_ij (h_k(z; x_i) - y_ik)  +  (2 beta / P) z_jk.
Matrix local_gradient(const Matrix& z, const AgentData& data, const ProblemDims& dims);

/// Same gradient given precomputed probabilities (one softmax_matrix pass per
/// iteration is shared between the gradient and the sensitivity).
Matrix local_gradient_from_probs(const Matrix& z, const AgentData& data, const Matrix& probs,
                                 const ProblemDims& dims);

/// Predicted class: argmax_k of softmax_probs, ties broken toward the lowest
/// class index.
int predict(const Matrix& w, std::span<const double> x);

/// Fraction of test rows whose predicted class differs from the label class.
/// The test block must be nonempty.
double testing_error(const Matrix& w, const AgentData& test);

/// Global objective F(z) = sum_p local_loss(z_p); one parameter matrix per agent.
double global_objective(std::span<const Matrix> z_list, std::span<const AgentData> agents,
                        const ProblemDims& dims);

}  // namespace dpfl
