#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpfl {

/// Raised when an input violates a documented contract (shapes, ranges,
/// malformed labels, bad config values).
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised on malformed input files (IDX streams, tables, config syntax).
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a run produces a non-finite value; the message names the
/// iteration and agent where the state blew up.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. Used for model parameters (J x K),
/// feature blocks (I_p x J) and label blocks (I_p x K).
class Matrix {
 public:
  Matrix() = default;
  Matrix(long rows, long cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows * cols), fill) {
    if (rows < 0 || cols < 0) throw validation_error("Matrix: negative dimension");
  }

  static Matrix zeros(long rows, long cols) { return Matrix(rows, cols, 0.0); }

  long rows() const { return rows_; }
  long cols() const { return cols_; }
  long size() const { return rows_ * cols_; }

  double& operator()(long i, long j) { return data_[static_cast<size_t>(i * cols_ + j)]; }
  double operator()(long i, long j) const { return data_[static_cast<size_t>(i * cols_ + j)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::vector<double>::iterator begin() { return data_.begin(); }
  std::vector<double>::iterator end() { return data_.end(); }
  std::vector<double>::const_iterator begin() const { return data_.begin(); }
  std::vector<double>::const_iterator end() const { return data_.end(); }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double abs_sum() const {
    double s = 0.0;
    for (double v : data_) s += std::fabs(v);
    return s;
  }

  double inf_norm() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  long rows_ = 0;
  long cols_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b))
    throw validation_error(std::string(what) + ": shape mismatch (" +
                           std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                           std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
}

/// One agent's training block: features (I_p x J) and one-hot labels (I_p x K).
struct AgentData {
  Matrix features;
  Matrix labels;

  long rows() const { return features.rows(); }
  long num_features() const { return features.cols(); }
  long num_classes() const { return labels.cols(); }

  /// Checks the ingestion invariants: matching row counts and one-hot label
  /// rows (entries in {0,1}, each row summing to exactly 1).
  void validate() const;
};

/// Problem-level sizes shared by every agent plus the regularization weight.
/// `I` is the global sample count: losses and gradients are normalized by it,
/// not by the per-agent row count.
struct ProblemDims {
  long P = 1;
  long J = 0;
  long K = 0;
  long I = 0;
  double beta = 0.0;

  void validate() const {
    if (P < 1) throw validation_error("ProblemDims: P must be >= 1");
    if (J < 0 || K < 0 || I < 0) throw validation_error("ProblemDims: negative count");
    if (beta < 0.0) throw validation_error("ProblemDims: beta must be >= 0");
  }
};

inline void AgentData::validate() const {
  if (features.rows() != labels.rows())
    throw validation_error("AgentData: features and labels row counts differ");
  for (long i = 0; i < labels.rows(); ++i) {
    double sum = 0.0;
    for (long k = 0; k < labels.cols(); ++k) {
      double v = labels(i, k);
      if (v != 0.0 && v != 1.0)
        throw validation_error("AgentData: label row " + std::to_string(i) + " is not one-hot");
      sum += v;
    }
    if (sum != 1.0)
      throw validation_error("AgentData: label row " + std::to_string(i) + " does not sum to 1");
  }
}

/// Builds an AgentData block from features and class indices, expanding the
/// indices to one-hot rows. Rejects indices outside [0, num_classes).
AgentData make_agent_data(const Matrix& features, const std::vector<int>& class_indices,
                          long num_classes);

}  // namespace dpfl
