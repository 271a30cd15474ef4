#pragma once

// Minimal reverse-mode differentiation over dense matrices.
//
// A Tape records every operation in creation order, so node ids are already a
// topological order and backward() is a single reverse sweep. Parameter leaves
// copy their ParamTensor value on entry and add the accumulated gradient back
// into ParamTensor::grad when backward() finishes.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "craft/numeric.hpp"

namespace craft {

struct ParamTensor {
  std::string name;
  Mat value;
  Mat grad;

  ParamTensor() = default;
  ParamTensor(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

namespace ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Mat value);
  Var param(ParamTensor& p);

  // Records an op. `back` is dropped when no parent needs a gradient.
  Var push(Mat value, std::initializer_list<Var> parents, Backward back);
  Var push(Mat value, std::span<const Var> parents, Backward back);

  // Seeds d(loss)/d(loss) = 1; loss must be 1x1.
  void backward(const Var& loss);

  const Mat& value(std::size_t id) const { return nodes_[id].value; }
  // Gradient of the node, or an empty matrix if nothing flowed into it.
  const Mat& grad(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  void accumulate(std::size_t id, const Mat& g);
  // Adds g into the block of the gradient starting at (row, col).
  void accumulate_block(std::size_t id, Eigen::Index row, Eigen::Index col, const Mat& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward back;
    ParamTensor* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// Trainable leaf when `trainable`, otherwise a constant copy of the value.
Var bind(Tape& t, ParamTensor& p, bool trainable);

// ---- ops ----------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// Row r multiplied by w[r].
Var scale_rows(const Var& a, const Vec& w);
// a (n x q) plus a 1 x q bias broadcast over rows.
Var add_bias(const Var& a, const Var& bias);
Var tanh(const Var& a);
Var transpose(const Var& a);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, std::span<const Eigen::Index> rows);
Var vstack(std::span<const Var> parts);
Var hstack(const Var& a, const Var& b);
// Row-wise softmax over all columns.
Var softmax_rows(const Var& a);
// M^{-1} B for symmetric positive definite M (Cholesky). Throws
// SingularityError when M is not positive definite.
Var solve_spd(const Var& M, const Var& B);
// a + lambda I for square a.
Var add_diagonal(const Var& a, double lambda);
// Differentiable ridge_solve in both arguments.
Var ridge(const Var& A, const Var& B, double lambda);
Var sum_squares(const Var& a);
// scale * sum over mask of (pred - target)^2; masked-out entries carry zero
// gradient.
Var masked_sq_error(const Var& pred, const Mat& target, const BoolMat& mask, double scale);
// Sum of 1x1 vars.
Var add_scalars(std::span<const Var> parts);

// Affine helpers built from the ops above.
Var affine(const Var& x, const Var& W, const Var& b);
Var affine_tanh(const Var& x, const Var& W, const Var& b);

}  // namespace ad

/// Largest relative error between analytic gradients and central finite
/// differences (f(x+eps) - f(x-eps)) / 2 eps over every coordinate of
/// `params`. Relative error is |a - n| / max(|a| + |n|, 1e-6).
/// The ParamTensor grads are overwritten.
double grad_check(const std::function<ad::Var(ad::Tape&)>& f, std::span<ParamTensor* const> params,
                  double epsilon);

}  // namespace craft
