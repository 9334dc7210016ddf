#pragma once

// Reverse-mode automatic differentiation over dense matrices. Rows index
// the batch. Backward rules are written with the same differentiable ops,
// so gradients can themselves be differentiated (create_graph = true).

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace molstyle::nn {

using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

class Var;
struct Node;

using VjpFn = std::function<std::vector<Var>(const Var& out, const Var& grad_out)>;

struct Node {
  Mat value;
  Mat grad;  // accumulated by backward() on leaves
  bool requires_grad = false;
  bool leaf = true;
  std::vector<Var> inputs;
  VjpFn vjp;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : n_(std::move(node)) {}

  static Var constant(Mat value);
  // Trainable leaf.
  static Var param(Mat value);

  const Mat& value() const { return n_->value; }
  // Leaves only; throws for op outputs.
  Mat& mutable_value();
  const Mat& grad() const { return n_->grad; }
  void zero_grad();

  bool requires_grad() const { return n_ && n_->requires_grad; }
  bool defined() const { return static_cast<bool>(n_); }
  Index rows() const { return n_->value.rows(); }
  Index cols() const { return n_->value.cols(); }
  double item() const;

  Node* node() const { return n_.get(); }
  const std::shared_ptr<Node>& shared() const { return n_; }

 private:
  std::shared_ptr<Node> n_;
};

// Recording switch; ops built while disabled carry no graph.
class GradMode {
 public:
  static bool enabled();
  static void set(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
  ~NoGradGuard() { GradMode::set(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class EnableGradGuard {
 public:
  EnableGradGuard() : prev_(GradMode::enabled()) { GradMode::set(true); }
  ~EnableGradGuard() { GradMode::set(prev_); }
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool prev_;
};

// Builds an op node; the graph is kept only when recording is on and some
// input requires a gradient.
Var make_op(Mat value, std::vector<Var> inputs, VjpFn vjp);

// Accumulates d(output)/d(leaf) into every reachable leaf's grad().
// `output` must be 1x1 unless a seed of the same shape is given.
void backward(const Var& output, const Var& seed = {});

// Gradients of `output` with respect to `inputs`. With create_graph the
// returned Vars are differentiable; unreachable inputs get zeros.
std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph = false);

// ---------------------------------------------------------------- ops

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var add_row(const Var& a, const Var& row);   // row: 1 x cols, added to every row
Var mul_col(const Var& a, const Var& col);   // col: rows x 1, scales every column
Var sum(const Var& a);                       // 1 x 1
Var mean(const Var& a);                      // 1 x 1
Var sum_rows(const Var& a);                  // 1 x cols
Var sum_cols(const Var& a);                  // rows x 1
Var broadcast_rows(const Var& row, Index rows);
Var broadcast_cols(const Var& col, Index cols);

Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);
Var reciprocal(const Var& a);

Var logsumexp_rows(const Var& a);  // rows x 1
Var log_softmax_rows(const Var& a);
Var softmax_rows(const Var& a);
Var pick(const Var& a, std::span<const int> cols);  // rows x 1: a(i, cols[i])
Var scatter(const Var& col, std::span<const int> cols, Index width);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Index start, Index count);
Var slice_rows(const Var& a, Index start, Index count);
Var pad_cols(const Var& a, Index start, Index width);
Var pad_rows(const Var& a, Index start, Index height);

Var gather_rows(const Var& table, std::span<const int> rows);
Var scatter_add_rows(const Var& a, std::span<const int> rows, Index height);

// Identity forward; multiplies the incoming gradient by -lambda.
Var grad_reverse(const Var& a, double lambda = 1.0);
Var detach(const Var& a);

// Gated recurrent unit step (reset/update/new gate order, PyTorch layout).
// w_x: in x 3H, w_h: H x 3H, b_x, b_h: 1 x 3H. Its backward rule is hand
// written and not itself differentiable.
Var gru_cell(const Var& x, const Var& h, const Var& w_x, const Var& w_h, const Var& b_x, const Var& b_h);
// Same cell composed from primitive ops; used to check gru_cell.
Var gru_cell_reference(const Var& x, const Var& h, const Var& w_x, const Var& w_h, const Var& b_x, const Var& b_h);

}  // namespace molstyle::nn
