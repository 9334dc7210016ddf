#include "molstyle/nn/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace molstyle::nn {
namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

}  // namespace

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set(bool on) { g_grad_enabled = on; }

Var Var::constant(Mat value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::param(Mat value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->grad = Mat::Zero(n->value.rows(), n->value.cols());
  return Var(std::move(n));
}

Mat& Var::mutable_value() {
  if (!n_->leaf) throw std::logic_error("cannot mutate the value of an op output");
  return n_->value;
}

void Var::zero_grad() {
  if (n_->grad.size() == 0) n_->grad = Mat::Zero(rows(), cols());
  n_->grad.setZero();
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) throw std::logic_error("item() on a non-scalar");
  return n_->value(0, 0);
}

Var make_op(Mat value, std::vector<Var> inputs, VjpFn vjp) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->leaf = false;
  bool needs = false;
  if (GradMode::enabled()) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->vjp = std::move(vjp);
  }
  return Var(std::move(n));
}

namespace {

// Nodes reachable from `root` through grad-requiring edges, inputs first.
std::vector<std::shared_ptr<Node>> topo_order(const Var& root) {
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_map<Node*, bool> done;
  struct Frame {
    std::shared_ptr<Node> node;
    std::size_t next;
  };
  std::vector<Frame> stack{{root.shared(), 0}};
  done[root.node()] = false;
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->inputs.size()) {
      const Var& in = f.node->inputs[f.next++];
      if (!in.requires_grad() || done.count(in.node())) continue;
      done[in.node()] = false;
      stack.push_back({in.shared(), 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  return order;
}

// Runs the reverse sweep; `visit_leaf` receives each leaf and its gradient.
template <typename LeafFn>
void reverse_sweep(const Var& output, const Var& seed, LeafFn&& visit_leaf,
                   std::unordered_map<Node*, Var>* keep = nullptr) {
  const auto order = topo_order(output);
  std::unordered_map<Node*, Var> grads;
  grads[output.node()] = seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto& node = *it;
    auto g = grads.find(node.get());
    if (g == grads.end()) continue;
    const Var grad_out = g->second;
    if (keep && keep->count(node.get())) (*keep)[node.get()] = grad_out;
    if (node->leaf) {
      visit_leaf(*node, grad_out);
      continue;
    }
    const auto parts = node->vjp(Var(node), grad_out);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const Var& in = node->inputs[i];
      if (!in.requires_grad() || i >= parts.size() || !parts[i].defined()) continue;
      auto slot = grads.find(in.node());
      if (slot == grads.end()) {
        grads.emplace(in.node(), parts[i]);
      } else {
        slot->second = add(slot->second, parts[i]);
      }
    }
    grads.erase(node.get());
  }
}

Var default_seed(const Var& output, const Var& seed) {
  if (seed.defined()) {
    require_same_shape(output, seed, "backward seed");
    return seed;
  }
  if (output.rows() != 1 || output.cols() != 1) throw std::logic_error("backward: non-scalar output needs a seed");
  return Var::constant(Mat::Ones(1, 1));
}

}  // namespace

void backward(const Var& output, const Var& seed) {
  if (!output.requires_grad()) return;
  NoGradGuard guard;
  reverse_sweep(output, default_seed(output, seed), [](Node& leaf, const Var& g) {
    if (leaf.grad.size() == 0) leaf.grad = Mat::Zero(leaf.value.rows(), leaf.value.cols());
    leaf.grad += g.value();
  });
}

std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph) {
  std::unordered_map<Node*, Var> keep;
  for (const auto& in : inputs) keep[in.node()] = Var();
  if (output.requires_grad()) {
    const Var seed = default_seed(output, {});
    if (create_graph) {
      EnableGradGuard guard;
      reverse_sweep(output, seed, [](Node&, const Var&) {}, &keep);
    } else {
      NoGradGuard guard;
      reverse_sweep(output, seed, [](Node&, const Var&) {}, &keep);
    }
  }
  std::vector<Var> out;
  for (const auto& in : inputs) {
    const Var& g = keep[in.node()];
    out.push_back(g.defined() ? g : Var::constant(Mat::Zero(in.rows(), in.cols())));
  }
  return out;
}

// ---------------------------------------------------------------- ops

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b}, [](const Var&, const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b}, [](const Var&, const Var& g) { return std::vector<Var>{g, neg(g)}; });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [a, b](const Var&, const Var& g) {
    return std::vector<Var>{a.requires_grad() ? mul(g, b) : Var(), b.requires_grad() ? mul(g, a) : Var()};
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](const Var&, const Var& g) { return std::vector<Var>{scale(g, s)}; });
}

Var add_scalar(const Var& a, double s) {
  return make_op(a.value().array() + s, {a}, [](const Var&, const Var& g) { return std::vector<Var>{g}; });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  return make_op(a.value() * b.value(), {a, b}, [a, b](const Var&, const Var& g) {
    return std::vector<Var>{a.requires_grad() ? matmul(g, transpose(b)) : Var(),
                            b.requires_grad() ? matmul(transpose(a), g) : Var()};
  });
}

Var transpose(const Var& a) {
  return make_op(a.value().transpose(), {a}, [](const Var&, const Var& g) { return std::vector<Var>{transpose(g)}; });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: row shape mismatch");
  Mat out = a.value().rowwise() + row.value().row(0);
  return make_op(std::move(out), {a, row}, [row](const Var&, const Var& g) {
    return std::vector<Var>{g, row.requires_grad() ? sum_rows(g) : Var()};
  });
}

Var mul_col(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw std::invalid_argument("mul_col: column shape mismatch");
  return mul(a, broadcast_cols(col, a.cols()));
}

Var sum(const Var& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  const Index r = a.rows(), c = a.cols();
  return make_op(std::move(out), {a}, [r, c](const Var&, const Var& g) {
    return std::vector<Var>{broadcast_cols(broadcast_rows(g, r), c)};
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_rows(const Var& a) {
  const Index r = a.rows();
  return make_op(a.value().colwise().sum(), {a}, [r](const Var&, const Var& g) {
    return std::vector<Var>{broadcast_rows(g, r)};
  });
}

Var sum_cols(const Var& a) {
  const Index c = a.cols();
  return make_op(a.value().rowwise().sum(), {a}, [c](const Var&, const Var& g) {
    return std::vector<Var>{broadcast_cols(g, c)};
  });
}

Var broadcast_rows(const Var& row, Index rows) {
  if (row.rows() != 1) throw std::invalid_argument("broadcast_rows: expects a row vector");
  return make_op(row.value().replicate(rows, 1), {row}, [](const Var&, const Var& g) {
    return std::vector<Var>{sum_rows(g)};
  });
}

Var broadcast_cols(const Var& col, Index cols) {
  if (col.cols() != 1) throw std::invalid_argument("broadcast_cols: expects a column vector");
  return make_op(col.value().replicate(1, cols), {col}, [](const Var&, const Var& g) {
    return std::vector<Var>{sum_cols(g)};
  });
}

Var exp(const Var& a) {
  return make_op(a.value().array().exp().matrix(), {a}, [](const Var& out, const Var& g) {
    return std::vector<Var>{mul(g, out)};
  });
}

Var log(const Var& a) {
  return make_op(a.value().array().log().matrix(), {a}, [a](const Var&, const Var& g) {
    return std::vector<Var>{mul(g, reciprocal(a))};
  });
}

Var tanh(const Var& a) {
  return make_op(a.value().array().tanh().matrix(), {a}, [](const Var& out, const Var& g) {
    return std::vector<Var>{mul(g, add_scalar(neg(square(out)), 1.0))};
  });
}

Var sigmoid(const Var& a) {
  Mat out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return make_op(std::move(out), {a}, [](const Var& out, const Var& g) {
    return std::vector<Var>{mul(g, mul(out, add_scalar(neg(out), 1.0)))};
  });
}

Var softplus(const Var& a) {
  // log(1 + e^x) = max(x, 0) + log(1 + e^-|x|)
  Mat out = a.value().unaryExpr([](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  return make_op(std::move(out), {a}, [a](const Var&, const Var& g) {
    return std::vector<Var>{mul(g, sigmoid(a))};
  });
}

Var square(const Var& a) {
  return make_op(a.value().array().square().matrix(), {a}, [a](const Var&, const Var& g) {
    return std::vector<Var>{scale(mul(g, a), 2.0)};
  });
}

Var sqrt(const Var& a) {
  return make_op(a.value().array().sqrt().matrix(), {a}, [](const Var& out, const Var& g) {
    return std::vector<Var>{scale(mul(g, reciprocal(out)), 0.5)};
  });
}

Var reciprocal(const Var& a) {
  return make_op(a.value().array().inverse().matrix(), {a}, [](const Var& out, const Var& g) {
    return std::vector<Var>{neg(mul(g, square(out)))};
  });
}

Var logsumexp_rows(const Var& a) {
  const Eigen::VectorXd m = a.value().rowwise().maxCoeff();
  Mat out = ((a.value().colwise() - m).array().exp().rowwise().sum().log()).matrix() + m;
  const Index c = a.cols();
  return make_op(std::move(out), {a}, [a, c](const Var& out, const Var& g) {
    const Var p = exp(sub(a, broadcast_cols(out, c)));
    return std::vector<Var>{mul(broadcast_cols(g, c), p)};
  });
}

Var log_softmax_rows(const Var& a) { return sub(a, broadcast_cols(logsumexp_rows(a), a.cols())); }

Var softmax_rows(const Var& a) { return exp(log_softmax_rows(a)); }

Var pick(const Var& a, std::span<const int> cols) {
  if (static_cast<Index>(cols.size()) != a.rows()) throw std::invalid_argument("pick: one column per row");
  Mat out(a.rows(), 1);
  for (Index i = 0; i < a.rows(); ++i) out(i, 0) = a.value()(i, cols[i]);
  std::vector<int> idx(cols.begin(), cols.end());
  const Index width = a.cols();
  return make_op(std::move(out), {a}, [idx, width](const Var&, const Var& g) {
    return std::vector<Var>{scatter(g, idx, width)};
  });
}

Var scatter(const Var& col, std::span<const int> cols, Index width) {
  if (col.cols() != 1 || static_cast<Index>(cols.size()) != col.rows()) throw std::invalid_argument("scatter: shape");
  Mat out = Mat::Zero(col.rows(), width);
  for (Index i = 0; i < col.rows(); ++i) out(i, cols[i]) = col.value()(i, 0);
  std::vector<int> idx(cols.begin(), cols.end());
  return make_op(std::move(out), {col}, [idx](const Var&, const Var& g) { return std::vector<Var>{pick(g, idx)}; });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) throw std::invalid_argument("concat_cols: row mismatch");
    total += p.cols();
  }
  Mat out(parts[0].rows(), total);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    offsets.push_back(at);
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  std::vector<Index> widths;
  for (const auto& p : parts) widths.push_back(p.cols());
  return make_op(std::move(out), inputs, [offsets, widths, inputs](const Var&, const Var& g) {
    std::vector<Var> res;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      res.push_back(inputs[i].requires_grad() ? slice_cols(g, offsets[i], widths[i]) : Var());
    }
    return res;
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Index total = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts[0].cols()) throw std::invalid_argument("concat_rows: column mismatch");
    total += p.rows();
  }
  Mat out(total, parts[0].cols());
  std::vector<Index> offsets, heights;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    offsets.push_back(at);
    heights.push_back(p.rows());
    at += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_op(std::move(out), inputs, [offsets, heights, inputs](const Var&, const Var& g) {
    std::vector<Var> res;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      res.push_back(inputs[i].requires_grad() ? slice_rows(g, offsets[i], heights[i]) : Var());
    }
    return res;
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols");
  const Index width = a.cols();
  return make_op(a.value().middleCols(start, count), {a}, [start, width](const Var&, const Var& g) {
    return std::vector<Var>{pad_cols(g, start, width)};
  });
}

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows");
  const Index height = a.rows();
  return make_op(a.value().middleRows(start, count), {a}, [start, height](const Var&, const Var& g) {
    return std::vector<Var>{pad_rows(g, start, height)};
  });
}

Var pad_cols(const Var& a, Index start, Index width) {
  Mat out = Mat::Zero(a.rows(), width);
  out.middleCols(start, a.cols()) = a.value();
  const Index count = a.cols();
  return make_op(std::move(out), {a}, [start, count](const Var&, const Var& g) {
    return std::vector<Var>{slice_cols(g, start, count)};
  });
}

Var pad_rows(const Var& a, Index start, Index height) {
  Mat out = Mat::Zero(height, a.cols());
  out.middleRows(start, a.rows()) = a.value();
  const Index count = a.rows();
  return make_op(std::move(out), {a}, [start, count](const Var&, const Var& g) {
    return std::vector<Var>{slice_rows(g, start, count)};
  });
}

Var gather_rows(const Var& table, std::span<const int> rows) {
  Mat out(static_cast<Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= table.rows()) throw std::out_of_range("gather_rows: index");
    out.row(static_cast<Index>(i)) = table.value().row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  const Index height = table.rows();
  return make_op(std::move(out), {table}, [idx, height](const Var&, const Var& g) {
    return std::vector<Var>{scatter_add_rows(g, idx, height)};
  });
}

Var scatter_add_rows(const Var& a, std::span<const int> rows, Index height) {
  Mat out = Mat::Zero(height, a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(rows[i]) += a.value().row(static_cast<Index>(i));
  std::vector<int> idx(rows.begin(), rows.end());
  return make_op(std::move(out), {a}, [idx](const Var&, const Var& g) {
    return std::vector<Var>{gather_rows(g, idx)};
  });
}

Var grad_reverse(const Var& a, double lambda) {
  return make_op(a.value(), {a}, [lambda](const Var&, const Var& g) { return std::vector<Var>{scale(g, -lambda)}; });
}

Var detach(const Var& a) { return Var::constant(a.value()); }

// ---------------------------------------------------------------- GRU

Var gru_cell(const Var& x, const Var& h, const Var& w_x, const Var& w_h, const Var& b_x, const Var& b_h) {
  const Index H = h.cols();
  if (w_x.cols() != 3 * H || w_h.rows() != H || w_h.cols() != 3 * H || x.cols() != w_x.rows() ||
      b_x.cols() != 3 * H || b_h.cols() != 3 * H || x.rows() != h.rows()) {
    throw std::invalid_argument("gru_cell: shape mismatch");
  }
  const Mat gx = (x.value() * w_x.value()).rowwise() + b_x.value().row(0);
  const Mat gh = (h.value() * w_h.value()).rowwise() + b_h.value().row(0);
  auto sig = [](const auto& m) { return (1.0 / (1.0 + (-m.array()).exp())).matrix(); };
  const Mat r = sig(gx.leftCols(H) + gh.leftCols(H));
  const Mat u = sig(gx.middleCols(H, H) + gh.middleCols(H, H));
  const Mat hn = gh.rightCols(H);
  const Mat n = (gx.rightCols(H) + r.cwiseProduct(hn)).array().tanh().matrix();
  Mat out = (n.array() + u.array() * (h.value().array() - n.array())).matrix();

  return make_op(std::move(out), {x, h, w_x, w_h, b_x, b_h},
                 [x, h, w_x, w_h, b_x, b_h, r, u, n, hn, H](const Var&, const Var& grad_out) {
                   if (GradMode::enabled()) {
                     throw std::logic_error("gru_cell: second-order gradients are not supported");
                   }
                   const Mat& g = grad_out.value();
                   const Mat du = g.cwiseProduct(h.value() - n);
                   const Mat dn = g.cwiseProduct((1.0 - u.array()).matrix());
                   const Mat dn_pre = dn.cwiseProduct((1.0 - n.array().square()).matrix());
                   const Mat dr = dn_pre.cwiseProduct(hn);
                   const Mat dr_pre = dr.cwiseProduct((r.array() * (1.0 - r.array())).matrix());
                   const Mat du_pre = du.cwiseProduct((u.array() * (1.0 - u.array())).matrix());
                   Mat gx(g.rows(), 3 * H), gh(g.rows(), 3 * H);
                   gx << dr_pre, du_pre, dn_pre;
                   gh << dr_pre, du_pre, dn_pre.cwiseProduct(r);
                   std::vector<Var> res(6);
                   if (x.requires_grad()) res[0] = Var::constant(gx * w_x.value().transpose());
                   if (h.requires_grad()) {
                     res[1] = Var::constant(g.cwiseProduct(u) + gh * w_h.value().transpose());
                   }
                   if (w_x.requires_grad()) res[2] = Var::constant(x.value().transpose() * gx);
                   if (w_h.requires_grad()) res[3] = Var::constant(h.value().transpose() * gh);
                   if (b_x.requires_grad()) res[4] = Var::constant(gx.colwise().sum());
                   if (b_h.requires_grad()) res[5] = Var::constant(gh.colwise().sum());
                   return res;
                 });
}

Var gru_cell_reference(const Var& x, const Var& h, const Var& w_x, const Var& w_h, const Var& b_x, const Var& b_h) {
  const Index H = h.cols();
  const Var gx = add_row(matmul(x, w_x), b_x);
  const Var gh = add_row(matmul(h, w_h), b_h);
  const Var r = sigmoid(add(slice_cols(gx, 0, H), slice_cols(gh, 0, H)));
  const Var u = sigmoid(add(slice_cols(gx, H, H), slice_cols(gh, H, H)));
  const Var n = tanh(add(slice_cols(gx, 2 * H, H), mul(r, slice_cols(gh, 2 * H, H))));
  // (1 - u) * n + u * h
  return add(n, mul(u, sub(h, n)));
}

}  // namespace molstyle::nn
