#include "molstyle/nn/layers.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "molstyle/hash.hpp"

namespace molstyle::nn {

Mat xavier(Index rows, Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-a, a);
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

Mat standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

// ---------------------------------------------------------------- ParamSet

Var ParamSet::add(const std::string& name, Mat init) {
  for (const auto& n : names_) {
    if (n == name) throw std::logic_error("duplicate parameter name " + name);
  }
  names_.push_back(name);
  vars_.push_back(Var::param(std::move(init)));
  return vars_.back();
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : vars_) n += static_cast<std::size_t>(v.value().size());
  return n;
}

void ParamSet::zero_grad() {
  for (auto& v : vars_) v.zero_grad();
}

double ParamSet::grad_norm() const {
  double s = 0;
  for (const auto& v : vars_) {
    if (v.grad().size()) s += v.grad().squaredNorm();
  }
  return std::sqrt(s);
}

namespace {

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("checkpoint truncated");
  return v;
}

}  // namespace

void ParamSet::save(std::ostream& out) const {
  put<std::uint64_t>(out, vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    put<std::uint64_t>(out, names_[i].size());
    out.write(names_[i].data(), static_cast<std::streamsize>(names_[i].size()));
    const Mat& m = vars_[i].value();
    put<std::int64_t>(out, m.rows());
    put<std::int64_t>(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
}

void ParamSet::load(std::istream& in) {
  const auto count = get<std::uint64_t>(in);
  if (count != vars_.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, model has " +
                          std::to_string(vars_.size()));
  }
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const auto len = get<std::uint64_t>(in);
    if (len > 4096) throw CheckpointError("checkpoint corrupt: name length");
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    if (name != names_[i]) throw CheckpointError("checkpoint tensor " + name + " where " + names_[i] + " expected");
    const auto rows = get<std::int64_t>(in);
    const auto cols = get<std::int64_t>(in);
    Mat& m = vars_[i].mutable_value();
    if (rows != m.rows() || cols != m.cols()) throw CheckpointError("checkpoint shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw CheckpointError("checkpoint truncated");
  }
}

std::string ParamSet::serialize() const {
  std::ostringstream out(std::ios::binary);
  save(out);
  return out.str();
}

void ParamSet::deserialize(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  load(in);
}

std::string ParamSet::hash() const { return sha1_hex(serialize()); }

// ---------------------------------------------------------------- layers

Linear::Linear(ParamSet& params, const std::string& name, Index in, Index out, Rng& rng)
    : w(params.add(name + ".w", xavier(in, out, rng))), b(params.add(name + ".b", Mat::Zero(1, out))) {}

Mlp::Mlp(ParamSet& params, const std::string& name, const std::vector<Index>& widths, Rng& rng, Activation act)
    : activation(act) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.emplace_back(params, name + "." + std::to_string(i), widths[i], widths[i + 1], rng);
  }
}

Var Mlp::operator()(const Var& x) const {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = activation == Activation::Tanh ? tanh(h) : softplus(h);
  }
  return h;
}

Gru::Gru(ParamSet& params, const std::string& name, Index input, Index hidden_size, int num_layers, Rng& rng)
    : hidden(hidden_size) {
  for (int l = 0; l < num_layers; ++l) {
    const std::string p = name + "." + std::to_string(l);
    const Index in = l == 0 ? input : hidden_size;
    GruLayer layer;
    layer.w_x = params.add(p + ".w_x", xavier(in, 3 * hidden_size, rng));
    layer.w_h = params.add(p + ".w_h", xavier(hidden_size, 3 * hidden_size, rng));
    layer.b_x = params.add(p + ".b_x", Mat::Zero(1, 3 * hidden_size));
    layer.b_h = params.add(p + ".b_h", Mat::Zero(1, 3 * hidden_size));
    layers.push_back(layer);
  }
}

Var Gru::step(const Var& x, std::vector<Var>& h) const {
  if (h.size() != layers.size()) throw std::invalid_argument("Gru::step: one state per layer");
  Var in = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    h[l] = gru_cell(in, h[l], L.w_x, L.w_h, L.b_x, L.b_h);
    in = h[l];
  }
  return in;
}

Embedding::Embedding(ParamSet& params, const std::string& name, Index vocab, Index dim, Rng& rng)
    : table(params.add(name + ".table", standard_normal(vocab, dim, rng) * 0.1)) {}

}  // namespace molstyle::nn
