#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "molstyle/nn/autodiff.hpp"

namespace molstyle::nn {

using Rng = std::mt19937_64;

// Uniform Glorot initialisation.
Mat xavier(Index rows, Index cols, Rng& rng);
Mat standard_normal(Index rows, Index cols, Rng& rng);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Named trainable tensors of one model, in registration order.
class ParamSet {
 public:
  Var add(const std::string& name, Mat init);

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Var>& vars() const { return vars_; }
  std::size_t size() const { return vars_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();
  double grad_norm() const;

  // Binary layout: count, then (name, rows, cols, doubles) per tensor.
  void save(std::ostream& out) const;
  // Loads values in place; names and shapes must match.
  void load(std::istream& in);
  std::string serialize() const;
  void deserialize(const std::string& bytes);
  // SHA-1 of serialize().
  std::string hash() const;

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
};

struct Linear {
  Var w;  // in x out
  Var b;  // 1 x out

  Linear() = default;
  Linear(ParamSet& params, const std::string& name, Index in, Index out, Rng& rng);
  Var operator()(const Var& x) const { return add_row(matmul(x, w), b); }
};

enum class Activation { Tanh, Softplus };

// Feed-forward stack; hidden layers use the activation, the last layer is linear.
struct Mlp {
  std::vector<Linear> layers;
  Activation activation = Activation::Tanh;

  Mlp() = default;
  Mlp(ParamSet& params, const std::string& name, const std::vector<Index>& widths, Rng& rng,
      Activation activation = Activation::Tanh);
  Var operator()(const Var& x) const;
};

struct GruLayer {
  Var w_x, w_h, b_x, b_h;
};

// Stacked GRU; step() advances every layer by one token.
struct Gru {
  std::vector<GruLayer> layers;
  Index hidden = 0;

  Gru() = default;
  Gru(ParamSet& params, const std::string& name, Index input, Index hidden, int num_layers, Rng& rng);
  // h holds one state per layer (batch x hidden); returns the top output.
  Var step(const Var& x, std::vector<Var>& h) const;
};

struct Embedding {
  Var table;  // vocab x dim

  Embedding() = default;
  Embedding(ParamSet& params, const std::string& name, Index vocab, Index dim, Rng& rng);
  Var operator()(std::span<const int> ids) const { return gather_rows(table, ids); }
};

}  // namespace molstyle::nn
