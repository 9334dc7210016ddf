#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "molstyle/chem.hpp"
#include "molstyle/hash.hpp"

namespace molstyle::chem {
namespace {

Eigen::MatrixXd feature_matrix(std::span<const LabeledMolecule> corpus, std::span<const std::size_t> rows,
                               int radius, int width) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int bit : circular_fingerprint(corpus[rows[r]].graph, radius, width).on_bits()) x(r, bit) = 1;
  }
  return x;
}

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& v) { return 1 / (1 + (-v).exp()); }

}  // namespace

ToxModel ToxModel::zeros(int width, int radius) {
  ToxModel m;
  m.width = width;
  m.radius = radius;
  m.weights = Eigen::VectorXd::Zero(width);
  return m;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: size mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // average ranks over ties, then Mann-Whitney U
  double rank_sum = 0;
  std::size_t pos = 0, n_pos = 0;
  while (pos < idx.size()) {
    std::size_t end = pos;
    while (end < idx.size() && scores[idx[end]] == scores[idx[pos]]) ++end;
    const double avg_rank = (static_cast<double>(pos + 1) + static_cast<double>(end)) / 2;
    for (std::size_t k = pos; k < end; ++k) {
      if (labels[idx[k]] == 1) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    pos = end;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nan("");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1) / 2) / (np * static_cast<double>(n_neg));
}

ToxModel train_tox_predictor(std::span<const LabeledMolecule> corpus, const ToxTrainConfig& config) {
  std::size_t positives = 0;
  for (const auto& m : corpus) positives += m.label == 1;
  if (positives == 0 || positives == corpus.size()) throw DegenerateLabels();

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_held = static_cast<std::size_t>(std::round(config.heldout_fraction * static_cast<double>(corpus.size())));
  const std::span<const std::size_t> held(order.data(), n_held);
  const std::span<const std::size_t> train(order.data() + n_held, order.size() - n_held);

  Eigen::VectorXd y(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) y(i) = corpus[train[i]].label;
  if (y.sum() == 0 || y.sum() == static_cast<double>(train.size())) throw DegenerateLabels();

  const Eigen::MatrixXd x = feature_matrix(corpus, train, config.radius, config.width);
  ToxModel model = ToxModel::zeros(config.width, config.radius);
  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const Eigen::ArrayXd p = sigmoid((x * model.weights).array() + model.bias);
    const Eigen::VectorXd residual = (p - y.array()).matrix();
    const Eigen::VectorXd grad_w = inv_n * (x.transpose() * residual) + config.l2 * model.weights;
    model.weights -= config.learning_rate * grad_w;
    model.bias -= config.learning_rate * inv_n * residual.sum();
  }

  std::string manifest;
  for (const auto& m : corpus) manifest += m.smiles + '\t' + std::to_string(m.label) + '\n';
  model.corpus_hash = sha1_hex(manifest);
  model.train_size = train.size();
  model.heldout_size = held.size();

  std::vector<double> scores;
  std::vector<int> labels;
  for (auto i : held) {
    scores.push_back(predict_tox(model, corpus[i].graph));
    labels.push_back(corpus[i].label);
  }
  model.heldout_auroc = auroc(scores, labels);
  return model;
}

double predict_tox(const ToxModel& model, const MolGraph& graph) {
  double z = model.bias;
  for (int bit : circular_fingerprint(graph, model.radius, model.width).on_bits()) z += model.weights(bit);
  return 1 / (1 + std::exp(-z));
}

}  // namespace molstyle::chem
