#pragma once

// Supervised guided VAE over SMILES tokens. The first kAttributes latent
// coordinates are each tied to one content attribute by an excitation head;
// inhibition heads read the remaining coordinates through a gradient
// reversal so the encoder strips attribute information from them.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "molstyle/chem.hpp"
#include "molstyle/nn/layers.hpp"
#include "molstyle/nn/optim.hpp"

namespace molstyle::vae {

using nn::Mat;
using nn::Var;

class OutOfVocabularyToken : public std::runtime_error {
 public:
  explicit OutOfVocabularyToken(const std::string& token)
      : std::runtime_error("token not in vocabulary: " + token), token_(token) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

class VocabularyMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyCorpus : public std::invalid_argument {
 public:
  EmptyCorpus() : std::invalid_argument("training corpus is empty") {}
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& what, std::string last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  // Checkpoint restored before throwing; empty if none was written.
  const std::string& last_good_checkpoint() const { return last_good_; }

 private:
  std::string last_good_;
};

// ------------------------------------------------------------ vocabulary

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);  // specials first

  // Specials plus every token text seen in `smiles`, sorted.
  static Vocabulary build(std::span<const std::string> smiles);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int id(const std::string& token) const;  // throws OutOfVocabularyToken
  // Token ids without BOS/EOS.
  std::vector<int> encode(std::string_view smiles) const;
  // Concatenates token texts up to the first EOS; specials are skipped.
  std::string decode(std::span<const int> ids) const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// ------------------------------------------------------------ attributes

inline constexpr int kAttributes = 8;

struct AttributeSpec {
  enum class Kind { Continuous, Binary };
  std::string name;
  Kind kind = Kind::Continuous;
  double mean = 0;
  double std = 1;
};

// Raw attribute values of one molecule, in this order: mw, logp, hba, hbd,
// rot, aromatic (0/1), charge, tpsa.
std::array<double, kAttributes> raw_attributes(const chem::MolGraph& graph);
std::array<double, kAttributes> raw_attributes(const chem::PropertyVector& props, bool aromatic);

// Fits normalisation stats; constant columns get std 1.
std::vector<AttributeSpec> fit_attributes(std::span<const std::array<double, kAttributes>> rows);
// Standardised continuous values, 0/1 for the binary attribute.
std::array<double, kAttributes> normalize(const std::vector<AttributeSpec>& specs,
                                          const std::array<double, kAttributes>& raw);

// ------------------------------------------------------------ model

struct VaeConfig {
  int token_embed_dim = 512;
  int hidden_dim = 512;
  int rnn_layers = 3;
  int latent_dim = 512;
  int head_hidden = 64;
  double kl_weight = 0.05;
  int max_length = 120;  // decode bound in tokens, EOS excluded
  std::uint64_t seed = 1;

  // Dimensions used at desk scale.
  static VaeConfig desk();
  void validate() const;  // throws std::invalid_argument
};

struct Batch {
  std::vector<std::vector<int>> tokens;  // ids without BOS/EOS
  Mat labels;                            // batch x kAttributes, normalised
};

struct Encoded {
  Var mu;
  Var logvar;
  Var z;
};

struct LossTerms {
  Var elbo;         // reconstruction NLL + kl_weight * KL
  Var recon;        // token NLL, summed over tokens, averaged over the batch
  Var kl;           // closed-form KL, averaged over the batch
  Var excitation;   // sum over attributes, averaged over the batch
  Var inhibition;   // as excitation, heads reading z_rest
  // Quantity backpropagated: elbo + excitation + inhibition, with the
  // inhibition path reversed at z_rest.
  Var backprop;
  // Logged objective elbo + excitation - inhibition.
  double total() const { return elbo.item() + excitation.item() - inhibition.item(); }
};

enum class DecodeMode { Greedy, Sample };

class VaeModel {
 public:
  VaeModel(VaeConfig config, Vocabulary vocab, std::vector<AttributeSpec> attributes);

  const VaeConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<AttributeSpec>& attributes() const { return attributes_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  int latent_dim() const { return config_.latent_dim; }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  // Throws nn::FrozenModel when frozen.
  void check_mutable() const;
  // Applies accumulated gradients through `opt`; throws nn::FrozenModel when frozen.
  void update(nn::Adam& opt);

  // Posterior parameters and a reparameterised sample; noise from `rng`,
  // or zero noise when rng is null.
  Encoded encode(std::span<const std::vector<int>> tokens, nn::Rng* rng) const;
  Encoded encode_smiles(std::span<const std::string> smiles, nn::Rng* rng) const;

  // Token-level log-likelihood terms with teacher forcing.
  Var reconstruction_nll(const Var& z, std::span<const std::vector<int>> tokens) const;
  Var excitation_loss(const Var& z, const Mat& labels) const;
  // Heads read z_rest through a gradient reversal with the given strength.
  Var inhibition_loss(const Var& z, const Mat& labels, double reversal = 1.0) const;
  LossTerms losses(const Batch& batch, nn::Rng& rng, double kl_weight) const;

  // Per-attribute predictions from z_t (excitation) or z_rest (inhibition),
  // batch x kAttributes; binary columns are probabilities.
  Mat predict_excitation(const Mat& z) const;
  Mat predict_inhibition(const Mat& z) const;

  // Token ids (EOS excluded) per latent row.
  std::vector<std::vector<int>> decode(const Mat& z, DecodeMode mode, nn::Rng* rng = nullptr,
                                       int max_length = -1) const;
  std::vector<std::string> decode_smiles(const Mat& z, DecodeMode mode, nn::Rng* rng = nullptr) const;

  // Token-level reconstruction accuracy of greedy decoding from posterior means.
  double reconstruction_accuracy(std::span<const std::string> smiles) const;

  void save(const std::filesystem::path& path, const std::string& metadata_json = "{}") const;
  static VaeModel load(const std::filesystem::path& path);
  // Throws VocabularyMismatch unless the model vocabulary equals `expected`.
  void require_vocabulary(const Vocabulary& expected) const;

 private:
  Var head_forward(const std::vector<nn::Mlp>& heads, const Var& input, bool rest) const;
  Var head_loss(const Var& predictions, const Mat& labels) const;

  VaeConfig config_;
  Vocabulary vocab_;
  std::vector<AttributeSpec> attributes_;
  nn::ParamSet params_;
  nn::Embedding embed_;
  nn::Gru encoder_;
  nn::Linear to_posterior_;  // hidden -> 2d (mu, logvar)
  nn::Linear to_decoder_;    // d -> layers * hidden
  nn::Gru decoder_;
  nn::Linear to_vocab_;
  std::vector<nn::Mlp> excite_;   // 1 -> head_hidden -> 1
  std::vector<nn::Mlp> inhibit_;  // (d - kAttributes) -> head_hidden -> 1
  bool frozen_ = false;
};

// Closed-form KL(N(mu, exp(logvar)) || N(0, I)), summed over dims, averaged over rows.
Var kl_divergence(const Var& mu, const Var& logvar);

// ------------------------------------------------------------ pretraining

struct TrainingExample {
  std::string smiles;
  chem::PropertyVector props;
  bool aromatic = false;
};

struct PretrainOptions {
  int epochs = 20;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  double warmup_fraction = 0.1;  // KL weight ramps linearly from 0 over this share of steps
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::filesystem::path log_path;        // empty: no CSV log
  std::function<void(int epoch, double mean_total)> on_epoch;
};

struct StepLog {
  long step = 0;
  int epoch = 0;
  double kl_weight = 0;
  double elbo = 0;
  double kl = 0;
  double excitation = 0;
  double inhibition = 0;
  double total = 0;
};

// Trains from scratch and returns the frozen model. Vocabulary and
// attribute stats come from the corpus.
VaeModel pretrain(std::span<const TrainingExample> corpus, const VaeConfig& config, const PretrainOptions& options,
                  std::vector<StepLog>* log = nullptr);

// ------------------------------------------------------------ diagnostics

// Coefficient of determination of predictions against targets.
double r_squared(std::span<const double> predicted, std::span<const double> target);

struct DisentanglementReport {
  std::array<double, kAttributes> excitation_r2{};
  std::array<double, kAttributes> inhibition_r2{};
};

// R^2 of the excitation heads on z_t and inhibition heads on z_rest over
// posterior means; the binary attribute is scored on probabilities.
DisentanglementReport disentanglement(const VaeModel& model, std::span<const TrainingExample> examples);

// Share of prior samples whose greedy decode parses and validates.
double prior_validity(const VaeModel& model, int samples, std::uint64_t seed);

}  // namespace molstyle::vae
