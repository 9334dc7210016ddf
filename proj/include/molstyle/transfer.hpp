#pragma once
// Latent-space adversarial style transfer on top of a frozen guided VAE.
// G maps (z_c, h_s) to a transferred latent; D classifies latents as
// source style, target style or generated.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "molstyle/guidedvae.hpp"
#include "molstyle/metrics.hpp"
#include "molstyle/nn/optim.hpp"
#include "molstyle/styleflow.hpp"

namespace molstyle::transfer {

using nn::Mat;
using nn::Var;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyPool : public std::invalid_argument {
 public:
  explicit EmptyPool(const std::string& which) : std::invalid_argument(which + " pool is too small") {}
};

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class VaeHashMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& what, long iteration) : std::runtime_error(what), iteration_(iteration) {}
  // Parameters were rolled back to the last periodic snapshot, or to their
  // starting values when none was taken.
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

// Discriminator classes.
inline constexpr int kSource = 0;
inline constexpr int kTarget = 1;
inline constexpr int kFake = 2;
inline constexpr int kClasses = 3;

struct TransferConfig {
  int instances = 10;   // K
  int disc_ratio = 5;   // N: D updates per G update
  double gp_weight = 10;
  double w_style = 1;
  double w_recon = 1;
  double w_cycle = 1;
  nn::AdamConfig g_optim{1e-4, 0.5, 0.9, 1e-8, 0};
  nn::AdamConfig d_optim{1e-4, 0.5, 0.9, 1e-8, 0};
  int decode_count = 10;  // k
  double pss_floor = 0.7;
  std::uint64_t seed = 1;
  long iterations = 2000;
  int batch_size = 32;
  int g_hidden = 256;
  int d_hidden = 256;
  flow::FlowConfig flow;  // dim is overwritten with the VAE latent width

  void validate() const;  // throws std::invalid_argument
};

nlohmann::json to_json(const TransferConfig& c);
// Missing keys keep their defaults; unknown keys throw std::invalid_argument.
TransferConfig transfer_config_from_json(const nlohmann::json& j);

// Generator, style flow and discriminator, pinned to one frozen VAE.
class TransferModel {
 public:
  TransferModel(int latent_dim, TransferConfig config, std::string vae_hash);

  const TransferConfig& config() const { return config_; }
  int latent_dim() const { return latent_dim_; }
  const std::string& vae_hash() const { return vae_hash_; }

  // G and the flow chain share one parameter set and one optimizer.
  nn::ParamSet& generator_params() { return g_params_; }
  const nn::ParamSet& generator_params() const { return g_params_; }
  nn::ParamSet& discriminator_params() { return d_params_; }
  const nn::ParamSet& discriminator_params() const { return d_params_; }
  const flow::StyleFlow& flow() const { return flow_; }

  // z_g = G([z_c, h_s]); throws DimensionMismatch.
  Var generate(const Var& z_c, const Var& h_s) const;
  // batch x kClasses logits.
  Var logits(const Var& z) const;

  void require_vae(const vae::VaeModel& vae) const;  // throws VaeHashMismatch

  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<TransferModel> load(const std::filesystem::path& path);

 private:
  TransferConfig config_;
  int latent_dim_;
  std::string vae_hash_;
  nn::ParamSet g_params_;
  nn::ParamSet d_params_;
  nn::Mlp generator_;
  flow::StyleFlow flow_;
  nn::Mlp discriminator_;
};

// ------------------------------------------------------------ losses

// Mean over rows of -log softmax(logits)[cls].
Var class_nll(const Var& logits, int cls);
// Per-row softmax probabilities.
Mat class_probabilities(const Mat& logits);

// -log p_D(target | z_g), averaged over the batch.
Var style_loss(const TransferModel& model, const Var& z_g);

struct AdversarialTerms {
  Var source;  // -[log p(source | z_c^i) + log p(source | G(z_c^i, h_s^i))]
  Var target;  // same for target-pool latents with target style codes
  Var fake;    // -log p(fake | z_g)
  Var total() const;
};

AdversarialTerms adversarial_losses(const TransferModel& model, const Var& z_source, const Var& regen_source,
                                    const Var& z_target, const Var& regen_target, const Var& z_g);

struct PenaltyResult {
  Var penalty;                       // mean of (||grad||_2 - 1)^2
  std::vector<double> grad_norms;    // per interpolate
};

// Gradient penalty on logsumexp of the two real-class logits at uniform
// interpolates u * real + (1 - u) * fake, one u per row.
PenaltyResult gradient_penalty(const TransferModel& model, const Mat& real, const Mat& fake, nn::Rng& rng);
// As above with explicit mixing weights (rows x 1).
PenaltyResult gradient_penalty(const TransferModel& model, const Mat& real, const Mat& fake, const Mat& u);

// Unit-variance Gaussian NLL up to constants: mean over rows of ½||pred - target||².
Var latent_nll(const Var& pred, const Mat& target);
Var recon_loss(const TransferModel& model, const Mat& z_c, const Var& h_source);
Var cycle_loss(const TransferModel& model, const Mat& z_c, const Var& z_g, const Var& h_source);

// ------------------------------------------------------------ training

// Pool molecules with their posterior-mean latents.
struct LatentPool {
  std::vector<std::string> smiles;
  Mat latents;

  std::size_t size() const { return smiles.size(); }
};

LatentPool encode_pool(const vae::VaeModel& vae, std::span<const std::string> smiles, int batch = 256);

// `count` distinct indices below n, none in `exclude` (sorted or not).
std::vector<int> sample_indices(int n, int count, std::span<const int> exclude, nn::Rng& rng);

struct DStepLog {
  long iteration = 0;
  double adversarial = 0;
  double penalty = 0;
  double fake_accuracy = 0;  // share of z_g rows D assigns to the fake class
  double grad_norm_median = 0;
};

struct GStepLog {
  long iteration = 0;
  double style = 0;
  double recon = 0;
  double cycle = 0;
  double total = 0;  // w_style * style + w_recon * recon + w_cycle * cycle
};

struct TrainLog {
  std::vector<DStepLog> d_steps;
  std::vector<GStepLog> g_steps;
  long d_updates = 0;
  long g_updates = 0;
  std::string vae_hash_before;
  std::string vae_hash_after;
};

struct TrainOptions {
  std::filesystem::path checkpoint_path;  // empty: no checkpoint
  long checkpoint_every = 500;
  std::function<void(const DStepLog&, const GStepLog*)> on_iteration;
};

// Algorithm-1 loop. D is updated every iteration; G and the flow every
// N-th iteration starting with the first. The VAE is only read.
std::unique_ptr<TransferModel> train(const vae::VaeModel& vae, const LatentPool& source, const LatentPool& target,
                                     const TransferConfig& config, const TrainOptions& options = {},
                                     TrainLog* log = nullptr);

// Continues training an existing model in place (used by tests).
void train_model(TransferModel& model, const vae::VaeModel& vae, const LatentPool& source, const LatentPool& target,
                 const TrainOptions& options, TrainLog* log);

// ------------------------------------------------------------ inference

struct Candidate {
  std::string smiles;
  bool valid = false;
  double style = 0;        // NaN when invalid
  double pss = 0;
  double improvement = 0;  // NaN when invalid
};

struct TransferResult {
  std::string input;
  std::string output;
  int chosen = -1;         // index into candidates, -1 if none decoded
  bool qualified = false;  // chosen candidate is valid and passes the PSS floor
  double prop_x = 0;
  std::vector<Candidate> candidates;
};

struct Selection {
  int index = -1;          // -1 when no candidate is valid
  bool qualified = false;
};

// Valid candidate above the floor with the largest improvement, ties to the
// lowest index; otherwise the valid candidate with the highest PSS.
Selection select_candidate(std::span<const Candidate> candidates, double pss_floor);

struct Evaluation {
  const metrics::TaskSpec& task;
  const metrics::Scorers& scorers;
  const metrics::PssScales& scales;
};

// k decodes with fresh style batches and flow draws, chosen by
// select_candidate; with no valid decode the first candidate is returned.
TransferResult transfer(const std::string& molecule, const LatentPool& target, const TransferModel& model,
                        const vae::VaeModel& vae, const Evaluation& eval, std::uint64_t seed);

// Runs transfer() over the test molecules and scores each pair; the seed of
// input n depends only on (config seed, n).
metrics::MetricsReport evaluate(std::span<const std::string> inputs, const LatentPool& target,
                                const TransferModel& model, const vae::VaeModel& vae, const Evaluation& eval,
                                std::vector<TransferResult>* results = nullptr);

}  // namespace molstyle::transfer
