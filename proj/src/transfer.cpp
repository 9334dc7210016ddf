#include "molstyle/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_set>

#include "molstyle/chem.hpp"
#include "molstyle/smiles.hpp"

namespace molstyle::transfer {

using nlohmann::json;
using nn::Index;

// ------------------------------------------------------------ config

void TransferConfig::validate() const {
  if (instances < 2) throw std::invalid_argument("instances must be at least 2");
  if (disc_ratio < 1) throw std::invalid_argument("disc_ratio must be at least 1");
  if (decode_count < 1) throw std::invalid_argument("decode_count must be at least 1");
  if (gp_weight < 0 || w_style < 0 || w_recon < 0 || w_cycle < 0) throw std::invalid_argument("loss weights must be >= 0");
  if (iterations < 0 || batch_size < 1) throw std::invalid_argument("bad iteration or batch settings");
  if (g_hidden < 1 || d_hidden < 1) throw std::invalid_argument("hidden widths must be positive");
  if (flow.steps < 1 || flow.hidden < 1 || flow.context_dim < 1) throw std::invalid_argument("bad flow settings");
}

namespace {

json adam_json(const nn::AdamConfig& a) {
  return {{"learning_rate", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2},
          {"epsilon", a.epsilon},             {"clip_norm", a.clip_norm}};
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end()) {
      throw std::invalid_argument("unknown key '" + k + "' in " + where);
    }
  }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

nn::AdamConfig adam_from_json(const json& j, nn::AdamConfig a, const std::string& where) {
  reject_unknown(j, {"learning_rate", "beta1", "beta2", "epsilon", "clip_norm"}, where);
  read_key(j, "learning_rate", a.learning_rate);
  read_key(j, "beta1", a.beta1);
  read_key(j, "beta2", a.beta2);
  read_key(j, "epsilon", a.epsilon);
  read_key(j, "clip_norm", a.clip_norm);
  return a;
}

}  // namespace

json to_json(const TransferConfig& c) {
  return {{"instances", c.instances},
          {"disc_ratio", c.disc_ratio},
          {"gp_weight", c.gp_weight},
          {"w_style", c.w_style},
          {"w_recon", c.w_recon},
          {"w_cycle", c.w_cycle},
          {"g_optim", adam_json(c.g_optim)},
          {"d_optim", adam_json(c.d_optim)},
          {"decode_count", c.decode_count},
          {"pss_floor", c.pss_floor},
          {"seed", c.seed},
          {"iterations", c.iterations},
          {"batch_size", c.batch_size},
          {"g_hidden", c.g_hidden},
          {"d_hidden", c.d_hidden},
          {"flow",
           {{"dim", c.flow.dim},
            {"steps", c.flow.steps},
            {"hidden", c.flow.hidden},
            {"context_dim", c.flow.context_dim},
            {"gate_bias", c.flow.gate_bias}}}};
}

TransferConfig transfer_config_from_json(const json& j) {
  reject_unknown(j,
                 {"instances", "disc_ratio", "gp_weight", "w_style", "w_recon", "w_cycle", "g_optim", "d_optim",
                  "decode_count", "pss_floor", "seed", "iterations", "batch_size", "g_hidden", "d_hidden", "flow"},
                 "transfer config");
  TransferConfig c;
  read_key(j, "instances", c.instances);
  read_key(j, "disc_ratio", c.disc_ratio);
  read_key(j, "gp_weight", c.gp_weight);
  read_key(j, "w_style", c.w_style);
  read_key(j, "w_recon", c.w_recon);
  read_key(j, "w_cycle", c.w_cycle);
  if (j.contains("g_optim")) c.g_optim = adam_from_json(j.at("g_optim"), c.g_optim, "g_optim");
  if (j.contains("d_optim")) c.d_optim = adam_from_json(j.at("d_optim"), c.d_optim, "d_optim");
  read_key(j, "decode_count", c.decode_count);
  read_key(j, "pss_floor", c.pss_floor);
  read_key(j, "seed", c.seed);
  read_key(j, "iterations", c.iterations);
  read_key(j, "batch_size", c.batch_size);
  read_key(j, "g_hidden", c.g_hidden);
  read_key(j, "d_hidden", c.d_hidden);
  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    reject_unknown(f, {"dim", "steps", "hidden", "context_dim", "gate_bias"}, "flow");
    read_key(f, "dim", c.flow.dim);
    read_key(f, "steps", c.flow.steps);
    read_key(f, "hidden", c.flow.hidden);
    read_key(f, "context_dim", c.flow.context_dim);
    read_key(f, "gate_bias", c.flow.gate_bias);
  }
  c.validate();
  return c;
}

// ------------------------------------------------------------ model

TransferModel::TransferModel(int latent_dim, TransferConfig config, std::string vae_hash)
    : config_(std::move(config)), latent_dim_(latent_dim), vae_hash_(std::move(vae_hash)) {
  config_.validate();
  if (latent_dim < 1) throw DimensionMismatch("latent width must be positive");
  config_.flow.dim = latent_dim;
  nn::Rng rng(config_.seed ^ 0x5bd1e9955bd1e995ULL);
  const Index d = latent_dim;
  generator_ = nn::Mlp(g_params_, "generator", {2 * d, config_.g_hidden, config_.g_hidden, d}, rng);
  flow_ = flow::StyleFlow(g_params_, "flow", config_.flow, rng);
  discriminator_ = nn::Mlp(d_params_, "discriminator", {d, config_.d_hidden, config_.d_hidden, kClasses}, rng);
}

Var TransferModel::generate(const Var& z_c, const Var& h_s) const {
  if (z_c.cols() != latent_dim_ || h_s.cols() != latent_dim_ || z_c.rows() != h_s.rows()) {
    throw DimensionMismatch("generate: expected two batch x " + std::to_string(latent_dim_) + " inputs");
  }
  const Var parts[] = {z_c, h_s};
  return generator_(nn::concat_cols(parts));
}

Var TransferModel::logits(const Var& z) const {
  if (z.cols() != latent_dim_) throw DimensionMismatch("discriminator: latent width mismatch");
  return discriminator_(z);
}

void TransferModel::require_vae(const vae::VaeModel& vae) const {
  const std::string h = vae.params().hash();
  if (h != vae_hash_) throw VaeHashMismatch("transfer model was trained on VAE " + vae_hash_ + ", got " + h);
}

namespace {
constexpr const char* kMagic = "MOLSTYLE-TRANSFER";
constexpr int kFormatVersion = 1;
}  // namespace

void TransferModel::save(const std::filesystem::path& path) const {
  json header{{"format_version", kFormatVersion},
              {"latent_dim", latent_dim_},
              {"vae_sha1", vae_hash_},
              {"config", to_json(config_)},
              {"generator_sha1", g_params_.hash()},
              {"discriminator_sha1", d_params_.hash()}};
  const std::string text = header.dump();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw nn::CheckpointError("cannot write checkpoint " + tmp);
    out << kMagic << '\n' << text.size() << '\n' << text;
    g_params_.save(out);
    d_params_.save(out);
    if (!out) throw nn::CheckpointError("short write to checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<TransferModel> TransferModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw nn::CheckpointError("cannot open checkpoint " + path.string());
  std::string magic, len_line;
  std::getline(in, magic);
  if (magic != kMagic) throw nn::CheckpointError(path.string() + " is not a transfer checkpoint");
  std::getline(in, len_line);
  std::size_t len = 0;
  try {
    len = std::stoul(len_line);
  } catch (const std::exception&) {
    throw nn::CheckpointError("checkpoint header length unreadable");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw nn::CheckpointError("checkpoint header truncated");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw nn::CheckpointError(std::string("checkpoint header: ") + e.what());
  }
  if (header.at("format_version") != kFormatVersion) throw nn::CheckpointError("unsupported checkpoint version");
  auto model = std::make_unique<TransferModel>(header.at("latent_dim").get<int>(),
                                               transfer_config_from_json(header.at("config")),
                                               header.at("vae_sha1").get<std::string>());
  model->g_params_.load(in);
  model->d_params_.load(in);
  if (model->g_params_.hash() != header.at("generator_sha1") ||
      model->d_params_.hash() != header.at("discriminator_sha1")) {
    throw nn::CheckpointError("checkpoint parameters corrupt");
  }
  return model;
}

// ------------------------------------------------------------ losses

Var class_nll(const Var& logits, int cls) {
  if (cls < 0 || cls >= logits.cols()) throw std::out_of_range("class index out of range");
  const Var lp = nn::log_softmax_rows(logits);
  return nn::neg(nn::mean(nn::slice_cols(lp, cls, 1)));
}

Mat class_probabilities(const Mat& logits) {
  Mat p = logits;
  for (Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Var style_loss(const TransferModel& model, const Var& z_g) { return class_nll(model.logits(z_g), kTarget); }

Var AdversarialTerms::total() const { return nn::add(nn::add(source, target), fake); }

AdversarialTerms adversarial_losses(const TransferModel& model, const Var& z_source, const Var& regen_source,
                                    const Var& z_target, const Var& regen_target, const Var& z_g) {
  AdversarialTerms t;
  t.source = nn::add(class_nll(model.logits(z_source), kSource), class_nll(model.logits(regen_source), kSource));
  t.target = nn::add(class_nll(model.logits(z_target), kTarget), class_nll(model.logits(regen_target), kTarget));
  t.fake = class_nll(model.logits(z_g), kFake);
  return t;
}

PenaltyResult gradient_penalty(const TransferModel& model, const Mat& real, const Mat& fake, nn::Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Mat u(real.rows(), 1);
  for (Index i = 0; i < u.rows(); ++i) u(i, 0) = unif(rng);
  return gradient_penalty(model, real, fake, u);
}

PenaltyResult gradient_penalty(const TransferModel& model, const Mat& real, const Mat& fake, const Mat& u) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols() || u.rows() != real.rows()) {
    throw DimensionMismatch("gradient penalty: real and fake batches differ in shape");
  }
  nn::EnableGradGuard grad_on;
  const Mat mixed = (real.array().colwise() * u.col(0).array() + fake.array().colwise() * (1 - u.col(0).array())).matrix();
  const Var x = Var::param(mixed);
  const Var score = nn::logsumexp_rows(nn::slice_cols(model.logits(x), 0, 2));
  const Var g = nn::grad(nn::sum(score), std::span<const Var>(&x, 1), /*create_graph=*/true)[0];
  const Var norms = nn::sqrt(nn::add_scalar(nn::sum_cols(nn::square(g)), 1e-12));
  PenaltyResult r;
  r.penalty = nn::mean(nn::square(nn::add_scalar(norms, -1.0)));
  const Mat& n = norms.value();
  r.grad_norms.assign(n.data(), n.data() + n.size());
  return r;
}

Var latent_nll(const Var& pred, const Mat& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw DimensionMismatch("latent_nll: shape mismatch");
  const double rows = static_cast<double>(target.rows());
  return nn::scale(nn::sum(nn::square(nn::sub(pred, Var::constant(target)))), 0.5 / rows);
}

Var recon_loss(const TransferModel& model, const Mat& z_c, const Var& h_source) {
  return latent_nll(model.generate(Var::constant(z_c), h_source), z_c);
}

Var cycle_loss(const TransferModel& model, const Mat& z_c, const Var& z_g, const Var& h_source) {
  return latent_nll(model.generate(z_g, h_source), z_c);
}

// ------------------------------------------------------------ training

LatentPool encode_pool(const vae::VaeModel& vae, std::span<const std::string> smiles, int batch) {
  LatentPool pool;
  pool.smiles.assign(smiles.begin(), smiles.end());
  pool.latents.resize(static_cast<Index>(smiles.size()), vae.latent_dim());
  nn::NoGradGuard guard;
  for (std::size_t start = 0; start < smiles.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(batch), smiles.size() - start);
    const auto enc = vae.encode_smiles(smiles.subspan(start, n), nullptr);
    pool.latents.middleRows(static_cast<Index>(start), static_cast<Index>(n)) = enc.mu.value();
  }
  return pool;
}

std::vector<int> sample_indices(int n, int count, std::span<const int> exclude, nn::Rng& rng) {
  const std::unordered_set<int> banned(exclude.begin(), exclude.end());
  int allowed = 0;
  for (int i = 0; i < n; ++i) allowed += !banned.count(i);
  if (count > allowed) throw EmptyPool("sampling");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  std::unordered_set<int> taken;
  std::uniform_int_distribution<int> pick(0, n - 1);
  if (count * 4 > allowed) {
    // dense draw: shuffle the allowed indices
    std::vector<int> all;
    for (int i = 0; i < n; ++i)
      if (!banned.count(i)) all.push_back(i);
    for (int i = 0; i < count; ++i) {
      std::uniform_int_distribution<int> rest(i, static_cast<int>(all.size()) - 1);
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(rest(rng))]);
      out.push_back(all[static_cast<std::size_t>(i)]);
    }
    return out;
  }
  while (static_cast<int>(out.size()) < count) {
    const int i = pick(rng);
    if (banned.count(i) || !taken.insert(i).second) continue;
    out.push_back(i);
  }
  return out;
}

namespace {

Mat gather(const Mat& m, std::span<const int> rows) {
  Mat out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool all_finite(const nn::ParamSet& p) {
  for (const auto& v : p.vars())
    if (v.defined() && !v.grad().allFinite()) return false;
  return true;
}

// Style code for a batch from K instances drawn out of `pool`.
flow::StyleCode style_code(const TransferModel& model, const LatentPool& pool, int batch, std::span<const int> exclude,
                           nn::Rng& rng) {
  const auto idx = sample_indices(static_cast<int>(pool.size()), model.config().instances, exclude, rng);
  return model.flow().sample(flow::batch_prior(gather(pool.latents, idx)), batch, rng);
}

}  // namespace

std::unique_ptr<TransferModel> train(const vae::VaeModel& vae, const LatentPool& source, const LatentPool& target,
                                     const TransferConfig& config, const TrainOptions& options, TrainLog* log) {
  auto model = std::make_unique<TransferModel>(vae.latent_dim(), config, vae.params().hash());
  train_model(*model, vae, source, target, options, log);
  return model;
}

void train_model(TransferModel& model, const vae::VaeModel& vae, const LatentPool& source, const LatentPool& target,
                 const TrainOptions& options, TrainLog* log) {
  const auto& cfg = model.config();
  model.require_vae(vae);
  const int B = cfg.batch_size, K = cfg.instances;
  if (static_cast<int>(source.size()) < B + K) throw EmptyPool("source");
  if (static_cast<int>(target.size()) < std::max(B, K)) throw EmptyPool("target");
  if (source.latents.cols() != model.latent_dim() || target.latents.cols() != model.latent_dim()) {
    throw DimensionMismatch("pool latents do not match the model width");
  }

  TrainLog local;
  TrainLog& out = log ? *log : local;
  out.vae_hash_before = vae.params().hash();

  auto& gp = model.generator_params();
  auto& dp = model.discriminator_params();
  nn::Adam g_opt(gp, cfg.g_optim);
  nn::Adam d_opt(dp, cfg.d_optim);
  nn::Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  std::string g_snapshot = gp.serialize(), d_snapshot = dp.serialize();
  auto roll_back = [&](long k, const std::string& what) {
    gp.deserialize(g_snapshot);
    dp.deserialize(d_snapshot);
    throw NonFiniteLoss(what + " at iteration " + std::to_string(k), k);
  };

  const std::vector<int> none;
  for (long k = 0; k < cfg.iterations; ++k) {
    const bool g_step = k % cfg.disc_ratio == 0;
    nn::EnableGradGuard grad_on;

    // Sample content batch m^i, a target batch, and both style batches.
    const auto content_idx = sample_indices(static_cast<int>(source.size()), B, none, rng);
    const auto target_idx = sample_indices(static_cast<int>(target.size()), B, none, rng);
    const Mat z_c = gather(source.latents, content_idx);
    const Mat z_t = gather(target.latents, target_idx);
    const auto h_j = style_code(model, target, B, none, rng);
    const auto h_i = style_code(model, source, B, content_idx, rng);

    std::optional<nn::NoGradGuard> no_grad;
    if (!g_step) no_grad.emplace();
    const Var z_g = model.generate(Var::constant(z_c), h_j.h_s);
    const Var regen_source = model.generate(Var::constant(z_c), h_i.h_s);
    no_grad.reset();

    // Regenerating target latents needs target codes excluding the batch.
    Mat regen_target;
    {
      nn::NoGradGuard ng;
      const auto h_jt = style_code(model, target, B, target_idx, rng);
      regen_target = model.generate(Var::constant(z_t), h_jt.h_s).value();
    }

    gp.zero_grad();
    dp.zero_grad();

    GStepLog glog;
    if (g_step) {
      const Var ls = style_loss(model, z_g);
      const Var lr = latent_nll(regen_source, z_c);
      const auto h_i2 = style_code(model, source, B, content_idx, rng);
      const Var lc = cycle_loss(model, z_c, z_g, h_i2.h_s);
      const Var total = nn::add(nn::add(nn::scale(ls, cfg.w_style), nn::scale(lr, cfg.w_recon)), nn::scale(lc, cfg.w_cycle));
      glog = {k, ls.item(), lr.item(), lc.item(), total.item()};
      if (!std::isfinite(glog.total)) roll_back(k, "non-finite generator loss");
      nn::backward(total);
      dp.zero_grad();  // the style loss also reaches D; D has its own objective
    }

    const auto adv = adversarial_losses(model, Var::constant(z_c), Var::constant(regen_source.value()),
                                        Var::constant(z_t), Var::constant(regen_target), Var::constant(z_g.value()));
    const auto pen = gradient_penalty(model, z_t, z_g.value(), rng);
    const Var d_total = nn::add(adv.total(), nn::scale(pen.penalty, cfg.gp_weight));

    DStepLog dlog;
    dlog.iteration = k;
    dlog.adversarial = adv.total().item();
    dlog.penalty = pen.penalty.item();
    dlog.grad_norm_median = median(pen.grad_norms);
    {
      const Mat probs = class_probabilities(model.logits(Var::constant(z_g.value())).value());
      Index hits = 0;
      for (Index i = 0; i < probs.rows(); ++i) {
        Index arg = 0;
        probs.row(i).maxCoeff(&arg);
        hits += arg == kFake;
      }
      dlog.fake_accuracy = static_cast<double>(hits) / static_cast<double>(probs.rows());
    }
    if (!std::isfinite(d_total.item())) roll_back(k, "non-finite discriminator loss");
    nn::backward(d_total);
    if (!all_finite(dp) || (g_step && !all_finite(gp))) roll_back(k, "non-finite gradient");

    d_opt.step();
    ++out.d_updates;
    if (g_step) {
      g_opt.step();
      ++out.g_updates;
    }
    out.d_steps.push_back(dlog);
    if (g_step) out.g_steps.push_back(glog);
    if (options.on_iteration) options.on_iteration(dlog, g_step ? &out.g_steps.back() : nullptr);

    const bool last = k + 1 == cfg.iterations;
    if (options.checkpoint_every > 0 && ((k + 1) % options.checkpoint_every == 0 || last)) {
      g_snapshot = gp.serialize();
      d_snapshot = dp.serialize();
      if (!options.checkpoint_path.empty()) model.save(options.checkpoint_path);
    }
  }
  out.vae_hash_after = vae.params().hash();
}

// ------------------------------------------------------------ inference

Selection select_candidate(std::span<const Candidate> candidates, double pss_floor) {
  Selection best, fallback;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& cand = candidates[c];
    if (!cand.valid) continue;
    const int i = static_cast<int>(c);
    if (cand.pss > pss_floor &&
        (best.index < 0 || cand.improvement > candidates[static_cast<std::size_t>(best.index)].improvement)) {
      best.index = i;
    }
    if (fallback.index < 0 || cand.pss > candidates[static_cast<std::size_t>(fallback.index)].pss) fallback.index = i;
  }
  if (best.index >= 0) {
    best.qualified = true;
    return best;
  }
  return fallback;
}

TransferResult transfer(const std::string& molecule, const LatentPool& target, const TransferModel& model,
                        const vae::VaeModel& vae, const Evaluation& eval, std::uint64_t seed) {
  const auto gx = smiles::read_valid(molecule);
  if (!gx) throw InvalidInput("input molecule does not parse or validate: " + molecule);
  if (static_cast<int>(target.size()) < model.config().instances) throw EmptyPool("target");
  TransferResult r;
  r.input = molecule;
  r.prop_x = eval.scorers.style(eval.task, *gx);
  const auto px = chem::content_properties(*gx);

  nn::NoGradGuard guard;
  Mat z_c;
  try {
    const std::string one[] = {molecule};
    z_c = vae.encode_smiles(one, nullptr).mu.value();
  } catch (const vae::OutOfVocabularyToken& e) {
    throw InvalidInput(e.what());
  }
  const int k = model.config().decode_count;
  nn::Rng rng(seed);
  Mat h(k, model.latent_dim());
  for (int c = 0; c < k; ++c) h.row(c) = style_code(model, target, 1, {}, rng).h_s.value();
  const Mat zc_rep = z_c.replicate(k, 1);
  const Mat z_g = model.generate(Var::constant(zc_rep), Var::constant(h)).value();
  const auto decoded = vae.decode_smiles(z_g, vae::DecodeMode::Greedy);

  for (int c = 0; c < k; ++c) {
    Candidate cand;
    cand.smiles = decoded[static_cast<std::size_t>(c)];
    cand.style = cand.improvement = std::numeric_limits<double>::quiet_NaN();
    if (auto gy = cand.smiles.empty() ? std::nullopt : smiles::read_valid(cand.smiles)) {
      try {
        cand.style = eval.scorers.style(eval.task, *gy);
        cand.pss = metrics::pss(px, chem::content_properties(*gy), eval.scales);
        cand.improvement = metrics::improvement(r.prop_x, cand.style, eval.task);
        cand.valid = true;
      } catch (const std::exception&) {
        cand.style = std::numeric_limits<double>::quiet_NaN();
        cand.pss = 0;
      }
    }
    r.candidates.push_back(std::move(cand));
  }
  const auto pick = select_candidate(r.candidates, model.config().pss_floor);
  r.qualified = pick.qualified;
  r.chosen = pick.index >= 0 ? pick.index : 0;
  r.output = r.candidates[static_cast<std::size_t>(r.chosen)].smiles;
  return r;
}

metrics::MetricsReport evaluate(std::span<const std::string> inputs, const LatentPool& target,
                                const TransferModel& model, const vae::VaeModel& vae, const Evaluation& eval,
                                std::vector<TransferResult>* results) {
  if (inputs.empty()) throw metrics::EmptyTestSet();
  model.require_vae(vae);
  metrics::MetricsReport report;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    const std::uint64_t seed = chem::hash_combine(model.config().seed, n);
    auto r = transfer(inputs[n], target, model, vae, eval, seed);
    report.records.push_back(metrics::score_pair(r.input, r.output, eval.task, eval.scorers, eval.scales));
    if (results) results->push_back(std::move(r));
  }
  report.aggregate(chem::bundled_alerts());
  return report;
}

}  // namespace molstyle::transfer
