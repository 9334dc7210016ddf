#include "molstyle/guidedvae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "molstyle/smiles.hpp"

namespace molstyle::vae {

using nn::Index;
using nlohmann::json;

// ------------------------------------------------------------ vocabulary

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{"<pad>", "<bos>", "<eos>"}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 3 || tokens_[kPad] != "<pad>" || tokens_[kBos] != "<bos>" || tokens_[kEos] != "<eos>") {
    throw std::invalid_argument("vocabulary must start with <pad>, <bos>, <eos>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token " + tokens_[i]);
    }
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> smiles) {
  std::set<std::string> seen;
  for (const auto& s : smiles) {
    for (const auto& t : smiles::tokenize(s)) seen.insert(t.text);
  }
  std::vector<std::string> tokens{"<pad>", "<bos>", "<eos>"};
  tokens.insert(tokens.end(), seen.begin(), seen.end());
  return Vocabulary(std::move(tokens));
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw OutOfVocabularyToken(token);
  return it->second;
}

std::vector<int> Vocabulary::encode(std::string_view smiles) const {
  std::vector<int> ids;
  for (const auto& t : smiles::tokenize(smiles)) ids.push_back(id(t.text));
  return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos || id < 0 || id >= size()) continue;
    out += tokens_[id];
  }
  return out;
}

// ------------------------------------------------------------ attributes

namespace {

constexpr std::array<const char*, kAttributes> kAttributeNames{"mw",  "logp",     "hba",    "hbd",
                                                               "rot", "aromatic", "charge", "tpsa"};
constexpr int kBinaryAttribute = 5;

}  // namespace

std::array<double, kAttributes> raw_attributes(const chem::PropertyVector& p, bool aromatic) {
  return {p.mw, p.logp, double(p.hba), double(p.hbd), double(p.rot_bonds), aromatic ? 1.0 : 0.0, double(p.net_charge),
          p.tpsa};
}

std::array<double, kAttributes> raw_attributes(const chem::MolGraph& graph) {
  return raw_attributes(chem::content_properties(graph), chem::has_aromatic_ring(graph));
}

std::vector<AttributeSpec> fit_attributes(std::span<const std::array<double, kAttributes>> rows) {
  if (rows.empty()) throw EmptyCorpus();
  std::vector<AttributeSpec> specs;
  for (int t = 0; t < kAttributes; ++t) {
    AttributeSpec s;
    s.name = kAttributeNames[t];
    if (t == kBinaryAttribute) {
      s.kind = AttributeSpec::Kind::Binary;
      s.mean = 0;
      s.std = 1;
    } else {
      double mean = 0;
      for (const auto& r : rows) mean += r[t];
      mean /= static_cast<double>(rows.size());
      double var = 0;
      for (const auto& r : rows) var += (r[t] - mean) * (r[t] - mean);
      var /= static_cast<double>(rows.size());
      s.mean = mean;
      s.std = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    specs.push_back(s);
  }
  return specs;
}

std::array<double, kAttributes> normalize(const std::vector<AttributeSpec>& specs,
                                          const std::array<double, kAttributes>& raw) {
  std::array<double, kAttributes> out{};
  for (int t = 0; t < kAttributes; ++t) {
    out[t] = specs[t].kind == AttributeSpec::Kind::Binary ? raw[t] : (raw[t] - specs[t].mean) / specs[t].std;
  }
  return out;
}

// ------------------------------------------------------------ config

VaeConfig VaeConfig::desk() {
  VaeConfig c;
  c.token_embed_dim = 48;
  c.hidden_dim = 128;
  c.rnn_layers = 3;
  c.latent_dim = 128;
  c.head_hidden = 32;
  c.max_length = 100;
  return c;
}

void VaeConfig::validate() const {
  if (latent_dim <= kAttributes) throw std::invalid_argument("latent_dim must exceed the attribute count");
  if (kl_weight < 0) throw std::invalid_argument("kl_weight must be non-negative");
  if (token_embed_dim <= 0 || hidden_dim <= 0 || rnn_layers <= 0 || head_hidden <= 0 || max_length <= 0) {
    throw std::invalid_argument("VAE dimensions must be positive");
  }
}

// ------------------------------------------------------------ model

namespace {

nn::Rng& init_rng(nn::Rng& rng, const VaeConfig& c) {
  c.validate();
  rng.seed(c.seed);
  return rng;
}

}  // namespace

VaeModel::VaeModel(VaeConfig config, Vocabulary vocab, std::vector<AttributeSpec> attributes)
    : config_(config), vocab_(std::move(vocab)), attributes_(std::move(attributes)) {
  if (attributes_.size() != kAttributes) throw std::invalid_argument("expected one spec per attribute");
  nn::Rng rng;
  init_rng(rng, config_);
  const Index E = config_.token_embed_dim, H = config_.hidden_dim, d = config_.latent_dim, V = vocab_.size();
  embed_ = nn::Embedding(params_, "embed", V, E, rng);
  encoder_ = nn::Gru(params_, "encoder", E, H, config_.rnn_layers, rng);
  to_posterior_ = nn::Linear(params_, "posterior", H, 2 * d, rng);
  to_decoder_ = nn::Linear(params_, "decoder_init", d, H * config_.rnn_layers, rng);
  decoder_ = nn::Gru(params_, "decoder", E + d, H, config_.rnn_layers, rng);
  to_vocab_ = nn::Linear(params_, "vocab", H, V, rng);
  for (int t = 0; t < kAttributes; ++t) {
    excite_.emplace_back(params_, "excite." + attributes_[t].name, std::vector<Index>{1, config_.head_hidden, 1}, rng);
  }
  for (int t = 0; t < kAttributes; ++t) {
    inhibit_.emplace_back(params_, "inhibit." + attributes_[t].name,
                          std::vector<Index>{d - kAttributes, config_.head_hidden, 1}, rng);
  }
}

void VaeModel::check_mutable() const {
  if (frozen_) throw nn::FrozenModel();
}

void VaeModel::update(nn::Adam& opt) {
  check_mutable();
  opt.step();
}

Encoded VaeModel::encode(std::span<const std::vector<int>> tokens, nn::Rng* rng) const {
  const Index B = static_cast<Index>(tokens.size());
  if (B == 0) throw std::invalid_argument("encode: empty batch");
  const Index d = config_.latent_dim;
  std::size_t T = 0;
  for (const auto& s : tokens) {
    for (int id : s) {
      if (id < 0 || id >= vocab_.size()) throw OutOfVocabularyToken("#" + std::to_string(id));
    }
    T = std::max(T, s.size() + 1);
  }
  std::vector<Var> h(encoder_.layers.size(), Var::constant(Mat::Zero(B, config_.hidden_dim)));
  std::vector<Var> tops;
  std::vector<int> ids(B);
  for (std::size_t t = 0; t < T; ++t) {
    for (Index b = 0; b < B; ++b) {
      const auto& s = tokens[b];
      ids[b] = t < s.size() ? s[t] : (t == s.size() ? Vocabulary::kEos : Vocabulary::kPad);
    }
    tops.push_back(encoder_.step(embed_(ids), h));
  }
  std::vector<int> last(B);
  for (Index b = 0; b < B; ++b) last[b] = static_cast<int>(tokens[b].size() * B + b);
  const Var final_state = nn::gather_rows(nn::concat_rows(tops), last);
  const Var post = to_posterior_(final_state);
  Encoded e;
  e.mu = nn::slice_cols(post, 0, d);
  e.logvar = nn::slice_cols(post, d, d);
  if (rng) {
    const Var eps = Var::constant(nn::standard_normal(B, d, *rng));
    e.z = nn::add(e.mu, nn::mul(nn::exp(nn::scale(e.logvar, 0.5)), eps));
  } else {
    e.z = e.mu;
  }
  return e;
}

Encoded VaeModel::encode_smiles(std::span<const std::string> smiles, nn::Rng* rng) const {
  std::vector<std::vector<int>> tokens;
  for (const auto& s : smiles) tokens.push_back(vocab_.encode(s));
  return encode(tokens, rng);
}

Var VaeModel::reconstruction_nll(const Var& z, std::span<const std::vector<int>> tokens) const {
  const Index B = z.rows(), H = config_.hidden_dim;
  if (static_cast<Index>(tokens.size()) != B) throw std::invalid_argument("reconstruction_nll: batch mismatch");
  std::size_t T = 0;
  for (const auto& s : tokens) T = std::max(T, s.size() + 1);

  const Var init = nn::tanh(to_decoder_(z));
  std::vector<Var> h;
  for (std::size_t l = 0; l < decoder_.layers.size(); ++l) h.push_back(nn::slice_cols(init, l * H, H));

  std::vector<Var> tops;
  std::vector<int> in(B), targets(B * T);
  Mat mask = Mat::Zero(B * T, 1);
  for (std::size_t t = 0; t < T; ++t) {
    for (Index b = 0; b < B; ++b) {
      const auto& s = tokens[b];
      in[b] = t == 0 ? Vocabulary::kBos : (t - 1 < s.size() ? s[t - 1] : Vocabulary::kPad);
      const Index row = static_cast<Index>(t) * B + b;
      if (t < s.size()) {
        targets[row] = s[t];
        mask(row, 0) = 1;
      } else if (t == s.size()) {
        targets[row] = Vocabulary::kEos;
        mask(row, 0) = 1;
      } else {
        targets[row] = Vocabulary::kPad;
      }
    }
    const std::vector<Var> parts{embed_(in), z};
    tops.push_back(decoder_.step(nn::concat_cols(parts), h));
  }
  const Var logp = nn::log_softmax_rows(to_vocab_(nn::concat_rows(tops)));
  const Var picked = nn::mul(nn::pick(logp, targets), Var::constant(std::move(mask)));
  return nn::scale(nn::sum(picked), -1.0 / static_cast<double>(B));
}

Var kl_divergence(const Var& mu, const Var& logvar) {
  // 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar)
  const Var terms = nn::sub(nn::add(nn::square(mu), nn::exp(logvar)), nn::add_scalar(logvar, 1.0));
  return nn::scale(nn::sum(terms), 0.5 / static_cast<double>(mu.rows()));
}

Var VaeModel::head_forward(const std::vector<nn::Mlp>& heads, const Var& input, bool rest) const {
  std::vector<Var> cols;
  for (int t = 0; t < kAttributes; ++t) cols.push_back(heads[t](rest ? input : nn::slice_cols(input, t, 1)));
  return nn::concat_cols(cols);
}

Var VaeModel::head_loss(const Var& pred, const Mat& labels) const {
  if (labels.rows() != pred.rows() || labels.cols() != kAttributes) {
    throw std::invalid_argument("attribute labels must be batch x " + std::to_string(kAttributes));
  }
  Mat cont = Mat::Ones(pred.rows(), kAttributes), bin = Mat::Zero(pred.rows(), kAttributes);
  for (int t = 0; t < kAttributes; ++t) {
    if (attributes_[t].kind == AttributeSpec::Kind::Binary) {
      cont.col(t).setZero();
      bin.col(t).setOnes();
    }
  }
  const Var y = Var::constant(labels);
  // continuous: 0.5 (p - y)^2 ; binary: softplus(p) - y p
  const Var sq = nn::mul(nn::scale(nn::square(nn::sub(pred, y)), 0.5), Var::constant(cont));
  const Var logistic = nn::mul(nn::sub(nn::softplus(pred), nn::mul(y, pred)), Var::constant(bin));
  return nn::scale(nn::sum(nn::add(sq, logistic)), 1.0 / static_cast<double>(pred.rows()));
}

Var VaeModel::excitation_loss(const Var& z, const Mat& labels) const {
  return head_loss(head_forward(excite_, z, false), labels);
}

Var VaeModel::inhibition_loss(const Var& z, const Mat& labels, double reversal) const {
  const Var rest = nn::grad_reverse(nn::slice_cols(z, kAttributes, config_.latent_dim - kAttributes), reversal);
  return head_loss(head_forward(inhibit_, rest, true), labels);
}

LossTerms VaeModel::losses(const Batch& batch, nn::Rng& rng, double kl_weight) const {
  LossTerms L;
  const Encoded e = encode(batch.tokens, &rng);
  L.recon = reconstruction_nll(e.z, batch.tokens);
  L.kl = kl_divergence(e.mu, e.logvar);
  L.elbo = nn::add(L.recon, nn::scale(L.kl, kl_weight));
  L.excitation = excitation_loss(e.z, batch.labels);
  L.inhibition = inhibition_loss(e.z, batch.labels);
  L.backprop = nn::add(nn::add(L.elbo, L.excitation), L.inhibition);
  return L;
}

namespace {

Mat binary_to_probability(Mat pred, const std::vector<AttributeSpec>& specs) {
  for (int t = 0; t < kAttributes; ++t) {
    if (specs[t].kind == AttributeSpec::Kind::Binary) {
      pred.col(t) = (1.0 / (1.0 + (-pred.col(t).array()).exp())).matrix();
    }
  }
  return pred;
}

}  // namespace

Mat VaeModel::predict_excitation(const Mat& z) const {
  nn::NoGradGuard guard;
  return binary_to_probability(head_forward(excite_, Var::constant(z), false).value(), attributes_);
}

Mat VaeModel::predict_inhibition(const Mat& z) const {
  nn::NoGradGuard guard;
  const Var rest = Var::constant(z.rightCols(config_.latent_dim - kAttributes));
  return binary_to_probability(head_forward(inhibit_, rest, true).value(), attributes_);
}

std::vector<std::vector<int>> VaeModel::decode(const Mat& z, DecodeMode mode, nn::Rng* rng, int max_length) const {
  if (z.cols() != config_.latent_dim) throw std::invalid_argument("decode: latent width mismatch");
  if (!z.allFinite()) throw std::invalid_argument("decode: non-finite latent");
  if (mode == DecodeMode::Sample && !rng) throw std::invalid_argument("decode: sampling needs an rng");
  if (max_length < 0) max_length = config_.max_length;
  nn::NoGradGuard guard;
  const Index B = z.rows(), H = config_.hidden_dim;
  const Var zv = Var::constant(z);
  const Var init = nn::tanh(to_decoder_(zv));
  std::vector<Var> h;
  for (std::size_t l = 0; l < decoder_.layers.size(); ++l) h.push_back(nn::slice_cols(init, l * H, H));

  std::vector<std::vector<int>> out(B);
  std::vector<bool> done(B, false);
  std::vector<int> prev(B, Vocabulary::kBos);
  Index remaining = B;
  for (int t = 0; t <= max_length && remaining > 0; ++t) {
    const std::vector<Var> parts{embed_(prev), zv};
    Mat logits = to_vocab_(decoder_.step(nn::concat_cols(parts), h)).value();
    logits.col(Vocabulary::kPad).setConstant(-1e300);
    logits.col(Vocabulary::kBos).setConstant(-1e300);
    for (Index b = 0; b < B; ++b) {
      if (done[b]) {
        prev[b] = Vocabulary::kPad;
        continue;
      }
      int next = 0;
      if (mode == DecodeMode::Greedy) {
        logits.row(b).maxCoeff(&next);
      } else {
        const Eigen::RowVectorXd row = logits.row(b);
        const double m = row.maxCoeff();
        std::vector<double> w(row.size());
        for (Index k = 0; k < row.size(); ++k) w[k] = std::exp(row(k) - m);
        std::discrete_distribution<int> dist(w.begin(), w.end());
        next = dist(*rng);
      }
      if (next == Vocabulary::kEos || t == max_length) {
        done[b] = true;
        --remaining;
      } else {
        out[b].push_back(next);
      }
      prev[b] = next;
    }
  }
  return out;
}

std::vector<std::string> VaeModel::decode_smiles(const Mat& z, DecodeMode mode, nn::Rng* rng) const {
  std::vector<std::string> out;
  for (const auto& ids : decode(z, mode, rng)) out.push_back(vocab_.decode(ids));
  return out;
}

double VaeModel::reconstruction_accuracy(std::span<const std::string> smiles) const {
  if (smiles.empty()) return 0;
  nn::NoGradGuard guard;
  const Encoded e = encode_smiles(smiles, nullptr);
  const auto decoded = decode(e.mu.value(), DecodeMode::Greedy);
  std::size_t right = 0, total = 0;
  for (std::size_t i = 0; i < smiles.size(); ++i) {
    const auto target = vocab_.encode(smiles[i]);
    total += target.size() + 1;
    for (std::size_t k = 0; k <= target.size(); ++k) {
      const int want = k < target.size() ? target[k] : Vocabulary::kEos;
      const int got = k < decoded[i].size() ? decoded[i][k] : (k == decoded[i].size() ? Vocabulary::kEos : -1);
      right += want == got;
    }
  }
  return static_cast<double>(right) / static_cast<double>(total);
}

// ------------------------------------------------------------ checkpoints

namespace {

constexpr const char* kMagic = "MOLSTYLE-VAE";
constexpr int kFormatVersion = 1;

json config_to_json(const VaeConfig& c) {
  return {{"token_embed_dim", c.token_embed_dim}, {"hidden_dim", c.hidden_dim}, {"rnn_layers", c.rnn_layers},
          {"latent_dim", c.latent_dim},           {"head_hidden", c.head_hidden}, {"kl_weight", c.kl_weight},
          {"max_length", c.max_length},           {"seed", c.seed}};
}

VaeConfig config_from_json(const json& j) {
  VaeConfig c;
  c.token_embed_dim = j.at("token_embed_dim");
  c.hidden_dim = j.at("hidden_dim");
  c.rnn_layers = j.at("rnn_layers");
  c.latent_dim = j.at("latent_dim");
  c.head_hidden = j.at("head_hidden");
  c.kl_weight = j.at("kl_weight");
  c.max_length = j.at("max_length");
  c.seed = j.at("seed");
  return c;
}

}  // namespace

void VaeModel::save(const std::filesystem::path& path, const std::string& metadata_json) const {
  json header;
  header["format_version"] = kFormatVersion;
  header["config"] = config_to_json(config_);
  header["vocabulary"] = vocab_.tokens();
  json attrs = json::array();
  for (const auto& a : attributes_) {
    attrs.push_back({{"name", a.name},
                     {"kind", a.kind == AttributeSpec::Kind::Binary ? "binary" : "continuous"},
                     {"mean", a.mean},
                     {"std", a.std}});
  }
  header["attributes"] = attrs;
  header["frozen"] = frozen_;
  header["metadata"] = json::parse(metadata_json);
  header["parameter_sha1"] = params_.hash();
  const std::string text = header.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw nn::CheckpointError("cannot write checkpoint " + tmp);
    out << kMagic << '\n' << text.size() << '\n' << text;
    params_.save(out);
    if (!out) throw nn::CheckpointError("short write to checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

VaeModel VaeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw nn::CheckpointError("cannot open checkpoint " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw nn::CheckpointError(path.string() + " is not a VAE checkpoint");
  std::string len_line;
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
  std::vector<AttributeSpec> attrs;
  for (const auto& a : header.at("attributes")) {
    AttributeSpec s;
    s.name = a.at("name");
    s.kind = a.at("kind") == "binary" ? AttributeSpec::Kind::Binary : AttributeSpec::Kind::Continuous;
    s.mean = a.at("mean");
    s.std = a.at("std");
    attrs.push_back(s);
  }
  VaeModel model(config_from_json(header.at("config")),
                 Vocabulary(header.at("vocabulary").get<std::vector<std::string>>()), std::move(attrs));
  model.params_.load(in);
  if (model.params_.hash() != header.at("parameter_sha1")) throw nn::CheckpointError("checkpoint parameters corrupt");
  if (header.value("frozen", false)) model.freeze();
  return model;
}

void VaeModel::require_vocabulary(const Vocabulary& expected) const {
  if (!(vocab_ == expected)) {
    throw VocabularyMismatch("checkpoint vocabulary (" + std::to_string(vocab_.size()) +
                             " tokens) differs from the expected vocabulary (" + std::to_string(expected.size()) +
                             " tokens)");
  }
}

// ------------------------------------------------------------ pretraining

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Batches of similar length: shuffle, sort within windows of 32 batches,
// then shuffle batch order.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::vector<int>>& tokens, int batch_size,
                                                   nn::Rng& rng) {
  std::vector<std::size_t> order(tokens.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t window = static_cast<std::size_t>(batch_size) * 32;
  for (std::size_t s = 0; s < order.size(); s += window) {
    const auto e = std::min(order.size(), s + window);
    std::stable_sort(order.begin() + s, order.begin() + e,
                     [&](std::size_t a, std::size_t b) { return tokens[a].size() < tokens[b].size(); });
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t s = 0; s < order.size(); s += batch_size) {
    batches.emplace_back(order.begin() + s, order.begin() + std::min(order.size(), s + batch_size));
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

}  // namespace

VaeModel pretrain(std::span<const TrainingExample> corpus, const VaeConfig& config, const PretrainOptions& options,
                  std::vector<StepLog>* log) {
  if (corpus.empty()) throw EmptyCorpus();
  if (options.batch_size <= 0 || options.epochs < 0) throw std::invalid_argument("bad pretraining options");
  std::vector<std::string> smiles;
  std::vector<std::array<double, kAttributes>> raw;
  for (const auto& ex : corpus) {
    smiles.push_back(ex.smiles);
    raw.push_back(raw_attributes(ex.props, ex.aromatic));
  }
  VaeModel model(config, Vocabulary::build(smiles), fit_attributes(raw));
  std::vector<std::vector<int>> tokens;
  Mat labels(static_cast<Index>(corpus.size()), kAttributes);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    tokens.push_back(model.vocab().encode(smiles[i]));
    const auto n = normalize(model.attributes(), raw[i]);
    for (int t = 0; t < kAttributes; ++t) labels(static_cast<Index>(i), t) = n[t];
  }

  nn::Adam opt(model.params(), {.learning_rate = options.learning_rate, .clip_norm = options.clip_norm});
  nn::Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const long per_epoch = static_cast<long>((corpus.size() + options.batch_size - 1) / options.batch_size);
  const long total_steps = per_epoch * options.epochs;
  const double warmup = std::max(1.0, options.warmup_fraction * static_cast<double>(total_steps));

  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);
  std::ofstream csv;
  if (!options.log_path.empty()) {
    if (options.log_path.has_parent_path()) std::filesystem::create_directories(options.log_path.parent_path());
    csv.open(options.log_path);
    if (!csv) throw std::runtime_error("cannot write training log " + options.log_path.string());
    csv << "step,epoch,kl_weight,elbo,kl,excitation,inhibition,total\n";
  }

  std::string last_good_bytes = model.params().serialize();
  std::string last_good_path;
  long step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    double epoch_total = 0;
    const auto batches = make_batches(tokens, options.batch_size, rng);
    for (const auto& idx : batches) {
      Batch batch;
      batch.labels.resize(static_cast<Index>(idx.size()), kAttributes);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        batch.tokens.push_back(tokens[idx[k]]);
        batch.labels.row(static_cast<Index>(k)) = labels.row(static_cast<Index>(idx[k]));
      }
      const double klw =
          options.warmup_fraction > 0 ? config.kl_weight * std::min(1.0, static_cast<double>(step) / warmup)
                                      : config.kl_weight;
      model.params().zero_grad();
      const LossTerms L = model.losses(batch, rng, klw);
      const double total = L.total();
      if (!std::isfinite(total) || !std::isfinite(L.backprop.item())) {
        model.params().deserialize(last_good_bytes);
        throw NonFiniteLoss("non-finite loss at step " + std::to_string(step), last_good_path);
      }
      nn::backward(L.backprop);
      if (!std::isfinite(model.params().grad_norm())) {
        model.params().deserialize(last_good_bytes);
        throw NonFiniteLoss("non-finite gradient at step " + std::to_string(step), last_good_path);
      }
      model.update(opt);

      StepLog s{step, epoch, klw, L.elbo.item(), L.kl.item(), L.excitation.item(), L.inhibition.item(), total};
      if (csv.is_open()) {
        csv << s.step << ',' << s.epoch << ',' << format_double(s.kl_weight) << ',' << format_double(s.elbo) << ','
            << format_double(s.kl) << ',' << format_double(s.excitation) << ',' << format_double(s.inhibition)
            << ',' << format_double(s.total) << '\n';
      }
      if (log) log->push_back(s);
      epoch_total += total;
      ++step;
    }
    last_good_bytes = model.params().serialize();
    if (!options.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch + 1);
      const auto path = options.checkpoint_dir / name;
      model.save(path, json{{"epoch", epoch + 1}, {"step", step}}.dump());
      last_good_path = path.string();
    }
    if (options.on_epoch) options.on_epoch(epoch + 1, epoch_total / static_cast<double>(batches.size()));
  }
  model.freeze();
  return model;
}

// ------------------------------------------------------------ diagnostics

double r_squared(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size() || target.empty()) throw std::invalid_argument("r_squared: size mismatch");
  const double mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(target.size());
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ss_res += (target[i] - predicted[i]) * (target[i] - predicted[i]);
    ss_tot += (target[i] - mean) * (target[i] - mean);
  }
  return ss_tot > 0 ? 1 - ss_res / ss_tot : 0.0;
}

DisentanglementReport disentanglement(const VaeModel& model, std::span<const TrainingExample> examples) {
  DisentanglementReport rep;
  if (examples.empty()) return rep;
  nn::NoGradGuard guard;
  std::array<std::vector<double>, kAttributes> target, exc, inh;
  const std::size_t chunk = 256;
  for (std::size_t s = 0; s < examples.size(); s += chunk) {
    const auto e = std::min(examples.size(), s + chunk);
    std::vector<std::string> smiles;
    for (std::size_t i = s; i < e; ++i) smiles.push_back(examples[i].smiles);
    const Mat mu = model.encode_smiles(smiles, nullptr).mu.value();
    const Mat pe = model.predict_excitation(mu), pi = model.predict_inhibition(mu);
    for (std::size_t i = s; i < e; ++i) {
      const auto y = normalize(model.attributes(), raw_attributes(examples[i].props, examples[i].aromatic));
      for (int t = 0; t < kAttributes; ++t) {
        target[t].push_back(y[t]);
        exc[t].push_back(pe(static_cast<Index>(i - s), t));
        inh[t].push_back(pi(static_cast<Index>(i - s), t));
      }
    }
  }
  for (int t = 0; t < kAttributes; ++t) {
    rep.excitation_r2[t] = r_squared(exc[t], target[t]);
    rep.inhibition_r2[t] = r_squared(inh[t], target[t]);
  }
  return rep;
}

double prior_validity(const VaeModel& model, int samples, std::uint64_t seed) {
  if (samples <= 0) return 0;
  nn::Rng rng(seed);
  const Mat z = nn::standard_normal(samples, model.latent_dim(), rng);
  int ok = 0;
  for (const auto& s : model.decode_smiles(z, DecodeMode::Greedy)) ok += !s.empty() && smiles::read_valid(s).has_value();
  return static_cast<double>(ok) / samples;
}

}  // namespace molstyle::vae
