#include "molstyle/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "molstyle/hash.hpp"
#include "molstyle/plot.hpp"
#include "molstyle/smiles.hpp"

namespace molstyle::cli {

using nlohmann::json;
namespace fs = std::filesystem;

// ------------------------------------------------------------ config

void RunConfig::validate() const {
  try {
    metrics::TaskSpec::by_name(task);
    vae.validate();
    transfer.validate();
  } catch (const std::invalid_argument& e) {
    throw BadConfig(e.what());
  }
  if (pretrain.epochs < 1 || pretrain.batch_size < 1 || pretrain.learning_rate <= 0)
    throw BadConfig("pretrain settings must be positive");
  if (data.generator_size < 1 || data.pool_cap < 1 || data.test_count < 1)
    throw BadConfig("data sizes must be positive");
  if (data.generator_complexity_low < 0 || data.generator_complexity_high > 1 ||
      data.generator_complexity_low > data.generator_complexity_high)
    throw BadConfig("generator complexity must satisfy 0 <= low <= high <= 1");
  if (std::abs(data.train + data.dev + data.test - 1) > 1e-9 || data.train < 0 || data.dev < 0 || data.test < 0)
    throw BadConfig("split fractions must be non-negative and sum to 1");
  if (run_dir.empty()) throw BadConfig("paths.run_dir must not be empty");
}

json to_json(const RunConfig& c) {
  json t = transfer::to_json(c.transfer);
  t.erase("seed");
  return {
      {"task", c.task},
      {"seed", c.seed},
      {"vae",
       {{"token_embed_dim", c.vae.token_embed_dim},
        {"hidden_dim", c.vae.hidden_dim},
        {"rnn_layers", c.vae.rnn_layers},
        {"latent_dim", c.vae.latent_dim},
        {"head_hidden", c.vae.head_hidden},
        {"kl_weight", c.vae.kl_weight},
        {"max_length", c.vae.max_length}}},
      {"pretrain",
       {{"epochs", c.pretrain.epochs},
        {"batch_size", c.pretrain.batch_size},
        {"learning_rate", c.pretrain.learning_rate},
        {"clip_norm", c.pretrain.clip_norm},
        {"warmup_fraction", c.pretrain.warmup_fraction}}},
      {"transfer", t},
      {"data",
       {{"generator_size", c.data.generator_size},
        {"generator_seed", c.data.generator_seed},
        {"generator_complexity_low", c.data.generator_complexity_low},
        {"generator_complexity_high", c.data.generator_complexity_high},
        {"pool_cap", c.data.pool_cap},
        {"train", c.data.train},
        {"dev", c.data.dev},
        {"test", c.data.test},
        {"test_count", c.data.test_count}}},
      {"scorers", {{"sa_extra", c.scorers.sa_extra}, {"tox_extra", c.scorers.tox_extra}, {"seed", c.scorers.seed}}},
      {"paths", {{"run_dir", c.run_dir.string()}, {"input", c.input.string()}, {"output", c.output.string()}}},
  };
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw BadConfig(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end())
      throw BadConfig("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig parse(const json& j) {
  RunConfig c;
  reject_unknown(j, {"task", "seed", "vae", "pretrain", "transfer", "data", "scorers", "paths"}, "config");
  read_key(j, "task", c.task);
  read_key(j, "seed", c.seed);
  if (j.contains("vae")) {
    const auto& v = j.at("vae");
    reject_unknown(v, {"token_embed_dim", "hidden_dim", "rnn_layers", "latent_dim", "head_hidden", "kl_weight",
                       "max_length"},
                   "vae");
    read_key(v, "token_embed_dim", c.vae.token_embed_dim);
    read_key(v, "hidden_dim", c.vae.hidden_dim);
    read_key(v, "rnn_layers", c.vae.rnn_layers);
    read_key(v, "latent_dim", c.vae.latent_dim);
    read_key(v, "head_hidden", c.vae.head_hidden);
    read_key(v, "kl_weight", c.vae.kl_weight);
    read_key(v, "max_length", c.vae.max_length);
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    reject_unknown(p, {"epochs", "batch_size", "learning_rate", "clip_norm", "warmup_fraction"}, "pretrain");
    read_key(p, "epochs", c.pretrain.epochs);
    read_key(p, "batch_size", c.pretrain.batch_size);
    read_key(p, "learning_rate", c.pretrain.learning_rate);
    read_key(p, "clip_norm", c.pretrain.clip_norm);
    read_key(p, "warmup_fraction", c.pretrain.warmup_fraction);
  }
  if (j.contains("transfer")) {
    if (j.at("transfer").contains("seed")) throw BadConfig("transfer.seed is not a key; use the top-level seed");
    try {
      c.transfer = transfer::transfer_config_from_json(j.at("transfer"));
    } catch (const std::invalid_argument& e) {
      throw BadConfig(e.what());
    }
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, {"generator_size", "generator_seed", "generator_complexity_low", "generator_complexity_high",
                       "pool_cap", "train", "dev", "test", "test_count"},
                   "data");
    read_key(d, "generator_size", c.data.generator_size);
    read_key(d, "generator_seed", c.data.generator_seed);
    read_key(d, "generator_complexity_low", c.data.generator_complexity_low);
    read_key(d, "generator_complexity_high", c.data.generator_complexity_high);
    read_key(d, "pool_cap", c.data.pool_cap);
    read_key(d, "train", c.data.train);
    read_key(d, "dev", c.data.dev);
    read_key(d, "test", c.data.test);
    read_key(d, "test_count", c.data.test_count);
  }
  if (j.contains("scorers")) {
    const auto& s = j.at("scorers");
    reject_unknown(s, {"sa_extra", "tox_extra", "seed"}, "scorers");
    read_key(s, "sa_extra", c.scorers.sa_extra);
    read_key(s, "tox_extra", c.scorers.tox_extra);
    read_key(s, "seed", c.scorers.seed);
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown(p, {"run_dir", "input", "output"}, "paths");
    std::string s;
    if (p.contains("run_dir")) c.run_dir = p.at("run_dir").get<std::string>();
    if (p.contains("input")) c.input = p.at("input").get<std::string>();
    if (p.contains("output")) c.output = p.at("output").get<std::string>();
  }
  c.vae.seed = c.seed;
  c.transfer.seed = c.seed;
  return c;
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) flatten(v, key, out);
    else out.emplace_back(key, v);
  }
}

std::vector<std::pair<std::string, json>> leaves() {
  std::vector<std::pair<std::string, json>> out;
  flatten(to_json(RunConfig{}), "", out);
  return out;
}

json::json_pointer pointer_for(const std::string& key) {
  std::string p = "/" + key;
  std::replace(p.begin(), p.end(), '.', '/');
  return json::json_pointer(p);
}

// Parses a flag value with the type of the default leaf.
json typed_value(const json& like, const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    json v;
    if (like.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      v = std::stoull(text, &used);
    } else if (like.is_number_integer()) {
      v = std::stoll(text, &used);
    } else if (like.is_number_float()) {
      v = std::stod(text, &used);
    } else {
      return text;
    }
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw BadConfig("bad value '" + text + "' for " + flag_for(key));
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    c = parse(j);
  } catch (const json::exception& e) {
    throw BadConfig(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : leaves()) keys.push_back(k);
  return keys;
}

std::string flag_for(const std::string& key) {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '.', '-');
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

// ------------------------------------------------------------ helpers

namespace {

class Lock {
 public:
  explicit Lock(const fs::path& dir) : path_(dir / files::kLock) {
    fs::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) throw RunLocked("run directory is locked by " + path_.string() + "; remove it if no run is active");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~Lock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  Lock(const Lock&) = delete;
  Lock& operator=(const Lock&) = delete;

 private:
  fs::path path_;
};

struct Context {
  RunConfig config;
  std::ostream& out;
  std::ostream& err;
  std::map<std::string, std::string> inputs;  // path -> git blob hash

  fs::path in_run(const char* name) const { return config.run_dir / name; }
  fs::path input_or(const char* name) const { return config.input.empty() ? in_run(name) : config.input; }
  fs::path output_or(const char* name) const { return config.output.empty() ? in_run(name) : config.output; }

  // Records the content hash of a file this command reads.
  fs::path need(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw MissingCheckpoint(p);
    inputs[p.string()] = git_blob_hash_file(p.string());
    return p;
  }

  void write_resolved(const std::string& command) const {
    json j{{"command", command}, {"config", to_json(config)}, {"inputs", inputs}};
    std::ofstream f(config.run_dir / (command + ".resolved.json"));
    f << j.dump(2) << "\n";
  }

  metrics::Scorers scorers() const {
    const auto t0 = std::chrono::steady_clock::now();
    auto s = data::default_scorers(config.scorers);
    err << "scorers ready (sa " << s.sa_version.substr(0, 12) << ", tox " << s.tox_version.substr(0, 12) << ", "
        << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)\n";
    return s;
  }

  metrics::TaskSpec task() const { return metrics::TaskSpec::by_name(config.task); }
};

std::vector<vae::TrainingExample> examples_for(std::span<const std::string> smi) {
  std::vector<vae::TrainingExample> ex;
  ex.reserve(smi.size());
  for (const auto& s : smi) {
    const auto g = smiles::read(s);
    ex.push_back({s, chem::content_properties(g), chem::has_aromatic_ring(g)});
  }
  return ex;
}

metrics::PssScales fit_scales(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<chem::PropertyVector> props;
  for (auto pool : {a, b})
    for (const auto& s : pool) props.push_back(chem::content_properties(smiles::read(s)));
  return metrics::PssScales::fit(props);
}

vae::VaeModel load_vae(Context& ctx) {
  auto m = vae::VaeModel::load(ctx.need(ctx.in_run(files::kVae)));
  m.freeze();
  return m;
}

// First test_count source-test molecules the VAE can tokenise.
std::vector<std::string> test_inputs(Context& ctx, const vae::VaeModel& vae) {
  const auto all = data::read_smiles(ctx.need(ctx.input_or(files::kSourceTest)));
  std::vector<std::string> keep;
  std::size_t skipped = 0;
  for (const auto& s : all) {
    if (keep.size() == ctx.config.data.test_count) break;
    try {
      vae.vocab().encode(s);
      keep.push_back(s);
    } catch (const vae::OutOfVocabularyToken&) {
      ++skipped;
    }
  }
  if (skipped) ctx.err << "skipped " << skipped << " test molecules with tokens outside the VAE vocabulary\n";
  return keep;
}

// ------------------------------------------------------------ commands

int cmd_gen(Context& ctx) {
  auto gc = data::desk_generator(ctx.config.data.generator_seed);
  gc.complexity_low = ctx.config.data.generator_complexity_low;
  gc.complexity_high = ctx.config.data.generator_complexity_high;
  const auto mols = data::make_desk_corpus(gc, ctx.config.data.generator_size);
  const auto out = ctx.output_or(files::kDesk);
  data::write_smiles(mols, out);
  ctx.err << "wrote " << mols.size() << " molecules to " << out.string() << "\n";
  ctx.write_resolved("gen");
  return kOk;
}

int cmd_ingest(Context& ctx) {
  const auto input = ctx.need(ctx.input_or(files::kDesk));
  const auto scorers = ctx.scorers();
  const auto corpus = data::ingest(input, ctx.task(), scorers, &ctx.err);
  data::write_corpus(corpus, ctx.in_run(files::kCorpus));

  const auto& d = ctx.config.data;
  const auto parts = data::split(corpus.records, {d.train, d.dev, d.test, ctx.config.seed});
  const auto src = data::pool_members(parts.train, data::PoolLabel::Source, d.pool_cap, ctx.config.seed);
  const auto tgt = data::pool_members(parts.train, data::PoolLabel::Target, d.pool_cap, ctx.config.seed);
  const auto test = data::pool_members(parts.test, data::PoolLabel::Source, parts.test.size(), ctx.config.seed);
  data::write_smiles(src, ctx.in_run(files::kSourceTrain));
  data::write_smiles(tgt, ctx.in_run(files::kTargetTrain));
  data::write_smiles(test, ctx.in_run(files::kSourceTest));
  data::write_smiles(data::pool_members(parts.test, data::PoolLabel::Target, parts.test.size(), ctx.config.seed),
                     ctx.in_run(files::kTargetTest));
  ctx.err << "ingested " << corpus.records.size() << " records (" << corpus.dropped << " dropped): source "
          << corpus.count(data::PoolLabel::Source) << ", target " << corpus.count(data::PoolLabel::Target)
          << ", neither " << corpus.count(data::PoolLabel::Neither) << "\n"
          << "train pools " << src.size() << " / " << tgt.size() << ", source test " << test.size() << "\n";
  if (src.size() < d.pool_cap || tgt.size() < d.pool_cap)
    ctx.err << "warning: a train pool is below pool_cap " << d.pool_cap << "\n";
  ctx.write_resolved("ingest");
  return kOk;
}

int cmd_pretrain(Context& ctx) {
  auto smi = data::read_smiles(ctx.need(ctx.in_run(files::kSourceTrain)));
  const auto tgt = data::read_smiles(ctx.need(ctx.in_run(files::kTargetTrain)));
  smi.insert(smi.end(), tgt.begin(), tgt.end());
  const auto ex = examples_for(smi);

  vae::PretrainOptions o;
  o.epochs = ctx.config.pretrain.epochs;
  o.batch_size = ctx.config.pretrain.batch_size;
  o.learning_rate = ctx.config.pretrain.learning_rate;
  o.clip_norm = ctx.config.pretrain.clip_norm;
  o.warmup_fraction = ctx.config.pretrain.warmup_fraction;
  o.checkpoint_dir = ctx.in_run("vae_epochs");
  o.log_path = ctx.in_run("pretrain_log.csv");
  const auto t0 = std::chrono::steady_clock::now();
  o.on_epoch = [&](int epoch, double loss) {
    ctx.err << "epoch " << epoch << " loss " << loss << " ("
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)\n";
  };
  const auto model = vae::pretrain(ex, ctx.config.vae, o);
  model.save(ctx.in_run(files::kVae), to_json(ctx.config).at("vae").dump());
  ctx.err << "saved " << ctx.in_run(files::kVae).string() << " (params " << model.params().hash() << ")\n";
  ctx.write_resolved("pretrain");
  return kOk;
}

void write_train_log(const transfer::TrainLog& log, const fs::path& path) {
  std::ofstream f(path);
  f << "iteration,adversarial,penalty,fake_accuracy,grad_norm_median,style,recon,cycle,total\n";
  std::size_t g = 0;
  char buf[256];
  for (const auto& d : log.d_steps) {
    std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f,%.6f,%.6f", d.iteration, d.adversarial, d.penalty, d.fake_accuracy,
                  d.grad_norm_median);
    f << buf;
    if (g < log.g_steps.size() && log.g_steps[g].iteration == d.iteration) {
      const auto& s = log.g_steps[g++];
      std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f", s.style, s.recon, s.cycle, s.total);
      f << buf << "\n";
    } else {
      f << ",,,,\n";
    }
  }
}

int cmd_train(Context& ctx) {
  const auto vae = load_vae(ctx);
  const auto src = data::read_smiles(ctx.need(ctx.in_run(files::kSourceTrain)));
  const auto tgt = data::read_smiles(ctx.need(ctx.in_run(files::kTargetTrain)));
  const auto ps = transfer::encode_pool(vae, src);
  const auto pt = transfer::encode_pool(vae, tgt);
  ctx.err << "encoded pools " << ps.size() << " / " << pt.size() << "\n";

  transfer::TrainOptions o;
  o.checkpoint_path = ctx.in_run("transfer_periodic.ckpt");
  const auto t0 = std::chrono::steady_clock::now();
  o.on_iteration = [&](const transfer::DStepLog& d, const transfer::GStepLog* g) {
    if (!g || d.iteration % 250 != 0) return;
    ctx.err << "iter " << d.iteration << " adv " << d.adversarial << " gp " << d.penalty << " style " << g->style
            << " recon " << g->recon << " cycle " << g->cycle << " ("
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)\n";
  };
  transfer::TrainLog log;
  const auto model = transfer::train(vae, ps, pt, ctx.config.transfer, o, &log);
  model->save(ctx.in_run(files::kTransfer));
  write_train_log(log, ctx.in_run("train_log.csv"));
  ctx.err << "d updates " << log.d_updates << ", g updates " << log.g_updates << ", vae hash "
          << (log.vae_hash_before == log.vae_hash_after ? "unchanged" : "CHANGED") << "\n";
  ctx.write_resolved("train");
  return kOk;
}

struct Loaded {
  vae::VaeModel vae;
  std::unique_ptr<transfer::TransferModel> model;
  std::vector<std::string> target;
  transfer::LatentPool target_pool;
  metrics::PssScales scales;
};

Loaded load_all(Context& ctx) {
  auto vae = load_vae(ctx);
  const auto ckpt = ctx.need(ctx.in_run(files::kTransfer));
  auto model = transfer::TransferModel::load(ckpt);
  model->require_vae(vae);
  const auto src = data::read_smiles(ctx.need(ctx.in_run(files::kSourceTrain)));
  auto tgt = data::read_smiles(ctx.need(ctx.in_run(files::kTargetTrain)));
  auto pool = transfer::encode_pool(vae, tgt);
  auto scales = fit_scales(src, tgt);
  return {std::move(vae), std::move(model), std::move(tgt), std::move(pool), scales};
}

int cmd_eval(Context& ctx) {
  // Fail on missing checkpoints before paying for the scorers.
  ctx.need(ctx.in_run(files::kVae));
  ctx.need(ctx.in_run(files::kTransfer));
  auto l = load_all(ctx);
  const auto inputs = test_inputs(ctx, l.vae);
  const auto scorers = ctx.scorers();
  const auto task = ctx.task();
  const transfer::Evaluation ev{task, scorers, l.scales};
  const auto report = transfer::evaluate(inputs, l.target_pool, *l.model, l.vae, ev);
  const auto csv = ctx.output_or(files::kReport);
  metrics::write_report_csv(report, csv);
  metrics::write_summary(report, csv.parent_path() / files::kSummary);
  const double baseline = metrics::random_pairing_sr(inputs, l.target, task, scorers, l.scales, ctx.config.seed);
  json e{{"inputs", inputs.size()}, {"random_pairing_sr", baseline}, {"report", csv.string()}};
  std::ofstream(csv.parent_path() / "eval.json") << e.dump(2) << "\n";
  ctx.out << metrics::summary_text(report) << "random_pairing_sr=" << baseline << "\n";
  ctx.write_resolved("eval");
  return kOk;
}

int cmd_transfer(Context& ctx) {
  if (ctx.config.input.empty()) throw BadConfig("transfer needs --paths-input with one SMILES per line");
  ctx.need(ctx.in_run(files::kVae));
  ctx.need(ctx.in_run(files::kTransfer));
  const auto inputs = data::read_smiles(ctx.need(ctx.config.input));
  auto l = load_all(ctx);
  const auto scorers = ctx.scorers();
  const auto task = ctx.task();
  const transfer::Evaluation ev{task, scorers, l.scales};
  const auto out = ctx.output_or("transfer.csv");
  std::ofstream f(out);
  f << "input_smiles,output_smiles,prop_x,prop_y,pss,valid,qualified\n";
  std::size_t done = 0;
  char buf[128];
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    try {
      const auto r = transfer::transfer(inputs[n], l.target_pool, *l.model, l.vae, ev,
                                        chem::hash_combine(ctx.config.seed, n));
      const auto& c = r.candidates.at(static_cast<std::size_t>(std::max(r.chosen, 0)));
      const double y = c.valid ? r.prop_x - c.improvement : std::nan("");
      std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%d,%d", r.prop_x, y, c.pss, c.valid ? 1 : 0,
                    r.qualified ? 1 : 0);
      f << r.input << "," << r.output << buf << "\n";
      ++done;
    } catch (const transfer::InvalidInput& e) {
      ctx.err << "skipped " << inputs[n] << ": " << e.what() << "\n";
    }
  }
  ctx.err << "transferred " << done << " of " << inputs.size() << " molecules into " << out.string() << "\n";
  ctx.write_resolved("transfer");
  if (done == 0) throw metrics::ScoringFailure("no input molecule could be transferred");
  return kOk;
}

int cmd_props(Context& ctx) {
  if (ctx.config.input.empty()) throw BadConfig("props needs --paths-input with one SMILES per line");
  std::vector<std::string> lines;
  {
    std::ifstream in(ctx.need(ctx.config.input));
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string tok;
      if (ss >> tok && tok[0] != '#') lines.push_back(tok);
    }
  }
  const auto scorers = ctx.scorers();
  const auto scored = data::score_batch(lines, scorers);
  const auto out = ctx.output_or("props.csv");
  std::ofstream f(out);
  f << "smiles,mw,logp,hba,hbd,rot,rings,charge,tpsa,aromatic,tox,sa\n";
  std::size_t ok = 0;
  char buf[256];
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& s = scored[i];
    if (!s.ok) {
      ctx.err << "skipped line " << i + 1 << " (" << lines[i] << "): " << s.error << "\n";
      continue;
    }
    const auto& p = s.props;
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%d,%d,%d,%d,%d,%.6f,%d,%.6f,%.6f", p.mw, p.logp, p.hba, p.hbd,
                  p.rot_bonds, p.rings, p.net_charge, p.tpsa, s.aromatic ? 1 : 0, s.tox, s.sa);
    f << lines[i] << buf << "\n";
    ++ok;
  }
  ctx.write_resolved("props");
  if (ok == 0) throw data::AllInvalid();
  return kOk;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p);
  f << s;
}

int cmd_plot(Context& ctx) {
  const auto corpus = data::read_corpus(ctx.need(ctx.input_or(files::kCorpus)));
  const fs::path dir = ctx.config.output.empty() ? ctx.in_run("plots") : ctx.config.output;
  fs::create_directories(dir);
  const bool tox = ctx.task().kind == metrics::TaskKind::Toxicity;

  // Deterministic thinning keeps the SVG readable.
  const std::size_t stride = std::max<std::size_t>(1, corpus.records.size() / 4000);
  std::vector<const data::CorpusRecord*> rows;
  for (std::size_t i = 0; i < corpus.records.size(); i += stride) rows.push_back(&corpus.records[i]);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), chem::PropertyVector::kSize);
  std::vector<double> style;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto v = rows[i]->props.values();
    for (std::size_t c = 0; c < chem::PropertyVector::kSize; ++c)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v[c];
    style.push_back(tox ? rows[i]->tox : rows[i]->sa);
  }
  const std::string label = tox ? "toxicity" : "SA score";
  write_text(dir / "corpus_pca.svg",
             plot::scatter_svg(plot::pca2(x), style, "Content properties, first two principal components", label));
  std::vector<double> all_style;
  for (const auto& r : corpus.records) all_style.push_back(tox ? r.tox : r.sa);
  write_text(dir / "corpus_style.svg", plot::histogram_svg(plot::histogram(all_style, 40), "Corpus " + label));

  const auto report = ctx.in_run(files::kReport);
  if (fs::is_regular_file(report)) {
    ctx.need(report);
    const auto recs = metrics::read_report_csv(report);
    std::map<std::string, std::vector<double>> cols{{"prop_x", {}}, {"prop_y", {}}, {"imp", {}}, {"pss", {}}};
    for (const auto& r : recs) {
      cols["prop_x"].push_back(r.prop_x);
      cols["prop_y"].push_back(r.prop_y);
      if (r.valid) {
        cols["imp"].push_back(r.imp);
        cols["pss"].push_back(r.pss);
      }
    }
    for (const auto& [name, v] : cols)
      write_text(dir / ("report_" + name + ".svg"), plot::histogram_svg(plot::histogram(v, 20), "Report " + name));
  }
  ctx.err << "wrote figures to " << dir.string() << "\n";
  ctx.write_resolved("plot");
  return kOk;
}

const char* kFooter =
    "Exit codes: 0 success, 1 other error (including a locked run directory), 2 bad config,\n"
    "3 missing or mismatched artifact, 4 training aborted, 5 scoring failure.\n"
    "Config: JSON file from --config or $MOLSTYLE_CONFIG; flags override it. Unknown keys are rejected.\n"
    "Every command writes <run-dir>/<command>.resolved.json with the config and input hashes.";

}  // namespace

// ------------------------------------------------------------ entry point

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Molecular style transfer: desk corpus, guided VAE, latent adversarial transfer and evaluation",
               "molstyle"};
  app.footer(kFooter);
  app.fallthrough();
  app.require_subcommand(1, 1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (default $MOLSTYLE_CONFIG)");

  const auto defaults = leaves();
  std::map<std::string, std::string> flag_values;
  for (const auto& [key, value] : defaults) {
    app.add_option(flag_for(key), flag_values[key], key + " (default " + value.dump() + ")");
  }

  using Cmd = int (*)(Context&);
  const std::vector<std::tuple<const char*, const char*, Cmd>> commands{
      {"gen", "write a desk corpus of generated SMILES to <run-dir>/desk.smi", cmd_gen},
      {"ingest", "score a SMILES file, label pools, split and write corpus.csv plus pool files", cmd_ingest},
      {"pretrain", "train the guided VAE on the train pools into vae.ckpt", cmd_pretrain},
      {"train", "train generator, style flow and discriminator into transfer.ckpt", cmd_train},
      {"transfer", "transfer each molecule of --paths-input and write transfer.csv", cmd_transfer},
      {"eval", "transfer the held-out source molecules and write report.csv and summary.txt", cmd_eval},
      {"props", "write properties and style scores of --paths-input to props.csv", cmd_props},
      {"plot", "write SVG figures of corpus.csv (and report.csv when present)", cmd_plot},
  };
  std::map<const CLI::App*, Cmd> handlers;
  for (const auto& [name, help, fn] : commands) handlers[app.add_subcommand(name, help)] = fn;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << "run with --help for usage\n";
    return kBadConfig;
  }

  try {
    json merged = to_json(RunConfig{});
    if (config_path.empty()) {
      if (const char* env = std::getenv("MOLSTYLE_CONFIG")) config_path = env;
    }
    json file_json = json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw BadConfig("cannot read config " + config_path);
      try {
        file_json = json::parse(f);
      } catch (const json::exception& e) {
        throw BadConfig("config " + config_path + ": " + e.what());
      }
      merged = to_json(run_config_from_json(file_json));
    }
    for (const auto& [key, value] : defaults) {
      const auto* opt = app.get_option(flag_for(key));
      if (opt->count() == 0) continue;
      merged[pointer_for(key)] = typed_value(value, key, flag_values[key]);
    }
    Context ctx{run_config_from_json(merged), out, err, {}};

    const CLI::App* sub = app.get_subcommands().front();
    Lock lock(ctx.config.run_dir);
    return handlers.at(sub)(ctx);
  } catch (const BadConfig& e) {
    err << "bad config: " << e.what() << "\n";
    return kBadConfig;
  } catch (const MissingCheckpoint& e) {
    err << e.what() << "\n";
    return kMissingArtifact;
  } catch (const data::FileNotFound& e) {
    err << e.what() << "\n";
    return kMissingArtifact;
  } catch (const transfer::VaeHashMismatch& e) {
    err << e.what() << "\n";
    return kMissingArtifact;
  } catch (const vae::VocabularyMismatch& e) {
    err << e.what() << "\n";
    return kMissingArtifact;
  } catch (const transfer::NonFiniteLoss& e) {
    err << "training aborted at iteration " << e.iteration() << ": " << e.what() << "\n";
    return kTrainingAborted;
  } catch (const vae::NonFiniteLoss& e) {
    err << "training aborted: " << e.what() << "\n";
    return kTrainingAborted;
  } catch (const metrics::ScoringFailure& e) {
    err << "scoring failure: " << e.what() << "\n";
    return kScoringFailure;
  } catch (const data::AllInvalid& e) {
    err << "scoring failure: " << e.what() << "\n";
    return kScoringFailure;
  } catch (const metrics::EmptyTestSet& e) {
    err << "scoring failure: " << e.what() << "\n";
    return kScoringFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kError;
  }
}

}  // namespace molstyle::cli
