#include "molstyle/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "molstyle/data_files.hpp"
#include "molstyle/hash.hpp"
#include "molstyle/smiles.hpp"

namespace molstyle::data {

using nlohmann::json;

std::string_view to_string(PoolLabel label) {
  switch (label) {
    case PoolLabel::Source: return "source";
    case PoolLabel::Target: return "target";
    case PoolLabel::Neither: return "neither";
  }
  return "neither";
}

PoolLabel parse_pool_label(std::string_view text) {
  if (text == "source") return PoolLabel::Source;
  if (text == "target") return PoolLabel::Target;
  if (text == "neither") return PoolLabel::Neither;
  throw std::invalid_argument("unknown pool label " + std::string(text));
}

std::size_t LabeledCorpus::count(PoolLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const CorpusRecord& r) { return r.pool == label; }));
}

std::vector<std::string> LabeledCorpus::smiles_with(PoolLabel label) const {
  std::vector<std::string> out;
  for (const auto& r : records)
    if (r.pool == label) out.push_back(r.smiles);
  return out;
}

// ------------------------------------------------------------ scorers

namespace {

std::vector<std::string> reference_lines() {
  std::vector<std::string> out;
  std::istringstream in{std::string(reference_corpus())};
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line.substr(0, line.find('\t')));
  }
  return out;
}

}  // namespace

metrics::Scorers default_scorers(const ScorerOptions& options) {
  metrics::Scorers s;
  const auto ref = reference_lines();

  GeneratorConfig gen;
  gen.seed = options.seed;
  const auto extra = make_desk_corpus(gen, std::max(options.sa_extra, options.tox_extra));

  std::vector<chem::MolGraph> sa_ref;
  std::string sa_text;
  for (const auto& smi : ref) {
    sa_ref.push_back(smiles::read(smi));
    sa_text += smi + '\n';
  }
  for (std::size_t i = 0; i < options.sa_extra; ++i) {
    sa_ref.push_back(smiles::read(extra[i]));
    sa_text += extra[i] + '\n';
  }
  s.sa_table = chem::FragmentFreqTable::build(sa_ref);
  s.sa_version = sha1_hex(sa_text);

  const auto& alerts = chem::bundled_alerts();
  std::vector<chem::LabeledMolecule> tox_corpus;
  auto add = [&](const std::string& smi) {
    auto g = smiles::read(smi);
    const int label = chem::match_alerts(g, alerts).empty() ? 0 : 1;
    tox_corpus.push_back({smi, std::move(g), label});
  };
  for (const auto& smi : ref) add(smi);
  for (std::size_t i = 0; i < options.tox_extra; ++i) add(extra[i]);
  s.tox = chem::train_tox_predictor(tox_corpus);
  s.tox_version = s.tox.corpus_hash;
  return s;
}

// ------------------------------------------------------------ scoring kernels

namespace {

Scored score_one(const std::string& smi, const metrics::Scorers& scorers) {
  Scored out;
  try {
    const auto g = smiles::read_valid(smi);
    if (!g) {
      out.error = "does not parse or validate";
      return out;
    }
    out.props = chem::content_properties(*g);
    out.aromatic = chem::has_aromatic_ring(*g);
    out.tox = scorers.toxicity(*g);
    out.sa = scorers.sa(*g);
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

std::vector<Scored> score_batch(std::span<const std::string> smiles, const metrics::Scorers& scorers) {
  std::vector<Scored> out(smiles.size());
  const long n = static_cast<long>(smiles.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = score_one(smiles[static_cast<std::size_t>(i)], scorers);
  return out;
}

std::vector<Scored> score_batch_serial(std::span<const std::string> smiles, const metrics::Scorers& scorers) {
  std::vector<Scored> out;
  out.reserve(smiles.size());
  for (const auto& s : smiles) out.push_back(score_one(s, scorers));
  return out;
}

std::vector<double> pss_batch(std::span<const chem::PropertyVector> x, std::span<const chem::PropertyVector> y,
                              const metrics::PssScales& scales) {
  if (x.size() != y.size()) throw std::invalid_argument("pss_batch: length mismatch");
  std::vector<double> out(x.size());
  const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = metrics::pss(x[k], y[k], scales);
  }
  return out;
}

std::vector<double> pss_batch_serial(std::span<const chem::PropertyVector> x, std::span<const chem::PropertyVector> y,
                                     const metrics::PssScales& scales) {
  if (x.size() != y.size()) throw std::invalid_argument("pss_batch: length mismatch");
  std::vector<double> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.push_back(metrics::pss(x[i], y[i], scales));
  return out;
}

// ------------------------------------------------------------ ingestion

PoolLabel assign_pool(const metrics::TaskSpec& task, double tox, double sa) {
  const double s = task.kind == metrics::TaskKind::Toxicity ? tox : sa;
  if (task.in_source(s)) return PoolLabel::Source;
  if (task.in_target(s)) return PoolLabel::Target;
  return PoolLabel::Neither;
}

LabeledCorpus ingest_lines(std::span<const std::string> lines, const metrics::TaskSpec& task,
                           const metrics::Scorers& scorers, std::ostream* log) {
  std::vector<std::string> smi;
  std::vector<std::size_t> line_no;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::istringstream in(lines[i]);
    std::string first;
    if (!(in >> first) || first[0] == '#') continue;
    smi.push_back(first);
    line_no.push_back(i + 1);
  }
  const auto scored = score_batch(smi, scorers);
  LabeledCorpus c;
  c.task = task.name;
  c.sa_version = scorers.sa_version;
  c.tox_version = scorers.tox_version;
  for (std::size_t i = 0; i < smi.size(); ++i) {
    const auto& s = scored[i];
    if (!s.ok) {
      ++c.dropped;
      if (log) *log << "line " << line_no[i] << ": dropped " << smi[i] << ": " << s.error << '\n';
      continue;
    }
    c.records.push_back({smi[i], s.props, s.aromatic, s.tox, s.sa, assign_pool(task, s.tox, s.sa)});
  }
  if (c.records.empty()) throw AllInvalid();
  return c;
}

LabeledCorpus ingest(const std::filesystem::path& path, const metrics::TaskSpec& task, const metrics::Scorers& scorers,
                     std::ostream* log) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  auto c = ingest_lines(lines, task, scorers, log);
  c.input_hash = git_blob_hash_file(path.string());
  return c;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("bad number " + s);
  return v;
}

constexpr const char* kCorpusHeader = "smiles,mw,logp,hba,hbd,rot,rings,charge,tpsa,tox,sa,pool";

}  // namespace

void write_corpus(const LabeledCorpus& corpus, const std::filesystem::path& csv) {
  {
    std::ofstream out(csv);
    if (!out) throw std::runtime_error("cannot write corpus " + csv.string());
    out << kCorpusHeader << '\n';
    for (const auto& r : corpus.records) {
      const auto& p = r.props;
      out << r.smiles << ',' << num(p.mw) << ',' << num(p.logp) << ',' << p.hba << ',' << p.hbd << ','
          << p.rot_bonds << ',' << p.rings << ',' << p.net_charge << ',' << num(p.tpsa) << ',' << num(r.tox) << ','
          << num(r.sa) << ',' << to_string(r.pool) << '\n';
    }
  }
  json meta{{"task", corpus.task},
            {"input_hash", corpus.input_hash},
            {"sa_version", corpus.sa_version},
            {"tox_version", corpus.tox_version},
            {"records", corpus.records.size()},
            {"dropped", corpus.dropped},
            {"source", corpus.count(PoolLabel::Source)},
            {"target", corpus.count(PoolLabel::Target)},
            {"neither", corpus.count(PoolLabel::Neither)},
            {"corpus_hash", git_blob_hash_file(csv.string())}};
  std::ofstream m(csv.string() + ".meta.json");
  m << meta.dump(2) << '\n';
}

LabeledCorpus read_corpus(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw FileNotFound(csv);
  std::string line;
  std::getline(in, line);
  if (line != kCorpusHeader) throw std::runtime_error("unexpected corpus header in " + csv.string());
  LabeledCorpus c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 12) throw std::runtime_error("malformed corpus row: " + line);
    CorpusRecord r;
    r.smiles = f[0];
    r.props.mw = parse_double(f[1]);
    r.props.logp = parse_double(f[2]);
    r.props.hba = std::stoi(f[3]);
    r.props.hbd = std::stoi(f[4]);
    r.props.rot_bonds = std::stoi(f[5]);
    r.props.rings = std::stoi(f[6]);
    r.props.net_charge = std::stoi(f[7]);
    r.props.tpsa = parse_double(f[8]);
    r.tox = parse_double(f[9]);
    r.sa = parse_double(f[10]);
    r.pool = parse_pool_label(f[11]);
    if (auto g = smiles::read_valid(r.smiles)) r.aromatic = chem::has_aromatic_ring(*g);
    c.records.push_back(std::move(r));
  }
  const auto meta_path = csv.string() + ".meta.json";
  if (std::ifstream m(meta_path); m) {
    const json meta = json::parse(m);
    c.task = meta.value("task", "");
    c.input_hash = meta.value("input_hash", "");
    c.sa_version = meta.value("sa_version", "");
    c.tox_version = meta.value("tox_version", "");
    c.dropped = meta.value("dropped", std::size_t{0});
  }
  return c;
}

void write_smiles(std::span<const std::string> smiles, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : smiles) out << s << '\n';
}

std::vector<std::string> read_smiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    std::istringstream ls(line);
    std::string first;
    if (ls >> first && first[0] != '#') out.push_back(first);
  }
  return out;
}

// ------------------------------------------------------------ splits and pools

Splits split(std::span<const CorpusRecord> records, const SplitSpec& spec) {
  if (spec.train < 0 || spec.dev < 0 || spec.test < 0 || std::abs(spec.train + spec.dev + spec.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(records.size());
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train * n));
  const auto n_dev = std::min(records.size() - n_train, static_cast<std::size_t>(std::llround(spec.dev * n)));
  Splits s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_train ? s.train : i < n_train + n_dev ? s.dev : s.test;
    dst.push_back(records[order[i]]);
  }
  return s;
}

std::vector<std::string> pool_members(std::span<const CorpusRecord> records, PoolLabel label, std::size_t cap,
                                      std::uint64_t seed) {
  std::vector<std::string> all;
  for (const auto& r : records)
    if (r.pool == label) all.push_back(r.smiles);
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  if (all.size() > cap) all.resize(cap);
  return all;
}

std::vector<std::string> sample_style_instances(std::span<const std::string> pool, std::size_t k,
                                                const std::optional<std::string>& exclude, std::uint64_t seed) {
  std::vector<std::size_t> allowed;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (!exclude || pool[i] != *exclude) allowed.push_back(i);
  if (allowed.size() < k) throw PoolTooSmall(allowed.size(), k);
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, allowed.size() - 1);
    std::swap(allowed[i], allowed[pick(rng)]);
    out.push_back(pool[allowed[i]]);
  }
  return out;
}

GeneratorConfig desk_generator(std::uint64_t seed) {
  GeneratorConfig c;
  c.seed = seed;
  c.complexity_low = 0.0;
  c.complexity_high = 0.3;
  return c;
}

}  // namespace molstyle::data
