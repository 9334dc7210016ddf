#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "molstyle/chem.hpp"
#include "molstyle/generator.hpp"
#include "molstyle/metrics.hpp"

namespace molstyle::data {

class FileNotFound : public std::runtime_error {
 public:
  explicit FileNotFound(const std::filesystem::path& p) : std::runtime_error("file not found: " + p.string()) {}
};

class AllInvalid : public std::runtime_error {
 public:
  AllInvalid() : std::runtime_error("no input line parsed and validated") {}
};

class PoolTooSmall : public std::invalid_argument {
 public:
  PoolTooSmall(std::size_t have, std::size_t want)
      : std::invalid_argument("style pool holds " + std::to_string(have) + " molecules, need " + std::to_string(want)) {}
};

enum class PoolLabel { Source, Target, Neither };
std::string_view to_string(PoolLabel label);
PoolLabel parse_pool_label(std::string_view text);

struct CorpusRecord {
  std::string smiles;
  chem::PropertyVector props;
  bool aromatic = false;
  double tox = 0;
  double sa = 0;
  PoolLabel pool = PoolLabel::Neither;
};

struct LabeledCorpus {
  std::vector<CorpusRecord> records;
  std::string task;
  std::string input_hash;  // git blob id of the ingested file
  std::string sa_version;
  std::string tox_version;
  std::size_t dropped = 0;

  std::size_t count(PoolLabel label) const;
  std::vector<std::string> smiles_with(PoolLabel label) const;
};

// ------------------------------------------------------------ scorers

struct ScorerOptions {
  std::size_t sa_extra = 20000;  // generated molecules added to the SA reference
  std::size_t tox_extra = 6000;  // generated molecules labelled by alert presence
  std::uint64_t seed = 99;
};

// SA table over the bundled reference corpus plus generated molecules, and a
// fingerprint toxicity surrogate trained on structural-alert labels.
metrics::Scorers default_scorers(const ScorerOptions& options = {});

// ------------------------------------------------------------ scoring kernels

struct Scored {
  chem::PropertyVector props;
  bool aromatic = false;
  double tox = 0;
  double sa = 0;
  bool ok = false;
  std::string error;  // set when !ok
};

// Parses, validates and scores every SMILES. The OpenMP kernel and the
// serial reference return identical results.
std::vector<Scored> score_batch(std::span<const std::string> smiles, const metrics::Scorers& scorers);
std::vector<Scored> score_batch_serial(std::span<const std::string> smiles, const metrics::Scorers& scorers);

// Pairwise PSS of equal-length property lists.
std::vector<double> pss_batch(std::span<const chem::PropertyVector> x, std::span<const chem::PropertyVector> y,
                              const metrics::PssScales& scales);
std::vector<double> pss_batch_serial(std::span<const chem::PropertyVector> x, std::span<const chem::PropertyVector> y,
                                     const metrics::PssScales& scales);

// ------------------------------------------------------------ ingestion

PoolLabel assign_pool(const metrics::TaskSpec& task, double tox, double sa);

// One SMILES per line, optional whitespace-separated label ignored. Invalid
// lines are dropped and reported to `log`.
LabeledCorpus ingest(const std::filesystem::path& path, const metrics::TaskSpec& task, const metrics::Scorers& scorers,
                     std::ostream* log = nullptr);
LabeledCorpus ingest_lines(std::span<const std::string> lines, const metrics::TaskSpec& task,
                           const metrics::Scorers& scorers, std::ostream* log = nullptr);

// smiles,mw,logp,hba,hbd,rot,rings,charge,tpsa,tox,sa,pool plus <path>.meta.json.
void write_corpus(const LabeledCorpus& corpus, const std::filesystem::path& csv);
LabeledCorpus read_corpus(const std::filesystem::path& csv);

void write_smiles(std::span<const std::string> smiles, const std::filesystem::path& path);
std::vector<std::string> read_smiles(const std::filesystem::path& path);

// ------------------------------------------------------------ splits and pools

struct SplitSpec {
  double train = 0.85;
  double dev = 0.05;
  double test = 0.10;
  std::uint64_t seed = 1;
};

struct Splits {
  std::vector<CorpusRecord> train, dev, test;
};

// Deterministic shuffle, then train / dev / test by rounded fractions.
Splits split(std::span<const CorpusRecord> records, const SplitSpec& spec);

// Up to `cap` pool members in a seeded order.
std::vector<std::string> pool_members(std::span<const CorpusRecord> records, PoolLabel label, std::size_t cap,
                                      std::uint64_t seed);

// K distinct pool members, never `exclude`; deterministic by seed.
std::vector<std::string> sample_style_instances(std::span<const std::string> pool, std::size_t k,
                                                const std::optional<std::string>& exclude, std::uint64_t seed);

// Desk generator settings for the synthetic SA task.
GeneratorConfig desk_generator(std::uint64_t seed = 7);

}  // namespace molstyle::data
