#pragma once
// Command-line front end. Every stage reads and writes one run directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "molstyle/data.hpp"
#include "molstyle/guidedvae.hpp"
#include "molstyle/transfer.hpp"

namespace molstyle::cli {

enum ExitCode : int {
  kOk = 0,
  kError = 1,  // anything not listed below, including a locked run directory
  kBadConfig = 2,
  kMissingArtifact = 3,
  kTrainingAborted = 4,
  kScoringFailure = 5,
};

class BadConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MissingCheckpoint : public std::runtime_error {
 public:
  explicit MissingCheckpoint(const std::filesystem::path& p)
      : std::runtime_error("missing artifact: " + p.string()) {}
};

class RunLocked : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PretrainSettings {
  int epochs = 12;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  double warmup_fraction = 0.1;
};

struct DataSettings {
  std::size_t generator_size = 64000;
  std::uint64_t generator_seed = 7;
  double generator_complexity_low = 0.0;
  double generator_complexity_high = 0.3;
  std::size_t pool_cap = 5000;
  double train = 0.85, dev = 0.05, test = 0.10;
  std::size_t test_count = 100;
};

struct RunConfig {
  std::string task = "synthesizability";
  std::uint64_t seed = 1;  // VAE init, split, pool order and transfer
  vae::VaeConfig vae = vae::VaeConfig::desk();
  PretrainSettings pretrain;
  transfer::TransferConfig transfer;
  DataSettings data;
  data::ScorerOptions scorers;
  std::filesystem::path run_dir = "run";
  std::filesystem::path input;  // command-specific default when empty
  std::filesystem::path output;

  void validate() const;  // throws BadConfig
};

nlohmann::json to_json(const RunConfig& c);
// Missing keys keep defaults; unknown keys and bad values throw BadConfig.
RunConfig run_config_from_json(const nlohmann::json& j);

// Leaf key paths of the config ("transfer.g_optim.learning_rate") and the
// flag each maps to ("--transfer-g-optim-learning-rate").
std::vector<std::string> config_keys();
std::string flag_for(const std::string& key);

// File names inside the run directory.
namespace files {
inline constexpr const char* kDesk = "desk.smi";
inline constexpr const char* kCorpus = "corpus.csv";
inline constexpr const char* kSourceTrain = "source_train.smi";
inline constexpr const char* kTargetTrain = "target_train.smi";
inline constexpr const char* kSourceTest = "source_test.smi";
inline constexpr const char* kTargetTest = "target_test.smi";
inline constexpr const char* kVae = "vae.ckpt";
inline constexpr const char* kTransfer = "transfer.ckpt";
inline constexpr const char* kReport = "report.csv";
inline constexpr const char* kSummary = "summary.txt";
inline constexpr const char* kLock = ".lock";
}  // namespace files

// Entry point; returns the process exit status. Logs go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace molstyle::cli
