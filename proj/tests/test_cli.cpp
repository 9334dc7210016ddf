#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "molstyle/cli.hpp"
#include "molstyle/hash.hpp"

using namespace molstyle;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "molstyle");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("molstyle_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::size_t line_count(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string l; std::getline(f, l);) ++n;
  return n;
}

// Small enough for a unit test run; same code paths as the desk defaults.
void write_tiny_config(const fs::path& path, const fs::path& run_dir) {
  nlohmann::json j = {
      {"seed", 3},
      {"vae", {{"token_embed_dim", 8}, {"hidden_dim", 16}, {"rnn_layers", 1}, {"latent_dim", 12}, {"head_hidden", 8}}},
      {"pretrain", {{"epochs", 1}}},
      {"transfer",
       {{"instances", 4},
        {"iterations", 12},
        {"batch_size", 6},
        {"g_hidden", 16},
        {"d_hidden", 16},
        {"decode_count", 2},
        {"flow", {{"steps", 2}, {"hidden", 12}, {"context_dim", 4}}}}},
      {"data", {{"generator_size", 2500}, {"pool_cap", 150}, {"test_count", 6}}},
      {"scorers", {{"sa_extra", 300}, {"tox_extra", 300}}},
      {"paths", {{"run_dir", run_dir.string()}}},
  };
  std::ofstream(path) << j.dump(2);
}

}  // namespace

TEST_CASE("config json round trip and strictness") {
  cli::RunConfig c;
  c.seed = 17;
  c.transfer.disc_ratio = 3;
  c.transfer.flow.steps = 4;
  c.data.pool_cap = 99;
  c.run_dir = "somewhere";
  const auto back = cli::run_config_from_json(cli::to_json(c));
  CHECK(cli::to_json(back) == cli::to_json(c));
  CHECK(back.transfer.seed == 17);
  CHECK(back.vae.seed == 17);

  auto j = cli::to_json(c);
  j["vae"]["hiden_dim"] = 3;
  CHECK_THROWS_AS(cli::run_config_from_json(j), cli::BadConfig);
  j = cli::to_json(c);
  j["transfer"]["flow"]["depth"] = 3;
  CHECK_THROWS_AS(cli::run_config_from_json(j), cli::BadConfig);
  j = cli::to_json(c);
  j["transfer"]["seed"] = 3;
  CHECK_THROWS_AS(cli::run_config_from_json(j), cli::BadConfig);
  j = cli::to_json(c);
  j["data"]["train"] = 0.9;
  CHECK_THROWS_AS(cli::run_config_from_json(j), cli::BadConfig);
  j = cli::to_json(c);
  j["vae"]["latent_dim"] = "wide";
  CHECK_THROWS_AS(cli::run_config_from_json(j), cli::BadConfig);
  j = cli::to_json(c);
  j["task"] = "solubility";
  CHECK_THROWS_AS(cli::run_config_from_json(j), cli::BadConfig);

  CHECK(cli::flag_for("transfer.g_optim.learning_rate") == "--transfer-g-optim-learning-rate");
}

TEST_CASE("help enumerates every config flag and the exit codes") {
  const auto r = invoke({"--help"});
  CHECK(r.code == 0);
  for (const auto& key : cli::config_keys()) {
    INFO(key);
    CHECK(r.out.find(cli::flag_for(key)) != std::string::npos);
  }
  for (const char* cmd : {"gen", "ingest", "pretrain", "train", "transfer", "eval", "props", "plot"})
    CHECK(r.out.find(cmd) != std::string::npos);
  CHECK(r.out.find("MOLSTYLE_CONFIG") != std::string::npos);
  CHECK(r.out.find("4 training aborted") != std::string::npos);
}

TEST_CASE("argument and config errors map to exit code 2") {
  const auto dir = fresh("badcfg");
  CHECK(invoke({"gen", "--no-such-flag", "1"}).code == cli::kBadConfig);
  CHECK(invoke({}).code == cli::kBadConfig);
  CHECK(invoke({"gen", "--seed", "abc", "--paths-run-dir", dir.string()}).code == cli::kBadConfig);
  CHECK(invoke({"gen", "--data-generator-size", "-4", "--paths-run-dir", dir.string()}).code == cli::kBadConfig);
  std::ofstream(dir / "bad.json") << R"({"vae": {"hidden": 3}})";
  const auto r = invoke({"gen", "--config", (dir / "bad.json").string()});
  CHECK(r.code == cli::kBadConfig);
  CHECK(r.err.find("hidden") != std::string::npos);
  std::ofstream(dir / "broken.json") << "{";
  CHECK(invoke({"gen", "--config", (dir / "broken.json").string()}).code == cli::kBadConfig);
  CHECK(invoke({"gen", "--config", (dir / "absent.json").string()}).code == cli::kBadConfig);
}

TEST_CASE("missing artifacts map to exit code 3") {
  const auto dir = fresh("missing");
  const auto r = invoke({"eval", "--paths-run-dir", dir.string()});
  CHECK(r.code == cli::kMissingArtifact);
  CHECK(r.err.find("vae.ckpt") != std::string::npos);
  CHECK(invoke({"train", "--paths-run-dir", dir.string()}).code == cli::kMissingArtifact);
  CHECK(invoke({"ingest", "--paths-run-dir", dir.string()}).code == cli::kMissingArtifact);
  CHECK_FALSE(fs::exists(dir / cli::files::kLock));
}

TEST_CASE("a held lock refuses a second run") {
  const auto dir = fresh("lock");
  std::ofstream(dir / cli::files::kLock) << "1\n";
  const auto r = invoke({"gen", "--paths-run-dir", dir.string(), "--data-generator-size", "5"});
  CHECK(r.code == cli::kError);
  CHECK(r.err.find("locked") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / cli::files::kDesk));
}

TEST_CASE("config path from the environment, flags override it") {
  const auto dir = fresh("env");
  std::ofstream(dir / "cfg.json") << nlohmann::json{{"data", {{"generator_size", 7}}},
                                                    {"paths", {{"run_dir", dir.string()}}}}
                                         .dump();
  ::setenv("MOLSTYLE_CONFIG", (dir / "cfg.json").c_str(), 1);
  CHECK(invoke({"gen"}).code == 0);
  CHECK(line_count(dir / cli::files::kDesk) == 7);
  CHECK(invoke({"gen", "--data-generator-size", "4"}).code == 0);
  CHECK(line_count(dir / cli::files::kDesk) == 4);
  ::unsetenv("MOLSTYLE_CONFIG");
  const auto resolved = nlohmann::json::parse(slurp(dir / "gen.resolved.json"));
  CHECK(resolved["config"]["data"]["generator_size"] == 4);
}

TEST_CASE("props writes one row per valid line") {
  const auto dir = fresh("props");
  std::ofstream(dir / "in.smi") << "CCO\nc1ccccc1O ethanol-like\nCC(=O)[O-]\n";
  const auto r = invoke({"props", "--paths-run-dir", dir.string(), "--paths-input", (dir / "in.smi").string(),
                      "--scorers-sa-extra", "200", "--scorers-tox-extra", "200"});
  REQUIRE(r.code == 0);
  CHECK(line_count(dir / "props.csv") == 4);
  CHECK(slurp(dir / "props.csv").rfind("smiles,mw,logp", 0) == 0);

  std::ofstream(dir / "bad.smi") << "C1CC\n";
  CHECK(invoke({"props", "--paths-run-dir", dir.string(), "--paths-input", (dir / "bad.smi").string(),
             "--scorers-sa-extra", "200", "--scorers-tox-extra", "200"})
            .code == cli::kScoringFailure);
}

TEST_CASE("end-to-end pipeline on a tiny configuration") {
  const auto dir = fresh("pipeline");
  const auto cfg = (dir / "cfg.json").string();
  write_tiny_config(cfg, dir / "run");
  const auto run = dir / "run";

  for (const char* cmd : {"gen", "ingest", "pretrain", "train"}) {
    const auto r = invoke({cmd, "--config", cfg});
    INFO(cmd << ": " << r.err);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(run / (std::string(cmd) + ".resolved.json")));
  }
  const auto ingest = nlohmann::json::parse(slurp(run / "ingest.resolved.json"));
  const auto desk = (run / cli::files::kDesk).string();
  CHECK(ingest["inputs"][desk] == git_blob_hash_file(desk));

  const auto first = invoke({"eval", "--config", cfg});
  INFO(first.err);
  REQUIRE(first.code == 0);
  CHECK(first.out.find("sr=") != std::string::npos);
  CHECK(line_count(run / cli::files::kReport) == 7);
  CHECK(fs::exists(run / cli::files::kSummary));

  const auto second = invoke({"eval", "--config", cfg, "--paths-output", (dir / "again.csv").string()});
  REQUIRE(second.code == 0);
  CHECK(slurp(run / cli::files::kReport) == slurp(dir / "again.csv"));

  std::ofstream(dir / "few.smi") << data::read_smiles(run / cli::files::kSourceTest).at(0) << "\nC1CC\n";
  const auto t = invoke({"transfer", "--config", cfg, "--paths-input", (dir / "few.smi").string()});
  CHECK(t.code == 0);
  CHECK(line_count(run / "transfer.csv") == 2);

  REQUIRE(invoke({"plot", "--config", cfg}).code == 0);
  CHECK(slurp(run / "plots" / "corpus_pca.svg").rfind("<svg", 0) == 0);
  CHECK(fs::exists(run / "plots" / "report_pss.svg"));

  // A transfer checkpoint bound to another VAE is refused.
  REQUIRE(invoke({"pretrain", "--config", cfg, "--seed", "4"}).code == 0);
  CHECK(invoke({"eval", "--config", cfg, "--seed", "4"}).code == cli::kMissingArtifact);

  CHECK(invoke({"train", "--config", cfg, "--transfer-g-optim-learning-rate", "1e300", "--transfer-d-optim-learning-rate",
             "1e300", "--seed", "4"})
            .code == cli::kTrainingAborted);
  fs::remove_all(dir);
}
