#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "corpus.hpp"
#include "molstyle/data.hpp"
#include "molstyle/hash.hpp"
#include "molstyle/smiles.hpp"

using namespace molstyle;
using namespace molstyle::data;

namespace {

// Small scorer set so the suite stays fast; the defaults use the same code.
const metrics::Scorers& scorers() {
  static const metrics::Scorers s = [] {
    ScorerOptions o;
    o.sa_extra = 1000;
    o.tox_extra = 1000;
    return default_scorers(o);
  }();
  return s;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("molstyle_data_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("pool labels follow the task thresholds") {
  const auto tox = metrics::TaskSpec::toxicity();
  CHECK(assign_pool(tox, 0.95, 9) == PoolLabel::Source);
  CHECK(assign_pool(tox, 0.5, 1) == PoolLabel::Neither);
  CHECK(assign_pool(tox, 0.01, 9) == PoolLabel::Target);
  const auto sa = metrics::TaskSpec::synthesizability();
  CHECK(assign_pool(sa, 0.99, 6.0) == PoolLabel::Source);
  CHECK(assign_pool(sa, 0.99, 2.0) == PoolLabel::Target);
  CHECK(assign_pool(sa, 0.99, 3.5) == PoolLabel::Neither);
  CHECK(assign_pool(sa, 0.99, 8.5) == PoolLabel::Neither);
  for (auto l : {PoolLabel::Source, PoolLabel::Target, PoolLabel::Neither}) CHECK(parse_pool_label(to_string(l)) == l);
  CHECK_THROWS(parse_pool_label("toxic"));
}

TEST_CASE("default scorers") {
  const auto& s = scorers();
  CHECK(s.tox.heldout_auroc >= 0.95);
  CHECK(s.sa_version.size() == 40);
  CHECK(s.tox_version.size() == 40);
  const auto g = smiles::read("CCO");
  CHECK(s.sa(g) >= 1);
  CHECK(s.sa(g) <= 10);
}

TEST_CASE("ingest drops invalid lines and recounts pools") {
  const auto dir = temp_dir("ingest");
  const auto path = dir / "in.smi";
  GeneratorConfig gc = desk_generator(3);
  const auto mols = make_desk_corpus(gc, 300);
  {
    std::ofstream out(path);
    out << "# comment\n";
    for (std::size_t i = 0; i < mols.size(); ++i) {
      out << mols[i] << (i % 7 == 0 ? " label\n" : "\n");
      if (i == 10) out << "C1CC\n";
      if (i == 20) out << "C(C)(C)(C)(C)C\n\n";
    }
  }
  std::ostringstream log;
  const auto task = metrics::TaskSpec::synthesizability();
  const auto c = ingest(path, task, scorers(), &log);
  CHECK(c.records.size() == 300);
  CHECK(c.dropped == 2);
  CHECK(log.str().find("C1CC") != std::string::npos);
  CHECK(c.input_hash == git_blob_hash_file(path.string()));

  std::size_t src = 0, tgt = 0;
  for (const auto& r : c.records) {
    const auto g = smiles::read(r.smiles);
    const double sa = chem::sa_score(g, scorers().sa_table);
    CHECK(sa == r.sa);
    src += sa >= 5 && sa <= 8;
    tgt += sa >= 0 && sa <= 2.5;
  }
  CHECK(c.count(PoolLabel::Source) == src);
  CHECK(c.count(PoolLabel::Target) == tgt);
  CHECK(c.count(PoolLabel::Source) + c.count(PoolLabel::Target) + c.count(PoolLabel::Neither) == c.records.size());

  // idempotent
  const auto again = ingest(path, task, scorers());
  write_corpus(c, dir / "a.csv");
  write_corpus(again, dir / "b.csv");
  CHECK(git_blob_hash_file((dir / "a.csv").string()) == git_blob_hash_file((dir / "b.csv").string()));

  const auto back = read_corpus(dir / "a.csv");
  REQUIRE(back.records.size() == c.records.size());
  CHECK(back.task == "synthesizability");
  CHECK(back.sa_version == c.sa_version);
  for (std::size_t i = 0; i < back.records.size(); ++i) {
    CHECK(back.records[i].smiles == c.records[i].smiles);
    CHECK(back.records[i].pool == c.records[i].pool);
    CHECK(back.records[i].props.hba == c.records[i].props.hba);
    CHECK(std::abs(back.records[i].sa - c.records[i].sa) < 1e-6);
  }

  CHECK_THROWS_AS(ingest(dir / "missing.smi", task, scorers()), FileNotFound);
  {
    std::ofstream bad(dir / "bad.smi");
    bad << "C1CC\n((\n";
  }
  CHECK_THROWS_AS(ingest(dir / "bad.smi", task, scorers()), AllInvalid);
  std::filesystem::remove_all(dir);
}

TEST_CASE("toxicity labels and middle probabilities") {
  const auto tox = metrics::TaskSpec::toxicity();
  const std::vector<std::string> lines{"CCO", "c1ccccc1[N+](=O)[O-]", "CCCCCCC"};
  const auto c = ingest_lines(lines, tox, scorers());
  for (const auto& r : c.records) CHECK(r.pool == assign_pool(tox, r.tox, r.sa));
}

TEST_CASE("OpenMP scoring kernels agree with the serial reference") {
  auto mols = make_desk_corpus(desk_generator(5), 200);
  mols.push_back("C1CC");
  const auto par = score_batch(mols, scorers());
  const auto ser = score_batch_serial(mols, scorers());
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].ok == ser[i].ok);
    CHECK(par[i].props == ser[i].props);
    CHECK(par[i].sa == ser[i].sa);
    CHECK(par[i].tox == ser[i].tox);
  }
  CHECK_FALSE(par.back().ok);

  std::vector<chem::PropertyVector> x, y;
  for (std::size_t i = 0; i + 1 < 200; ++i) {
    x.push_back(par[i].props);
    y.push_back(par[i + 1].props);
  }
  const auto scales = metrics::PssScales::fit(x);
  CHECK(pss_batch(x, y, scales) == pss_batch_serial(x, y, scales));
  CHECK_THROWS(pss_batch(x, std::span(y).subspan(1), scales));
}

TEST_CASE("splits are deterministic, disjoint and sized by fraction") {
  std::vector<CorpusRecord> records(100);
  for (int i = 0; i < 100; ++i) records[static_cast<std::size_t>(i)].smiles = "C" + std::to_string(i);
  const auto s = split(records, {});
  CHECK(s.train.size() == 85);
  CHECK(s.dev.size() == 5);
  CHECK(s.test.size() == 10);
  std::set<std::string> seen;
  for (const auto* part : {&s.train, &s.dev, &s.test})
    for (const auto& r : *part) CHECK(seen.insert(r.smiles).second);
  CHECK(seen.size() == 100);
  const auto again = split(records, {});
  for (std::size_t i = 0; i < s.train.size(); ++i) CHECK(again.train[i].smiles == s.train[i].smiles);
  SplitSpec other;
  other.seed = 2;
  CHECK(split(records, other).test[0].smiles != s.test[0].smiles);

  for (std::size_t n : {7u, 33u, 1001u}) {
    std::vector<CorpusRecord> r(n);
    const auto p = split(r, {});
    CHECK(std::abs(static_cast<double>(p.train.size()) - 0.85 * n) <= 1);
    CHECK(std::abs(static_cast<double>(p.dev.size()) - 0.05 * n) <= 1);
    CHECK(p.train.size() + p.dev.size() + p.test.size() == n);
  }
  SplitSpec bad;
  bad.test = 0.2;
  CHECK_THROWS(split(records, bad));
}

TEST_CASE("style instance sampling") {
  std::vector<std::string> pool;
  for (int i = 0; i < 10; ++i) pool.push_back("C" + std::to_string(i));
  auto whole = sample_style_instances(std::span(pool).first(4), 4, std::nullopt, 1);
  std::sort(whole.begin(), whole.end());
  CHECK(whole == std::vector<std::string>{"C0", "C1", "C2", "C3"});

  auto rest = sample_style_instances(std::span(pool).first(5), 4, std::string("C2"), 1);
  std::sort(rest.begin(), rest.end());
  CHECK(rest == std::vector<std::string>{"C0", "C1", "C3", "C4"});
  CHECK_THROWS_AS(sample_style_instances(std::span(pool).first(4), 4, std::string("C2"), 1), PoolTooSmall);

  std::vector<std::string> big;
  for (int i = 0; i < 500; ++i) big.push_back("N" + std::to_string(i));
  std::set<std::vector<std::string>> batches;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto b = sample_style_instances(big, 10, std::nullopt, seed);
    CHECK(std::set<std::string>(b.begin(), b.end()).size() == 10);
    CHECK(b == sample_style_instances(big, 10, std::nullopt, seed));
    batches.insert(b);
  }
  CHECK(batches.size() >= 99);
}

TEST_CASE("pool members are capped and seeded") {
  std::vector<CorpusRecord> r(50);
  for (int i = 0; i < 50; ++i) {
    r[static_cast<std::size_t>(i)].smiles = "C" + std::to_string(i);
    r[static_cast<std::size_t>(i)].pool = i % 2 ? PoolLabel::Source : PoolLabel::Target;
  }
  const auto a = pool_members(r, PoolLabel::Source, 10, 3);
  CHECK(a.size() == 10);
  CHECK(a == pool_members(r, PoolLabel::Source, 10, 3));
  CHECK(pool_members(r, PoolLabel::Target, 100, 3).size() == 25);
  CHECK(pool_members(r, PoolLabel::Neither, 100, 3).empty());
}

TEST_CASE("desk generator distribution audit") {
  const auto mols = make_desk_corpus(desk_generator(11), 400);
  CHECK(mols.size() == 400);
  CHECK(std::set<std::string>(mols.begin(), mols.end()).size() == 400);
  std::set<int> rings;
  bool charged = false, neutral = false;
  for (const auto& m : mols) {
    const auto g = smiles::read_valid(m);
    REQUIRE(g.has_value());
    const auto p = chem::content_properties(*g);
    rings.insert(p.rings);
    bool any_charge = false;
    for (const auto& a : g->atoms()) any_charge = any_charge || a.formal_charge != 0;
    (any_charge ? charged : neutral) = true;
  }
  CHECK(rings.size() >= 3);
  CHECK(charged);
  CHECK(neutral);
}
