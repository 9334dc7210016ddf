#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "molstyle/smiles.hpp"
#include "corpus.hpp"
#include "oracles.hpp"

using namespace molstyle::smiles;

namespace {

std::vector<std::string> texts(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

SmilesErrorKind parse_error(const std::string& s) {
  try {
    read(s);
  } catch (const SmilesError& e) {
    return e.kind();
  }
  FAIL("expected a parse error for " << s);
  return SmilesErrorKind::EmptyInput;
}

std::vector<std::string> corpus_lines() { return testdata::reference_smiles(); }

}  // namespace

TEST_CASE("tokenize splits atoms, brackets and two-letter halogens") {
  CHECK(texts(tokenize("c1ccccc1")) == std::vector<std::string>{"c", "1", "c", "c", "c", "c", "c", "1"});
  CHECK(texts(tokenize("CC(=O)[O-]")) == std::vector<std::string>{"C", "C", "(", "=", "O", ")", "[O-]"});
  CHECK(texts(tokenize("CCl")) == std::vector<std::string>{"C", "Cl"});
  const auto toks = tokenize("CC(=O)[O-]");
  CHECK(toks[6].kind == TokenKind::BracketAtom);
  CHECK(toks[3].kind == TokenKind::Bond);
  CHECK(tokenize("C%12CC%12")[1].text == "%12");
}

TEST_CASE("tokenize errors") {
  CHECK_THROWS_AS(tokenize(""), SmilesError);
  try {
    tokenize("CC$C");
    FAIL("expected error");
  } catch (const SmilesError& e) {
    CHECK(e.kind() == SmilesErrorKind::UnknownCharacter);
    CHECK(e.position() == 2);
  }
}

TEST_CASE("tokenizer is a partition of the input") {
  for (const auto& s : corpus_lines()) {
    std::string joined;
    std::size_t expected_pos = 0;
    for (const auto& t : tokenize(s)) {
      CHECK(t.position == expected_pos);
      expected_pos += t.text.size();
      joined += t.text;
      if (t.kind == TokenKind::BracketAtom) {
        CHECK(t.text.front() == '[');
        CHECK(t.text.back() == ']');
      }
    }
    CHECK(joined == s);
  }
}

TEST_CASE("parse benzene and structural errors") {
  const auto g = parse(tokenize("c1ccccc1"));
  CHECK(g.atom_count() == 6);
  CHECK(g.bond_count() == 6);
  for (const auto& b : g.bonds()) CHECK(b.order == BondOrder::Aromatic);

  CHECK(parse_error("C1CC") == SmilesErrorKind::UnclosedRingBond);
  try {
    read("C1CC");
  } catch (const SmilesError& e) {
    CHECK(e.detail() == "1");
  }
  CHECK(parse_error("C(C") == SmilesErrorKind::UnbalancedBranch);
  CHECK(parse_error("CC)") == SmilesErrorKind::UnbalancedBranch);
  CHECK(parse_error("CC=") == SmilesErrorKind::DanglingBond);
  CHECK(parse_error("=CC") == SmilesErrorKind::DanglingBond);
  CHECK(parse_error("C=(C)") == SmilesErrorKind::UnbalancedBranch);
  CHECK(parse_error("[Xx]") == SmilesErrorKind::InvalidBracketAtom);
}

TEST_CASE("parse handles %nn closures, dots, stereo and biaryl links") {
  auto g = read("C%10CCCCC%10");
  CHECK(g.atom_count() == 6);
  CHECK(g.bond_count() == 6);

  g = read("CC(=O)[O-].[Na+]");
  CHECK(g.component_count() == 2);
  CHECK(g.atoms().back().formal_charge == 1);

  g = read("F/C=C\\F");
  CHECK(g.bond_count() == 3);
  g = read("N[C@@H](C)C(=O)O");
  CHECK(g.atoms()[1].total_h() == 1);

  // implicit link between two aromatic rings is a single bond
  g = read("c1ccccc1c1ccccc1");
  int singles = 0;
  for (const auto& b : g.bonds()) singles += b.order == BondOrder::Single;
  CHECK(singles == 1);
}

TEST_CASE("implicit hydrogens") {
  CHECK(read("C").atoms()[0].total_h() == 4);
  CHECK(read("O").atoms()[0].total_h() == 2);
  const auto nh4 = read("[NH4+]");
  CHECK(nh4.atoms()[0].total_h() == 4);
  CHECK(nh4.atoms()[0].formal_charge == 1);
  CHECK(nh4.atoms()[0].implicit_h == 0);

  const auto benzene = read("c1ccccc1");
  for (const auto& a : benzene.atoms()) CHECK(a.total_h() == 1);
  const auto pyridine = read("c1ccncc1");
  CHECK(pyridine.atoms()[3].total_h() == 0);
  const auto naphthalene = read("c1ccc2ccccc2c1");
  int h = 0;
  for (const auto& a : naphthalene.atoms()) h += a.total_h();
  CHECK(h == 8);
  CHECK(read("CS(C)=O").atoms()[1].total_h() == 0);
  CHECK(read("CP").atoms()[1].total_h() == 2);
}

TEST_CASE("validate") {
  CHECK(validate(read("c1ccccc1")).valid());
  const auto penta = validate(read("C(C)(C)(C)(C)C"));
  CHECK_FALSE(penta.valid());
  REQUIRE(penta.failures.size() == 1);
  CHECK(penta.failures[0].atom == 0);
  CHECK(penta.failures[0].reason == ValidityReason::ValenceExceeded);
  CHECK(validate(read("[NH4+]")).valid());

  for (const char* ok : {"c1cc[nH]c1", "c1ccoc1", "c1ccsc1", "Cn1cnc2c1c(=O)n(C)c(=O)n2C", "O=c1cccc[nH]1",
                         "[O-][n+]1ccccc1", "c1ccc2[nH]ccc2c1", "C[N+](=O)[O-]", "CS(=O)(=O)N", "c1cc[se]c1"}) {
    CAPTURE(ok);
    CHECK(validate(read(ok)).valid());
  }
  // five aromatic carbons cannot carry alternating double bonds
  CHECK_FALSE(validate(read("c1cccc1")).valid());
  CHECK_FALSE(validate(read("c1ccccc1:C")).valid());
  CHECK_FALSE(validate(read("[O+2]")).valid());
  CHECK_FALSE(validate(read("C=N(=C)C")).valid());
  CHECK_FALSE(validate(read("FF(F)")).valid());
}

TEST_CASE("validity is invariant under atom relabeling") {
  std::mt19937_64 rng(7);
  for (const char* s : {"c1ccccc1O", "C(C)(C)(C)(C)C", "Cn1cnc2c1c(=O)n(C)c(=O)n2C", "c1cccc1", "[NH3+]CC(=O)[O-]"}) {
    const auto g = read(s);
    const bool expected = validate(g).valid();
    for (int rep = 0; rep < 10; ++rep) {
      const auto p = oracle::random_permutation(static_cast<int>(g.atom_count()), rng);
      CHECK(validate(g.permuted(p)).valid() == expected);
    }
  }
}

TEST_CASE("writer is deterministic and round-trips") {
  CHECK(write(read("C")) == "C");
  CHECK(write(read("OCC")) == write(read("CCO")));
  const auto benzene = read("c1ccccc1");
  const auto text = write(benzene);
  CHECK(oracle::isomorphic(read(text), benzene));

  std::mt19937_64 rng(11);
  for (const auto& s : corpus_lines()) {
    CAPTURE(s);
    const auto g = read(s);
    const auto out = write(g);
    const auto back = read(out);
    CHECK(oracle::isomorphic(back, g));
    // permuted input gives an isomorphic (though possibly different) string
    const auto p = oracle::random_permutation(static_cast<int>(g.atom_count()), rng);
    CHECK(oracle::isomorphic(read(write(g.permuted(p))), g));
  }
}

TEST_CASE("parser rejects exactly unbalanced branches and unclosed rings in a mutated corpus") {
  std::mt19937_64 rng(3);
  int rejected = 0, accepted = 0;
  for (const auto& s : corpus_lines()) {
    for (int rep = 0; rep < 3; ++rep) {
      std::string m = s;
      std::vector<std::size_t> sites;
      // candidate mutation sites: parentheses and ring digits outside brackets
      int depth = 0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] == '[') ++depth;
        if (m[i] == ']') --depth;
        if (depth == 0 && (m[i] == '(' || m[i] == ')' || std::isdigit(static_cast<unsigned char>(m[i])))) {
          sites.push_back(i);
        }
      }
      const int action = static_cast<int>(rng() % 3);
      if (action == 0 && !sites.empty()) {
        const auto at = sites[rng() % sites.size()];
        std::size_t len = 1;
        if (std::isdigit(static_cast<unsigned char>(m[at])) && at >= 1 && m[at - 1] == '%') continue;
        m.erase(at, len);
      } else if (action == 1) {
        // open a fresh ring label after the first atom
        if (m.find('9') != std::string::npos || m[0] == '[') continue;
        const std::size_t at = (m.size() > 1 && (m.substr(0, 2) == "Cl" || m.substr(0, 2) == "Br")) ? 2 : 1;
        m.insert(at, "9");
      }
      // oracle: parenthesis balance outside brackets and ring-label parity
      bool balanced = true;
      int open = 0;
      depth = 0;
      std::map<std::string, int> labels;
      for (std::size_t i = 0; i < m.size(); ++i) {
        const char c = m[i];
        if (c == '[') ++depth;
        if (c == ']') --depth;
        if (depth > 0) continue;
        if (c == '(') ++open;
        if (c == ')' && --open < 0) balanced = false;
        if (c == '%' && i + 2 < m.size()) {
          ++labels[m.substr(i, 3)];
          i += 2;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
          ++labels[std::string(1, c)];
        }
      }
      balanced = balanced && open == 0;
      bool rings_closed = true;
      for (const auto& [label, count] : labels) rings_closed = rings_closed && count % 2 == 0;
      const bool expect_ok = balanced && rings_closed;

      bool ok = true;
      try {
        read(m);
      } catch (const SmilesError& e) {
        ok = false;
        CAPTURE(m);
        CHECK((e.kind() == SmilesErrorKind::UnbalancedBranch || e.kind() == SmilesErrorKind::UnclosedRingBond ||
               e.kind() == SmilesErrorKind::RingBondConflict));
      }
      CAPTURE(m);
      if (expect_ok) {
        // a re-paired ring label may land on an already bonded pair
        if (!ok) continue;
        ++accepted;
      } else {
        CHECK_FALSE(ok);
        ++rejected;
      }
    }
  }
  CHECK(rejected > 50);
  CHECK(accepted > 50);
}
