#include "molstyle/generator.hpp"

#include <algorithm>
#include <random>
#include <span>
#include <stdexcept>
#include <unordered_set>

#include "molstyle/chem.hpp"
#include "molstyle/smiles.hpp"

namespace molstyle::data {
namespace {

using smiles::BondOrder;
using smiles::MolGraph;

struct Fragment {
  const char* smiles;
  int tier;  // 0 common, 1 medium, 2 exotic
};

// Ring systems; any atom with an implicit hydrogen is an attachment point.
constexpr Fragment kRings[] = {
    {"c1ccccc1", 0},
    {"c1ccccc1", 0},
    {"C1CCCCC1", 0},
    {"c1ccncc1", 0},
    {"C1CCNCC1", 0},
    {"C1CCOCC1", 0},
    {"C1CCCC1", 0},
    {"C1CCNC1", 1},
    {"c1ccoc1", 1},
    {"c1ccsc1", 1},
    {"c1cc[nH]c1", 1},
    {"c1cncnc1", 1},
    {"c1cn[nH]c1", 1},
    {"C1CC1", 1},
    {"O=C1CCCN1", 1},
    {"c1ccc2ccccc2c1", 1},
    {"c1ccc2[nH]ccc2c1", 1},
    {"c1ccc2occc2c1", 1},
    {"C1CN(C)CCN1", 1},
    {"C1CC2CCC1C2", 2},
    {"C1C2CC3CC1CC(C2)C3", 2},
    {"C1CCC2(CC1)CCCC2", 2},
    {"C1CCC2CCCCC2C1", 2},
    {"C1CCCCCCCCCCC1", 2},
    {"C1CCCCCCCCC1", 2},
    {"c1ccc2cc3ccccc3cc2c1", 2},
    {"C1CCC2C(C1)CCC1CCCCC12", 2},
    {"C12CC3CC(C1)CC(C3)C2", 2},
    {"C1CC2CC1C2", 2},
    {"C1CCC2(C1)OCCO2", 2},
    {"c1cc2ccc3cccc4ccc(c1)c2c34", 2},
};

// Terminal groups attached through their first atom.
constexpr Fragment kSubstituents[] = {
    {"C", 0},
    {"C", 0},
    {"CC", 0},
    {"O", 0},
    {"N", 0},
    {"F", 0},
    {"Cl", 0},
    {"C(=O)O", 0},
    {"C(=O)N", 0},
    {"OC", 0},
    {"C(C)C", 0},
    {"C#N", 0},
    {"C(=O)C", 0},
    {"C(F)(F)F", 1},
    {"S(=O)(=O)N", 1},
    {"NC(=O)C", 1},
    {"OCC", 1},
    {"C(=O)OC", 1},
    {"Br", 1},
    {"N(C)C", 1},
    {"C=C", 1},
    {"CCO", 1},
    {"SC", 1},
    {"C(=O)[O-]", 2},
    {"[NH3+]", 2},
    {"[N+](C)(C)C", 2},
    {"P(=O)(O)O", 2},
    {"[Si](C)(C)C", 2},
    {"C#C", 2},
    {"I", 2},
    {"N=[N+]=[N-]", 2},
    {"[Se]C", 2},
    {"B(O)O", 2},
    {"OO", 2},
    {"C(C)(C)C(C)(C)C", 2},
    {"S(=O)(=O)[O-]", 2},
};

// Chains joining two ring fragments through their first atom and `tail`.
struct Linker {
  const char* smiles;
  int tier;
  int tail;
};
constexpr Linker kLinkers[] = {
    {"C", 0, 0},
    {"CC", 0, 1},
    {"O", 0, 0},
    {"N", 0, 0},
    {"C(=O)N", 0, 2},
    {"CCC", 0, 2},
    {"C(=O)O", 0, 2},
    {"OCC", 1, 2},
    {"S", 1, 0},
    {"C=C", 1, 1},
    {"CNC", 1, 2},
    {"CC(=O)", 1, 1},
    {"NC(=O)N", 1, 3},
    {"C#C", 2, 1},
    {"S(=O)(=O)", 2, 0},
    {"[Si](C)(C)", 2, 0},
    {"CC(C)(C)C", 2, 4},
    {"OC(=O)O", 2, 3},
    {"[N+](C)(C)", 2, 0},
};

// Structural-alert groups, attached through their first atom. The flag
// marks groups whose alert needs an aromatic attachment point.
struct AlertGroup {
  const char* smiles;
  bool aromatic_anchor;
};
constexpr AlertGroup kAlertGroups[] = {
    {"[N+](=O)[O-]", true},
    {"N", true},
    {"N=Nc1ccccc1", true},
    {"C1OC1", false},
    {"C1NC1", false},
    {"CCl", false},
    {"CBr", false},
    {"CI", false},
    {"C(=O)Cl", false},
    {"N=O", false},
    {"C1=CC(=O)C=CC1=O", false},
    {"c1cc[n+]([O-])cc1", false},
};

class Assembler {
 public:
  Assembler(std::uint64_t seed, const GeneratorConfig& config) : rng_(seed), cfg_(config) {
    std::uniform_real_distribution<double> u(config.complexity_low, config.complexity_high);
    complexity_ = u(rng_);
  }

  std::optional<MolGraph> build() {
    MolGraph g = fragment(pick(kRings));
    std::bernoulli_distribution extra_ring(0.2 + 0.5 * complexity_);
    for (int r = 1; r < cfg_.max_rings && extra_ring(rng_); ++r) {
      if (std::bernoulli_distribution(0.3)(rng_)) {
        if (!attach(g, fragment(pick(kRings)), SiteChoice::Any)) return std::nullopt;
      } else {
        const auto& spec = pick(kLinkers);
        MolGraph linker = smiles::read(spec.smiles);
        const int tail = spec.tail;
        MolGraph ring = fragment(pick(kRings));
        const auto site = attachable(ring);
        if (site.empty()) return std::nullopt;
        join(linker, tail, std::move(ring), site[pick_index(site.size())]);
        if (!attach_at(g, std::move(linker), 0)) return std::nullopt;
      }
    }
    std::uniform_int_distribution<int> n_subst(0, complexity_ < 0.3 ? 2 : 3);
    for (int s = n_subst(rng_); s > 0; --s) {
      if (!attach(g, fragment(pick(kSubstituents)), SiteChoice::First)) break;
    }
    if (std::bernoulli_distribution(0.6 * complexity_)(rng_)) swap_heteroatom(g);
    if (std::bernoulli_distribution(cfg_.alert_rate)(rng_)) {
      const auto& alert = kAlertGroups[pick_index(std::size(kAlertGroups))];
      // no aromatic anchor available: leave the molecule alert-free
      attach(g, smiles::read(alert.smiles), SiteChoice::First, alert.aromatic_anchor);
    }
    smiles::assign_implicit_hydrogens(g);
    g.label_components();
    if (chem::heavy_atom_count(g) > cfg_.max_heavy_atoms) return std::nullopt;
    if (!smiles::validate(g).valid()) return std::nullopt;
    return g;
  }

 private:
  std::size_t pick_index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  enum class SiteChoice { First, Any };

  template <typename T, std::size_t N>
  const T& pick(const T (&options)[N]) {
    std::vector<double> w(N);
    for (std::size_t i = 0; i < N; ++i) {
      const int t = options[i].tier;
      w[i] = t == 0 ? 1.0 : t == 1 ? 0.05 + 0.6 * complexity_ : 0.002 + 1.5 * complexity_ * complexity_;
    }
    std::discrete_distribution<std::size_t> d(w.begin(), w.end());
    return options[d(rng_)];
  }

  static MolGraph fragment(const Fragment& f) { return smiles::read(f.smiles); }

  // Atoms that can take a new single bond: unbracketed with an implicit H.
  static std::vector<int> attachable(const MolGraph& g, bool aromatic_only = false) {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(g.atom_count()); ++i) {
      const auto& a = g.atoms()[i];
      if (!a.bracket && a.implicit_h > 0 && (!aromatic_only || a.aromatic)) out.push_back(i);
    }
    return out;
  }

  // Appends `part` to `g` and bonds g_atom to part_atom.
  static void join(MolGraph& g, int g_atom, MolGraph part, int part_atom) {
    const int offset = static_cast<int>(g.atom_count());
    for (auto a : part.atoms()) g.add_atom(a);
    for (const auto& b : part.bonds()) g.add_bond(b.a + offset, b.b + offset, b.order);
    g.add_bond(g_atom, part_atom + offset, BondOrder::Single);
    smiles::assign_implicit_hydrogens(g);
  }

  bool attach_at(MolGraph& g, MolGraph part, int part_atom) {
    const auto sites = attachable(g);
    if (sites.empty()) return false;
    join(g, sites[pick_index(sites.size())], std::move(part), part_atom);
    return true;
  }

  bool attach(MolGraph& g, MolGraph part, SiteChoice choice, bool aromatic_site = false) {
    const auto sites = attachable(g, aromatic_site);
    if (sites.empty()) return false;
    int part_atom = 0;
    if (choice == SiteChoice::Any) {
      const auto part_sites = attachable(part);
      if (part_sites.empty()) return false;
      part_atom = part_sites[pick_index(part_sites.size())];
    }
    join(g, sites[pick_index(sites.size())], std::move(part), part_atom);
    return true;
  }

  // Replaces one aliphatic CH2-type carbon with a heteroatom.
  void swap_heteroatom(MolGraph& g) {
    static constexpr const char* kElements[] = {"N", "O", "S", "N", "O"};
    std::vector<int> sites;
    for (int i = 0; i < static_cast<int>(g.atom_count()); ++i) {
      const auto& a = g.atoms()[i];
      if (a.element == "C" && !a.aromatic && !a.bracket && g.degree(i) == 2) sites.push_back(i);
    }
    if (sites.empty()) return;
    auto& atom = g.mutable_atoms()[sites[pick_index(sites.size())]];
    atom.element = kElements[pick_index(std::size(kElements))];
    smiles::assign_implicit_hydrogens(g);
  }

  std::mt19937_64 rng_;
  const GeneratorConfig& cfg_;
  double complexity_ = 0;
};

}  // namespace

std::string generate_molecule(std::uint64_t seed, const GeneratorConfig& config) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Assembler assembler(chem::hash_combine(seed, attempt), config);
    if (auto g = assembler.build()) return smiles::write(*g);
    if (attempt > 1000) throw std::runtime_error("generator: no valid molecule after 1000 attempts");
  }
}

std::vector<std::string> make_desk_corpus(const GeneratorConfig& config, std::size_t size) {
  if (config.complexity_low > config.complexity_high) throw std::invalid_argument("generator: empty complexity range");
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  const std::uint64_t base = chem::mix64(config.seed);
  for (std::uint64_t i = 0; out.size() < size; ++i) {
    if (i > 50 * size + 1000) throw std::runtime_error("generator: too many duplicates; widen the configuration");
    auto s = generate_molecule(chem::hash_combine(base, i), config);
    if (seen.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace molstyle::data
