#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

#include "molstyle/chem.hpp"
#include "molstyle/data_files.hpp"
#include "molstyle/elements.hpp"
#include "molstyle/rings.hpp"

namespace molstyle::chem {
namespace {

using smiles::BondOrder;

bool is_hydrogen(const smiles::Atom& a) { return a.element == "H"; }

struct LogpTable {
  std::map<std::tuple<std::string, bool, int>, double> atoms;
  std::map<std::string, double> hydrogens;
};

const LogpTable& logp_table() {
  static const LogpTable table = [] {
    LogpTable t;
    std::istringstream in{std::string(data::logp_table())};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream f(line);
      std::string kind, element;
      f >> kind >> element;
      if (kind == "atom") {
        int aromatic = 0, hetero = 0;
        double v = 0;
        f >> aromatic >> hetero >> v;
        t.atoms[{element, aromatic != 0, hetero}] = v;
      } else if (kind == "hydrogen") {
        double v = 0;
        f >> v;
        t.hydrogens[element] = v;
      }
    }
    return t;
  }();
  return table;
}

struct TpsaKey {
  std::string element;
  bool aromatic;
  int charge, h, single, dbl, triple, arom, ring3;
  auto tie() const { return std::tie(element, aromatic, charge, h, single, dbl, triple, arom, ring3); }
  bool operator<(const TpsaKey& o) const { return tie() < o.tie(); }
};

const std::map<TpsaKey, double>& tpsa_table() {
  static const std::map<TpsaKey, double> table = [] {
    std::map<TpsaKey, double> t;
    std::istringstream in{std::string(data::tpsa_table())};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream f(line);
      TpsaKey k;
      int aromatic = 0;
      double v = 0;
      f >> k.element >> aromatic >> k.charge >> k.h >> k.single >> k.dbl >> k.triple >> k.arom >> k.ring3 >> v;
      k.aromatic = aromatic != 0;
      t[k] = v;
    }
    return t;
  }();
  return table;
}

// Hydrogens on an atom, counting explicit hydrogen atoms in the graph.
int attached_h(const MolGraph& g, int atom) {
  int h = g.atoms()[atom].total_h();
  for (const auto& nb : g.neighbors(atom)) h += is_hydrogen(g.atoms()[nb.atom]);
  return h;
}

int heavy_degree(const MolGraph& g, int atom) {
  int d = 0;
  for (const auto& nb : g.neighbors(atom)) d += !is_hydrogen(g.atoms()[nb.atom]);
  return d;
}

bool is_carbonyl_carbon(const MolGraph& g, int atom) {
  if (g.atoms()[atom].element != "C") return false;
  for (const auto& nb : g.neighbors(atom)) {
    if (g.bonds()[nb.bond].order == BondOrder::Double && g.atoms()[nb.atom].element == "O") return true;
  }
  return false;
}

}  // namespace

double molecular_weight(const MolGraph& graph) {
  double mw = 0;
  for (const auto& a : graph.atoms()) {
    const auto* e = find_element(a.element);
    if (!e) throw UnsupportedElement(a.element);
    mw += e->atomic_weight + a.total_h() * kHydrogenWeight;
  }
  return mw;
}

int heavy_atom_count(const MolGraph& graph) {
  int n = 0;
  for (const auto& a : graph.atoms()) n += !is_hydrogen(a);
  return n;
}

int rotatable_bonds(const MolGraph& graph, const PropertyOptions& options) {
  const RingInfo rings = perceive_rings(graph);
  int count = 0;
  for (std::size_t i = 0; i < graph.bond_count(); ++i) {
    const auto& b = graph.bonds()[i];
    if (b.order != BondOrder::Single || rings.bond_in_ring[i]) continue;
    if (is_hydrogen(graph.atoms()[b.a]) || is_hydrogen(graph.atoms()[b.b])) continue;
    if (heavy_degree(graph, b.a) < 2 || heavy_degree(graph, b.b) < 2) continue;
    if (options.exclude_amide_cn) {
      const auto& ea = graph.atoms()[b.a].element;
      const auto& eb = graph.atoms()[b.b].element;
      if ((ea == "N" && is_carbonyl_carbon(graph, b.b)) || (eb == "N" && is_carbonyl_carbon(graph, b.a))) continue;
    }
    ++count;
  }
  return count;
}

double crippen_logp(const MolGraph& graph) {
  const auto& table = logp_table();
  double logp = 0;
  for (int i = 0; i < static_cast<int>(graph.atom_count()); ++i) {
    const auto& a = graph.atoms()[i];
    if (is_hydrogen(a)) continue;  // counted through the parent's hydrogen row
    int hetero = 0;
    for (const auto& nb : graph.neighbors(i)) {
      const auto& e = graph.atoms()[nb.atom].element;
      hetero += e != "C" && e != "H";
    }
    hetero = std::min(hetero, 2);
    // fall back to the nearest lower heteroatom bucket, then the other
    // aromatic flag, for combinations the table does not list
    const double* v = nullptr;
    for (bool arom : {a.aromatic, !a.aromatic}) {
      for (int h = hetero; h >= 0 && !v; --h) {
        auto it = table.atoms.find({a.element, arom, h});
        if (it != table.atoms.end()) v = &it->second;
      }
      if (v) break;
    }
    if (!v) throw UnsupportedElement(a.element);
    logp += *v;
    const int h = attached_h(graph, i);
    if (h > 0) {
      auto it = table.hydrogens.find(a.element);
      if (it == table.hydrogens.end()) throw UnsupportedElement("H on " + a.element);
      logp += h * it->second;
    }
  }
  return logp;
}

double polar_surface_area(const MolGraph& graph, int* unmatched) {
  const auto& table = tpsa_table();
  const RingInfo rings = perceive_rings(graph);
  double tpsa = 0;
  int missing = 0;
  for (int i = 0; i < static_cast<int>(graph.atom_count()); ++i) {
    const auto& a = graph.atoms()[i];
    if (a.element != "N" && a.element != "O") continue;
    TpsaKey k{a.element, a.aromatic, a.formal_charge, attached_h(graph, i), 0, 0, 0, 0, 0};
    for (const auto& nb : graph.neighbors(i)) {
      if (is_hydrogen(graph.atoms()[nb.atom])) continue;
      switch (graph.bonds()[nb.bond].order) {
        case BondOrder::Single: ++k.single; break;
        case BondOrder::Double: ++k.dbl; break;
        case BondOrder::Triple: ++k.triple; break;
        case BondOrder::Aromatic: ++k.arom; break;
      }
      if (rings.smallest_cycle[nb.bond] == 3) k.ring3 = 1;
    }
    auto it = table.find(k);
    if (it == table.end()) {
      ++missing;
      continue;
    }
    tpsa += it->second;
  }
  if (unmatched) *unmatched = missing;
  return tpsa;
}

bool has_aromatic_ring(const MolGraph& graph) {
  for (const auto& b : graph.bonds()) {
    if (b.order == BondOrder::Aromatic) return true;
  }
  return false;
}

PropertyVector content_properties(const MolGraph& graph, const PropertyOptions& options,
                                  PropertyDiagnostics* diagnostics) {
  PropertyVector p;
  p.mw = molecular_weight(graph);
  p.logp = crippen_logp(graph);
  for (int i = 0; i < static_cast<int>(graph.atom_count()); ++i) {
    const auto& a = graph.atoms()[i];
    p.net_charge += a.formal_charge;
    if (a.element == "N" || a.element == "O") {
      ++p.hba;
      if (attached_h(graph, i) > 0) ++p.hbd;
    }
  }
  p.rot_bonds = rotatable_bonds(graph, options);
  p.rings = perceive_rings(graph).cycle_rank;
  int unmatched = 0;
  p.tpsa = polar_surface_area(graph, &unmatched);
  if (diagnostics) diagnostics->tpsa_unmatched = unmatched;
  return p;
}

}  // namespace molstyle::chem
