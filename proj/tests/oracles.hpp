#pragma once

// Independent brute-force references used by the test suites. Nothing here
// calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <string>

#include "molstyle/chem.hpp"
#include "molstyle/smiles.hpp"

namespace oracle {

using molstyle::smiles::BondOrder;
using molstyle::smiles::MolGraph;

inline bool same_atom(const MolGraph& x, int i, const MolGraph& y, int j) {
  const auto& a = x.atoms()[i];
  const auto& b = y.atoms()[j];
  return a.element == b.element && a.aromatic == b.aromatic && a.formal_charge == b.formal_charge &&
         a.total_h() == b.total_h() && a.isotope == b.isotope && x.degree(i) == y.degree(j);
}

inline int order_between(const MolGraph& g, int a, int b) {
  for (const auto& bond : g.bonds()) {
    if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a)) return static_cast<int>(bond.order);
  }
  return 0;
}

// Exhaustive labelled-graph isomorphism: tries every injective assignment
// in atom index order, rejecting a partial map as soon as a label or an
// adjacency (bond order, including "no bond") disagrees.
inline bool isomorphic(const MolGraph& x, const MolGraph& y) {
  const int n = static_cast<int>(x.atom_count());
  if (n != static_cast<int>(y.atom_count()) || x.bond_count() != y.bond_count()) return false;
  std::vector<int> map(n, -1);
  std::vector<bool> used(n, false);
  std::function<bool(int)> extend = [&](int i) {
    if (i == n) return true;
    for (int j = 0; j < n; ++j) {
      if (used[j] || !same_atom(x, i, y, j)) continue;
      bool ok = true;
      for (int k = 0; k < i && ok; ++k) ok = order_between(x, i, k) == order_between(y, j, map[k]);
      if (!ok) continue;
      map[i] = j;
      used[j] = true;
      if (extend(i + 1)) return true;
      used[j] = false;
      map[i] = -1;
    }
    return false;
  };
  return extend(0);
}

inline std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// Independent recomputation of a finite-difference gradient.
template <typename F>
double central_difference(F&& f, double& x, double h = 1e-6) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

inline double rel_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

// ---------------------------------------------------------------- properties

inline int count_components(const MolGraph& g) {
  const int n = static_cast<int>(g.atom_count());
  std::vector<int> seen(n, 0);
  int components = 0;
  for (int s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++components;
    std::vector<int> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& b : g.bonds()) {
        const int v = b.a == u ? b.b : b.b == u ? b.a : -1;
        if (v >= 0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
  }
  return components;
}

inline int cycle_rank(const MolGraph& g) {
  return static_cast<int>(g.bond_count()) - static_cast<int>(g.atom_count()) + count_components(g);
}

// Conventional atomic weights, written out independently of the library table.
inline double atomic_weight(const std::string& el) {
  static const std::map<std::string, double> w{
      {"H", 1.008},   {"Li", 6.94},   {"B", 10.81},   {"C", 12.011},  {"N", 14.007},
      {"O", 15.999},  {"F", 18.998},  {"Na", 22.990}, {"Mg", 24.305}, {"Si", 28.085},
      {"P", 30.974},  {"S", 32.06},   {"Cl", 35.45},  {"K", 39.098},  {"Ca", 40.078},
      {"Zn", 65.38},  {"Se", 78.971}, {"Br", 79.904}, {"I", 126.904}};
  return w.at(el);
}

inline double molecular_weight(const MolGraph& g) {
  double mw = 0;
  for (const auto& a : g.atoms()) mw += atomic_weight(a.element) + 1.008 * a.total_h();
  return mw;
}

inline int net_charge(const MolGraph& g) {
  int q = 0;
  for (const auto& a : g.atoms()) q += a.formal_charge;
  return q;
}

inline std::pair<int, int> hba_hbd(const MolGraph& g) {
  int hba = 0, hbd = 0;
  for (std::size_t i = 0; i < g.atom_count(); ++i) {
    const auto& a = g.atoms()[i];
    if (a.element != "N" && a.element != "O") continue;
    ++hba;
    int h = a.total_h();
    for (const auto& b : g.bonds()) {
      const int other = b.a == static_cast<int>(i) ? b.b : b.b == static_cast<int>(i) ? b.a : -1;
      if (other >= 0 && g.atoms()[other].element == "H") ++h;
    }
    hbd += h > 0;
  }
  return {hba, hbd};
}

// A bond lies on a cycle iff its endpoints stay connected without it.
inline bool bond_on_cycle(const MolGraph& g, int bond) {
  const auto& skip = g.bonds()[bond];
  std::vector<int> seen(g.atom_count(), 0);
  std::vector<int> stack{skip.a};
  seen[skip.a] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    if (u == skip.b) return true;
    for (std::size_t k = 0; k < g.bond_count(); ++k) {
      if (static_cast<int>(k) == bond) continue;
      const auto& b = g.bonds()[k];
      const int v = b.a == u ? b.b : b.b == u ? b.a : -1;
      if (v >= 0 && !seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return false;
}

inline int heavy_neighbors(const MolGraph& g, int atom) {
  int n = 0;
  for (const auto& b : g.bonds()) {
    const int other = b.a == atom ? b.b : b.b == atom ? b.a : -1;
    if (other >= 0 && g.atoms()[other].element != "H") ++n;
  }
  return n;
}

// Classifies every bond: single, not on a cycle, both ends with >= 2 heavy neighbours.
inline int rotatable_bonds(const MolGraph& g) {
  int n = 0;
  for (std::size_t k = 0; k < g.bond_count(); ++k) {
    const auto& b = g.bonds()[k];
    if (b.order != BondOrder::Single) continue;
    if (g.atoms()[b.a].element == "H" || g.atoms()[b.b].element == "H") continue;
    if (bond_on_cycle(g, static_cast<int>(k))) continue;
    if (heavy_neighbors(g, b.a) >= 2 && heavy_neighbors(g, b.b) >= 2) ++n;
  }
  return n;
}

// ---------------------------------------------------------------- alerts

inline bool atom_ok(const molstyle::chem::AtomPredicate& p, const MolGraph& g, int i) {
  using A = molstyle::chem::AtomPredicate::Aromaticity;
  const auto& a = g.atoms()[i];
  bool element = p.elements.empty();
  for (const auto& e : p.elements) element = element || e == a.element;
  if (!element) return false;
  if (p.aromaticity == A::Aromatic && !a.aromatic) return false;
  if (p.aromaticity == A::Aliphatic && a.aromatic) return false;
  if (p.charge && *p.charge != a.formal_charge) return false;
  if (p.min_h && a.total_h() < *p.min_h) return false;
  if (p.degree && *p.degree != static_cast<int>(g.neighbors(i).size())) return false;
  return true;
}

inline bool bond_ok(molstyle::chem::BondPredicate::Order want, int order) {
  using O = molstyle::chem::BondPredicate::Order;
  switch (want) {
    case O::Single: return order == 1;
    case O::Double: return order == 2;
    case O::Triple: return order == 3;
    case O::Aromatic: return order == 4;
    case O::Any: return order != 0;
  }
  return false;
}

// Counts injective maps from pattern atoms (in index order) to graph atoms
// satisfying every atom and bond predicate. Partial maps are checked as
// they grow, which prunes but never skips a complete candidate.
inline long count_embeddings(const molstyle::chem::AlertPattern& p, const MolGraph& g) {
  const int m = static_cast<int>(p.atoms.size());
  const int n = static_cast<int>(g.atom_count());
  std::vector<int> map(m, -1);
  std::vector<bool> used(n, false);
  long count = 0;
  std::function<void(int)> extend = [&](int i) {
    if (i == m) {
      ++count;
      return;
    }
    for (int j = 0; j < n; ++j) {
      if (used[j] || !atom_ok(p.atoms[i], g, j)) continue;
      map[i] = j;
      bool ok = true;
      for (const auto& b : p.bonds) {
        if (std::max(b.a, b.b) != i) continue;
        ok = ok && bond_ok(b.order, order_between(g, map[b.a], map[b.b]));
      }
      if (ok) {
        used[j] = true;
        extend(i + 1);
        used[j] = false;
      }
      map[i] = -1;
    }
  };
  extend(0);
  return count;
}

// Mann-Whitney AUROC by explicit pair counting.
inline double auroc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      ++pairs;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace oracle
