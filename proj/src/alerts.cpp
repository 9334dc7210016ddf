#include <algorithm>
#include <cctype>
#include <deque>
#include <sstream>

#include "molstyle/chem.hpp"
#include "molstyle/data_files.hpp"

namespace molstyle::chem {
namespace {

using smiles::BondOrder;

inline constexpr std::size_t kMaxPatternAtoms = 12;

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? s.size() - pos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

AtomPredicate parse_atom(const std::string& text) {
  std::istringstream in(text);
  std::string head;
  if (!(in >> head)) throw std::invalid_argument("alert: empty atom predicate");
  AtomPredicate p;
  bool either = false;
  if (head.front() == '~') {
    either = true;
    head.erase(0, 1);
  }
  if (!head.empty() && (head.back() == '+' || head.back() == '-' || head.back() == '0')) {
    p.charge = head.back() == '+' ? 1 : head.back() == '-' ? -1 : 0;
    head.pop_back();
  }
  if (head.empty()) throw std::invalid_argument("alert: missing element in '" + text + "'");
  std::optional<bool> aromatic;
  if (head != "*") {
    for (auto symbol : split(head, '|')) {
      if (symbol.empty()) throw std::invalid_argument("alert: bad element list '" + head + "'");
      const bool lower = std::islower(static_cast<unsigned char>(symbol[0]));
      if (aromatic && *aromatic != lower) throw std::invalid_argument("alert: mixed case in '" + head + "'");
      aromatic = lower;
      symbol[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(symbol[0])));
      p.elements.push_back(symbol);
    }
  }
  if (either || !aromatic) {
    p.aromaticity = AtomPredicate::Aromaticity::Either;
  } else {
    p.aromaticity = *aromatic ? AtomPredicate::Aromaticity::Aromatic : AtomPredicate::Aromaticity::Aliphatic;
  }
  std::string mod;
  while (in >> mod) {
    if (mod.rfind("h>=", 0) == 0) {
      p.min_h = std::stoi(mod.substr(3));
    } else if (mod.rfind("d=", 0) == 0) {
      p.degree = std::stoi(mod.substr(2));
    } else {
      throw std::invalid_argument("alert: unknown atom modifier '" + mod + "'");
    }
  }
  return p;
}

BondPredicate parse_bond(const std::string& text, int atom_count) {
  const auto colon = text.find(':');
  const auto dash = text.find('-');
  if (colon == std::string::npos || dash == std::string::npos || dash > colon) {
    throw std::invalid_argument("alert: bad bond '" + text + "'");
  }
  BondPredicate b;
  b.a = std::stoi(text.substr(0, dash));
  b.b = std::stoi(text.substr(dash + 1, colon - dash - 1));
  if (b.a < 0 || b.b < 0 || b.a >= atom_count || b.b >= atom_count || b.a == b.b) {
    throw std::invalid_argument("alert: bond index out of range in '" + text + "'");
  }
  const std::string order = text.substr(colon + 1);
  if (order == "1") b.order = BondPredicate::Order::Single;
  else if (order == "2") b.order = BondPredicate::Order::Double;
  else if (order == "3") b.order = BondPredicate::Order::Triple;
  else if (order == "ar") b.order = BondPredicate::Order::Aromatic;
  else if (order == "any") b.order = BondPredicate::Order::Any;
  else throw std::invalid_argument("alert: unknown bond order '" + order + "'");
  return b;
}

bool connected(const AlertPattern& p) {
  const int n = static_cast<int>(p.atoms.size());
  std::vector<bool> seen(n, false);
  std::deque<int> queue{0};
  seen[0] = true;
  int reached = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (const auto& b : p.bonds) {
      const int v = b.a == u ? b.b : b.b == u ? b.a : -1;
      if (v >= 0 && !seen[v]) {
        seen[v] = true;
        ++reached;
        queue.push_back(v);
      }
    }
  }
  return reached == n;
}

}  // namespace

bool AtomPredicate::matches(const MolGraph& graph, int atom) const {
  const auto& a = graph.atoms()[atom];
  if (!elements.empty() && std::find(elements.begin(), elements.end(), a.element) == elements.end()) return false;
  if (aromaticity == Aromaticity::Aromatic && !a.aromatic) return false;
  if (aromaticity == Aromaticity::Aliphatic && a.aromatic) return false;
  if (charge && a.formal_charge != *charge) return false;
  if (min_h && a.total_h() < *min_h) return false;
  if (degree && graph.degree(atom) != *degree) return false;
  return true;
}

bool BondPredicate::matches(BondOrder o) const {
  switch (order) {
    case Order::Single: return o == BondOrder::Single;
    case Order::Double: return o == BondOrder::Double;
    case Order::Triple: return o == BondOrder::Triple;
    case Order::Aromatic: return o == BondOrder::Aromatic;
    case Order::Any: return true;
  }
  return false;
}

std::vector<AlertPattern> parse_alerts(std::string_view text) {
  std::vector<AlertPattern> out;
  for (const auto& raw : split(text, '\n')) {
    if (raw.empty() || raw[0] == '#') continue;
    const auto fields = split(raw, '|');
    // element lists also use '|', so the atom field may have been split;
    // the first two fields and the last are fixed
    if (fields.size() < 4) throw std::invalid_argument("alert: expected 4 fields in '" + raw + "'");
    AlertPattern p;
    p.id = fields[0];
    p.name = fields[1];
    std::string atoms = fields[2];
    for (std::size_t i = 3; i + 1 < fields.size(); ++i) atoms += "|" + fields[i];
    for (const auto& a : split(atoms, ',')) p.atoms.push_back(parse_atom(a));
    if (p.atoms.empty() || p.atoms.size() > kMaxPatternAtoms) {
      throw std::invalid_argument("alert " + p.id + ": pattern must have 1 to 12 atoms");
    }
    for (const auto& b : split(fields.back(), ',')) {
      if (!b.empty()) p.bonds.push_back(parse_bond(b, static_cast<int>(p.atoms.size())));
    }
    if (!connected(p)) throw std::invalid_argument("alert " + p.id + ": pattern is not connected");
    out.push_back(std::move(p));
  }
  return out;
}

const std::vector<AlertPattern>& bundled_alerts() {
  static const std::vector<AlertPattern> alerts = parse_alerts(data::alert_set());
  return alerts;
}

bool has_embedding(const AlertPattern& pattern, const MolGraph& graph) {
  const int m = static_cast<int>(pattern.atoms.size());
  const int n = static_cast<int>(graph.atom_count());
  if (m > n) return false;

  // Visit pattern atoms in BFS order so every atom after the first has an
  // already mapped anchor whose graph neighbours are the only candidates.
  std::vector<int> order{0}, anchor(m, -1);
  std::vector<bool> queued(m, false);
  queued[0] = true;
  for (std::size_t head = 0; head < order.size(); ++head) {
    const int u = order[head];
    for (const auto& b : pattern.bonds) {
      const int v = b.a == u ? b.b : b.b == u ? b.a : -1;
      if (v >= 0 && !queued[v]) {
        queued[v] = true;
        anchor[v] = u;
        order.push_back(v);
      }
    }
  }

  std::vector<int> map(m, -1);
  std::vector<bool> used(n, false);

  auto consistent = [&](int p, int g) {
    if (used[g] || !pattern.atoms[p].matches(graph, g)) return false;
    for (const auto& b : pattern.bonds) {
      const int other = b.a == p ? b.b : b.b == p ? b.a : -1;
      if (other < 0 || map[other] < 0) continue;
      const auto bond = graph.bond_between(g, map[other]);
      if (!bond || !b.matches(graph.bonds()[*bond].order)) return false;
    }
    return true;
  };

  auto extend = [&](auto&& self, std::size_t depth) -> bool {
    if (depth == order.size()) return true;
    const int p = order[depth];
    auto attempt = [&](int g) {
      if (!consistent(p, g)) return false;
      map[p] = g;
      used[g] = true;
      if (self(self, depth + 1)) return true;
      used[g] = false;
      map[p] = -1;
      return false;
    };
    if (anchor[p] < 0) {
      for (int g = 0; g < n; ++g) {
        if (attempt(g)) return true;
      }
    } else {
      for (const auto& nb : graph.neighbors(map[anchor[p]])) {
        if (attempt(nb.atom)) return true;
      }
    }
    return false;
  };
  return extend(extend, 0);
}

std::vector<std::string> match_alerts(const MolGraph& graph, std::span<const AlertPattern> alerts) {
  std::vector<std::string> out;
  for (const auto& a : alerts) {
    if (has_embedding(a, graph)) out.push_back(a.id);
  }
  return out;
}

}  // namespace molstyle::chem
