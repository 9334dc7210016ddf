#include "molstyle/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <tuple>

#include "molstyle/elements.hpp"
#include "molstyle/rings.hpp"

namespace molstyle::smiles {

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Atom: return "atom";
    case TokenKind::BracketAtom: return "bracket_atom";
    case TokenKind::Bond: return "bond";
    case TokenKind::RingClosure: return "ring_closure";
    case TokenKind::BranchOpen: return "branch_open";
    case TokenKind::BranchClose: return "branch_close";
    case TokenKind::Dot: return "dot";
  }
  return "?";
}

std::string_view to_string(SmilesErrorKind kind) {
  switch (kind) {
    case SmilesErrorKind::EmptyInput: return "EmptyInput";
    case SmilesErrorKind::UnknownCharacter: return "UnknownCharacter";
    case SmilesErrorKind::UnclosedRingBond: return "UnclosedRingBond";
    case SmilesErrorKind::UnbalancedBranch: return "UnbalancedBranch";
    case SmilesErrorKind::DanglingBond: return "DanglingBond";
    case SmilesErrorKind::InvalidBracketAtom: return "InvalidBracketAtom";
    case SmilesErrorKind::RingBondConflict: return "RingBondConflict";
  }
  return "?";
}

std::string_view to_string(ValidityReason reason) {
  switch (reason) {
    case ValidityReason::ValenceExceeded: return "ValenceExceeded";
    case ValidityReason::UnsupportedChargeState: return "UnsupportedChargeState";
    case ValidityReason::AromaticAtomNotInRing: return "AromaticAtomNotInRing";
    case ValidityReason::AromaticBondNotInRing: return "AromaticBondNotInRing";
    case ValidityReason::AromaticSystemUnassignable: return "AromaticSystemUnassignable";
    case ValidityReason::NegativeHydrogenCount: return "NegativeHydrogenCount";
  }
  return "?";
}

SmilesError::SmilesError(SmilesErrorKind kind, std::size_t position, std::string detail)
    : std::runtime_error(std::string(to_string(kind)) + " at position " + std::to_string(position) +
                         (detail.empty() ? "" : " (" + detail + ")")),
      kind_(kind),
      position_(position),
      detail_(std::move(detail)) {}

int integral_order(BondOrder order) {
  switch (order) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;
  }
  return 1;
}

char bond_symbol(BondOrder order) {
  switch (order) {
    case BondOrder::Single: return '-';
    case BondOrder::Double: return '=';
    case BondOrder::Triple: return '#';
    case BondOrder::Aromatic: return ':';
  }
  return '-';
}

// ---------------------------------------------------------------- MolGraph

int MolGraph::add_atom(Atom atom) {
  atoms_.push_back(std::move(atom));
  adjacency_.emplace_back();
  return static_cast<int>(atoms_.size()) - 1;
}

int MolGraph::add_bond(int a, int b, BondOrder order) {
  const int n = static_cast<int>(atoms_.size());
  if (a < 0 || b < 0 || a >= n || b >= n) throw std::invalid_argument("bond endpoint out of range");
  if (a == b) throw std::invalid_argument("bond to self");
  if (bond_between(a, b)) throw std::invalid_argument("duplicate bond");
  const int idx = static_cast<int>(bonds_.size());
  bonds_.push_back({a, b, order});
  adjacency_[a].push_back({b, idx});
  adjacency_[b].push_back({a, idx});
  return idx;
}

std::optional<int> MolGraph::bond_between(int a, int b) const {
  for (const auto& nb : adjacency_.at(a)) {
    if (nb.atom == b) return nb.bond;
  }
  return std::nullopt;
}

int MolGraph::label_components() {
  for (auto& a : atoms_) a.component = -1;
  int label = 0;
  std::vector<int> stack;
  for (std::size_t start = 0; start < atoms_.size(); ++start) {
    if (atoms_[start].component != -1) continue;
    stack.push_back(static_cast<int>(start));
    atoms_[start].component = label;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& nb : adjacency_[u]) {
        if (atoms_[nb.atom].component == -1) {
          atoms_[nb.atom].component = label;
          stack.push_back(nb.atom);
        }
      }
    }
    ++label;
  }
  component_count_ = label;
  return label;
}

MolGraph MolGraph::permuted(std::span<const int> perm) const {
  if (perm.size() != atoms_.size()) throw std::invalid_argument("permutation size mismatch");
  std::vector<Atom> reordered(atoms_.size());
  for (std::size_t i = 0; i < atoms_.size(); ++i) reordered.at(perm[i]) = atoms_[i];
  MolGraph out;
  for (auto& a : reordered) out.add_atom(std::move(a));
  for (const auto& b : bonds_) out.add_bond(perm[b.a], perm[b.b], b.order);
  out.label_components();
  return out;
}

// ---------------------------------------------------------------- tokenize

namespace {

bool is_organic_start(char c) { return std::string_view("BCNOPSFIbcnops").find(c) != std::string_view::npos; }

}  // namespace

std::vector<Token> tokenize(std::string_view input) {
  if (input.empty()) throw SmilesError(SmilesErrorKind::EmptyInput, 0);
  std::vector<Token> tokens;
  std::size_t i = 0;
  auto emit = [&](TokenKind kind, std::size_t len) {
    tokens.push_back({kind, std::string(input.substr(i, len)), i});
    i += len;
  };
  while (i < input.size()) {
    const char c = input[i];
    if (c == '[') {
      const auto close = input.find(']', i + 1);
      if (close == std::string_view::npos) throw SmilesError(SmilesErrorKind::UnknownCharacter, i, "unterminated bracket");
      emit(TokenKind::BracketAtom, close - i + 1);
    } else if (c == 'C' && i + 1 < input.size() && input[i + 1] == 'l') {
      emit(TokenKind::Atom, 2);
    } else if (c == 'B' && i + 1 < input.size() && input[i + 1] == 'r') {
      emit(TokenKind::Atom, 2);
    } else if (is_organic_start(c)) {
      emit(TokenKind::Atom, 1);
    } else if (c == '(') {
      emit(TokenKind::BranchOpen, 1);
    } else if (c == ')') {
      emit(TokenKind::BranchClose, 1);
    } else if (c == '.') {
      emit(TokenKind::Dot, 1);
    } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
      emit(TokenKind::Bond, 1);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      emit(TokenKind::RingClosure, 1);
    } else if (c == '%') {
      if (i + 2 < input.size() && std::isdigit(static_cast<unsigned char>(input[i + 1])) &&
          std::isdigit(static_cast<unsigned char>(input[i + 2]))) {
        emit(TokenKind::RingClosure, 3);
      } else {
        throw SmilesError(SmilesErrorKind::UnknownCharacter, i, "malformed %nn ring label");
      }
    } else {
      throw SmilesError(SmilesErrorKind::UnknownCharacter, i, std::string(1, c));
    }
  }
  return tokens;
}

// ---------------------------------------------------------------- parse

namespace {

Atom parse_organic(const Token& tok) {
  Atom atom;
  const std::string& t = tok.text;
  if (std::islower(static_cast<unsigned char>(t[0]))) {
    atom.aromatic = true;
    atom.element = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(t[0]))));
  } else {
    atom.element = t;
  }
  return atom;
}

Atom parse_bracket(const Token& tok) {
  const std::string_view body = std::string_view(tok.text).substr(1, tok.text.size() - 2);
  auto fail = [&](const char* why) -> Atom {
    throw SmilesError(SmilesErrorKind::InvalidBracketAtom, tok.position, std::string(why) + ": " + tok.text);
  };
  Atom atom;
  atom.bracket = true;
  std::size_t i = 0;
  auto digit = [&](std::size_t k) { return k < body.size() && std::isdigit(static_cast<unsigned char>(body[k])); };
  if (digit(i)) {
    int iso = 0;
    while (digit(i)) iso = iso * 10 + (body[i++] - '0');
    atom.isotope = iso;
  }
  if (i >= body.size()) return fail("missing element");
  // element symbol: aromatic lowercase forms first, then two-letter, then one-letter
  if (std::islower(static_cast<unsigned char>(body[i]))) {
    std::string sym;
    if (body.substr(i, 2) == "se") {
      sym = "Se";
      i += 2;
    } else {
      sym = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(body[i]))));
      i += 1;
    }
    const ElementInfo* e = find_element(sym);
    if (e == nullptr || !e->aromatic_ok) return fail("unsupported aromatic element");
    atom.element = sym;
    atom.aromatic = true;
  } else {
    std::string two(body.substr(i, 2));
    if (two.size() == 2 && std::islower(static_cast<unsigned char>(two[1])) && find_element(two)) {
      atom.element = two;
      i += 2;
    } else {
      std::string one(body.substr(i, 1));
      if (!find_element(one)) return fail("unsupported element");
      atom.element = one;
      i += 1;
    }
  }
  while (i < body.size() && body[i] == '@') ++i;  // chirality, dropped
  int h = 0;
  if (i < body.size() && body[i] == 'H') {
    ++i;
    h = 1;
    if (digit(i)) {
      h = 0;
      while (digit(i)) h = h * 10 + (body[i++] - '0');
    }
  }
  atom.explicit_h = h;
  if (i < body.size() && (body[i] == '+' || body[i] == '-')) {
    const int sign = body[i] == '+' ? 1 : -1;
    const char sym = body[i];
    ++i;
    int magnitude = 1;
    if (digit(i)) {
      magnitude = 0;
      while (digit(i)) magnitude = magnitude * 10 + (body[i++] - '0');
    } else {
      while (i < body.size() && body[i] == sym) {
        ++magnitude;
        ++i;
      }
    }
    atom.formal_charge = sign * magnitude;
  }
  if (i < body.size() && body[i] == ':') {
    ++i;
    if (!digit(i)) return fail("bad atom class");
    while (digit(i)) ++i;
  }
  if (i != body.size()) return fail("unexpected trailing characters");
  return atom;
}

std::optional<BondOrder> bond_from_symbol(char c) {
  switch (c) {
    case '-':
    case '/':
    case '\\': return BondOrder::Single;
    case '=': return BondOrder::Double;
    case '#': return BondOrder::Triple;
    case ':': return BondOrder::Aromatic;
    default: return std::nullopt;
  }
}

}  // namespace

MolGraph parse(std::span<const Token> tokens) {
  if (tokens.empty()) throw SmilesError(SmilesErrorKind::EmptyInput, 0);
  MolGraph g;
  struct OpenRing {
    int atom;
    std::optional<BondOrder> order;
    std::size_t position;
  };
  std::map<int, OpenRing> rings;
  std::vector<std::pair<int, std::size_t>> branches;  // (atom, position of '(')
  std::vector<bool> implicit_bond;                    // per bond: order was defaulted
  int prev = -1;
  std::optional<BondOrder> pending;
  std::size_t pending_pos = 0;
  TokenKind last_kind = TokenKind::Dot;
  bool have_last = false;

  auto connect = [&](int a, int b, std::optional<BondOrder> explicit_order) {
    const auto& aa = g.atoms()[a];
    const auto& bb = g.atoms()[b];
    BondOrder order = BondOrder::Single;
    bool defaulted = false;
    if (explicit_order) {
      order = *explicit_order;
    } else {
      defaulted = true;
      order = aa.aromatic && bb.aromatic ? BondOrder::Aromatic : BondOrder::Single;
    }
    g.add_bond(a, b, order);
    implicit_bond.push_back(defaulted);
  };

  for (const auto& tok : tokens) {
    switch (tok.kind) {
      case TokenKind::Atom:
      case TokenKind::BracketAtom: {
        Atom atom = tok.kind == TokenKind::Atom ? parse_organic(tok) : parse_bracket(tok);
        const int idx = g.add_atom(std::move(atom));
        if (prev >= 0) {
          connect(prev, idx, pending);
        } else if (pending) {
          throw SmilesError(SmilesErrorKind::DanglingBond, pending_pos);
        }
        pending.reset();
        prev = idx;
        break;
      }
      case TokenKind::Bond:
        if (pending || prev < 0) throw SmilesError(SmilesErrorKind::DanglingBond, tok.position);
        pending = bond_from_symbol(tok.text[0]);
        pending_pos = tok.position;
        break;
      case TokenKind::RingClosure: {
        if (prev < 0 || (have_last && last_kind == TokenKind::BranchOpen)) {
          throw SmilesError(SmilesErrorKind::DanglingBond, tok.position, "ring label without atom");
        }
        const int label = tok.text[0] == '%' ? std::stoi(tok.text.substr(1)) : tok.text[0] - '0';
        auto it = rings.find(label);
        if (it == rings.end()) {
          rings[label] = {prev, pending, tok.position};
        } else {
          const OpenRing open = it->second;
          rings.erase(it);
          if (open.order && pending && *open.order != *pending) {
            throw SmilesError(SmilesErrorKind::RingBondConflict, tok.position, tok.text);
          }
          if (open.atom == prev || g.bond_between(open.atom, prev)) {
            throw SmilesError(SmilesErrorKind::RingBondConflict, tok.position, "ring closes onto bonded atom");
          }
          connect(open.atom, prev, open.order ? open.order : pending);
        }
        pending.reset();
        break;
      }
      case TokenKind::BranchOpen:
        if (prev < 0 || pending) throw SmilesError(SmilesErrorKind::UnbalancedBranch, tok.position);
        branches.emplace_back(prev, tok.position);
        break;
      case TokenKind::BranchClose:
        if (branches.empty()) throw SmilesError(SmilesErrorKind::UnbalancedBranch, tok.position);
        if (pending) throw SmilesError(SmilesErrorKind::DanglingBond, pending_pos);
        if (have_last && last_kind == TokenKind::BranchOpen) {
          throw SmilesError(SmilesErrorKind::UnbalancedBranch, tok.position, "empty branch");
        }
        prev = branches.back().first;
        branches.pop_back();
        break;
      case TokenKind::Dot:
        if (pending) throw SmilesError(SmilesErrorKind::DanglingBond, pending_pos);
        if (prev < 0) throw SmilesError(SmilesErrorKind::DanglingBond, tok.position, "empty component");
        prev = -1;
        break;
    }
    last_kind = tok.kind;
    have_last = true;
  }
  if (pending) throw SmilesError(SmilesErrorKind::DanglingBond, pending_pos);
  if (!branches.empty()) throw SmilesError(SmilesErrorKind::UnbalancedBranch, branches.back().second);
  if (!rings.empty()) {
    const auto& [label, open] = *rings.begin();
    throw SmilesError(SmilesErrorKind::UnclosedRingBond, open.position, std::to_string(label));
  }
  if (prev < 0 && last_kind == TokenKind::Dot) {
    throw SmilesError(SmilesErrorKind::DanglingBond, tokens.back().position, "trailing dot");
  }

  // A defaulted bond between two aromatic atoms only stays aromatic when it
  // closes a cycle (biphenyl-type links become single).
  const RingInfo rings_info = perceive_rings(g);
  for (std::size_t i = 0; i < g.bond_count(); ++i) {
    if (implicit_bond[i] && g.bonds()[i].order == BondOrder::Aromatic && !rings_info.bond_in_ring[i]) {
      g.set_bond_order(static_cast<int>(i), BondOrder::Single);
    }
  }
  g.label_components();
  return g;
}

// ---------------------------------------------------------------- hydrogens

namespace {

struct BondTally {
  int aromatic = 0;
  int other = 0;  // sum of non-aromatic orders
};

BondTally tally(const MolGraph& g, int atom) {
  BondTally t;
  for (const auto& nb : g.neighbors(atom)) {
    const auto order = g.bonds()[nb.bond].order;
    if (order == BondOrder::Aromatic) {
      ++t.aromatic;
    } else {
      t.other += integral_order(order);
    }
  }
  return t;
}

bool contains(std::span<const int> values, int v) { return std::find(values.begin(), values.end(), v) != values.end(); }

// Hydrogens an unbracketed atom would receive in this bonding environment.
int organic_implicit_h(const MolGraph& g, int atom) {
  const Atom& a = g.atoms()[atom];
  const BondTally t = tally(g, atom);
  const int used = t.aromatic + t.other;
  if (a.aromatic) {
    // Only carbon and boron take implicit hydrogens in aromatic rings; the
    // extra unit accounts for the atom's share of the pi system.
    if (a.element != "C" && a.element != "B") return 0;
    const auto v = next_valence(a.element, 0, used + 1);
    return v ? std::max(0, *v - used - 1) : 0;
  }
  const auto v = next_valence(a.element, 0, used);
  return v ? *v - used : 0;
}

enum class PiDemand { None, Required, Invalid };

// Whether an aromatic atom needs a ring double bond to satisfy its valence.
PiDemand pi_demand(const MolGraph& g, int atom) {
  const Atom& a = g.atoms()[atom];
  const BondTally t = tally(g, atom);
  const int base = t.aromatic + t.other + a.total_h();
  const auto allowed = allowed_valences(a.element, a.formal_charge);
  if (contains(allowed, base)) return PiDemand::None;
  if (contains(allowed, base + 1)) return PiDemand::Required;
  return PiDemand::Invalid;
}

// Backtracking perfect matching over atoms that require a ring double bond.
class PiMatcher {
 public:
  PiMatcher(const MolGraph& g, const std::vector<bool>& needs) : g_(g), needs_(needs), mate_(g.atom_count(), -1) {}

  // Returns atoms left unmatched (empty on success).
  std::vector<int> solve() {
    std::vector<int> unmatched;
    if (!search()) {
      for (std::size_t i = 0; i < needs_.size(); ++i) {
        if (needs_[i]) unmatched.push_back(static_cast<int>(i));
      }
    }
    return unmatched;
  }

 private:
  std::vector<int> candidates(int atom) const {
    std::vector<int> out;
    for (const auto& nb : g_.neighbors(atom)) {
      if (g_.bonds()[nb.bond].order != BondOrder::Aromatic) continue;
      if (needs_[nb.atom] && mate_[nb.atom] == -1) out.push_back(nb.atom);
    }
    return out;
  }

  bool search() {
    if (++steps_ > kStepLimit) return false;
    int pick = -1;
    std::size_t best = SIZE_MAX;
    for (std::size_t i = 0; i < needs_.size(); ++i) {
      if (!needs_[i] || mate_[i] != -1) continue;
      const auto c = candidates(static_cast<int>(i)).size();
      if (c < best) {
        best = c;
        pick = static_cast<int>(i);
      }
    }
    if (pick < 0) return true;
    if (best == 0) return false;
    for (int partner : candidates(pick)) {
      mate_[pick] = partner;
      mate_[partner] = pick;
      if (search()) return true;
      mate_[pick] = mate_[partner] = -1;
    }
    return false;
  }

  static constexpr long kStepLimit = 200000;
  const MolGraph& g_;
  const std::vector<bool>& needs_;
  std::vector<int> mate_;
  long steps_ = 0;
};

}  // namespace

void assign_implicit_hydrogens(MolGraph& graph) {
  for (std::size_t i = 0; i < graph.atom_count(); ++i) {
    const int h = graph.atoms()[i].bracket ? 0 : organic_implicit_h(graph, static_cast<int>(i));
    graph.mutable_atoms()[i].implicit_h = h;
  }
}

MolGraph read(std::string_view smiles) {
  const auto tokens = tokenize(smiles);
  MolGraph g = parse(tokens);
  assign_implicit_hydrogens(g);
  return g;
}

// ---------------------------------------------------------------- validate

ValidityReport validate(const MolGraph& graph) {
  ValidityReport report;
  const RingInfo rings = perceive_rings(graph);
  std::vector<bool> needs_pi(graph.atom_count(), false);
  for (std::size_t i = 0; i < graph.atom_count(); ++i) {
    const int ai = static_cast<int>(i);
    const Atom& a = graph.atoms()[i];
    if (a.explicit_h.value_or(0) < 0 || a.implicit_h < 0) {
      report.failures.push_back({ai, -1, ValidityReason::NegativeHydrogenCount});
      continue;
    }
    const auto allowed = allowed_valences(a.element, a.formal_charge);
    if (allowed.empty()) {
      report.failures.push_back({ai, -1, ValidityReason::UnsupportedChargeState});
      continue;
    }
    if (a.aromatic) {
      if (!rings.atom_in_ring[i]) report.failures.push_back({ai, -1, ValidityReason::AromaticAtomNotInRing});
      switch (pi_demand(graph, ai)) {
        case PiDemand::None: break;
        case PiDemand::Required: needs_pi[i] = true; break;
        case PiDemand::Invalid: {
          const BondTally t = tally(graph, ai);
          const int base = t.aromatic + t.other + a.total_h();
          report.failures.push_back({ai, -1,
                                     base > allowed.back() ? ValidityReason::ValenceExceeded
                                                           : ValidityReason::AromaticSystemUnassignable});
          break;
        }
      }
    } else {
      const BondTally t = tally(graph, ai);
      const int total = t.aromatic + t.other + a.total_h();
      if (total > allowed.back()) report.failures.push_back({ai, -1, ValidityReason::ValenceExceeded});
    }
  }
  for (std::size_t b = 0; b < graph.bond_count(); ++b) {
    const auto& bond = graph.bonds()[b];
    if (bond.order != BondOrder::Aromatic) continue;
    const bool endpoints_aromatic = graph.atoms()[bond.a].aromatic && graph.atoms()[bond.b].aromatic;
    if (!rings.bond_in_ring[b] || !endpoints_aromatic) {
      report.failures.push_back({-1, static_cast<int>(b), ValidityReason::AromaticBondNotInRing});
    }
  }
  if (std::any_of(needs_pi.begin(), needs_pi.end(), [](bool v) { return v; })) {
    PiMatcher matcher(graph, needs_pi);
    const auto unmatched = matcher.solve();
    if (!unmatched.empty()) {
      report.failures.push_back({unmatched.front(), -1, ValidityReason::AromaticSystemUnassignable});
    }
  }
  return report;
}

std::optional<MolGraph> read_valid(std::string_view smiles) {
  try {
    MolGraph g = read(smiles);
    if (!validate(g).valid()) return std::nullopt;
    return g;
  } catch (const SmilesError&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------- write

std::vector<int> atom_ranks(const MolGraph& g) {
  const int n = static_cast<int>(g.atom_count());
  using Key = std::tuple<int, int, int, int, int, int>;
  std::vector<Key> init(n);
  for (int i = 0; i < n; ++i) {
    const Atom& a = g.atoms()[i];
    const ElementInfo* e = find_element(a.element);
    init[i] = {e ? e->atomic_number : 0, a.aromatic ? 1 : 0, a.formal_charge, g.degree(i), a.total_h(),
               a.isotope.value_or(0)};
  }
  auto dense_rank = [n](const auto& keys) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return keys[x] < keys[y]; });
    std::vector<int> rank(n, 0);
    int r = 0;
    for (int k = 0; k < n; ++k) {
      if (k > 0 && keys[order[k - 1]] < keys[order[k]]) ++r;
      rank[order[k]] = r;
    }
    return std::pair{rank, n == 0 ? 0 : r + 1};
  };
  auto [rank, classes] = dense_rank(init);
  while (true) {
    std::vector<std::pair<int, std::vector<std::pair<int, int>>>> keys(n);
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<int, int>> nbrs;
      for (const auto& nb : g.neighbors(i)) {
        nbrs.emplace_back(rank[nb.atom], static_cast<int>(g.bonds()[nb.bond].order));
      }
      std::sort(nbrs.begin(), nbrs.end());
      keys[i] = {rank[i], std::move(nbrs)};
    }
    auto [next, next_classes] = dense_rank(keys);
    if (next_classes <= classes) break;
    rank = std::move(next);
    classes = next_classes;
  }
  // collisions fall back to input order
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return rank[x] < rank[y]; });
  std::vector<int> unique(n);
  for (int k = 0; k < n; ++k) unique[order[k]] = k;
  return unique;
}

namespace {

std::string atom_text(const MolGraph& g, int idx) {
  const Atom& a = g.atoms()[idx];
  const ElementInfo* e = find_element(a.element);
  const bool organic_ok = e && e->organic_subset && !a.isotope && a.formal_charge == 0 &&
                          (!a.aromatic || e->aromatic_ok) && organic_implicit_h(g, idx) == a.total_h();
  std::string sym = a.element;
  if (a.aromatic) {
    for (auto& ch : sym) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  if (organic_ok) return sym;
  std::string out = "[";
  if (a.isotope) out += std::to_string(*a.isotope);
  out += sym;
  const int h = a.total_h();
  if (h > 0) {
    out += 'H';
    if (h > 1) out += std::to_string(h);
  }
  if (a.formal_charge != 0) {
    out += a.formal_charge > 0 ? '+' : '-';
    if (std::abs(a.formal_charge) > 1) out += std::to_string(std::abs(a.formal_charge));
  }
  out += ']';
  return out;
}

std::string bond_text(const MolGraph& g, int bond) {
  const auto& b = g.bonds()[bond];
  const bool both_aromatic = g.atoms()[b.a].aromatic && g.atoms()[b.b].aromatic;
  switch (b.order) {
    case BondOrder::Single: return both_aromatic ? "-" : "";
    case BondOrder::Double: return "=";
    case BondOrder::Triple: return "#";
    case BondOrder::Aromatic: return both_aromatic ? "" : ":";
  }
  return "";
}

std::string ring_label(int label) { return label < 10 ? std::to_string(label) : "%" + std::to_string(label); }

class Writer {
 public:
  explicit Writer(const MolGraph& g) : g_(g), rank_(atom_ranks(g)) {}

  std::string run() {
    const int n = static_cast<int>(g_.atom_count());
    visited_.assign(n, false);
    children_.assign(n, {});
    closures_.assign(n, {});
    std::vector<int> by_rank(n);
    std::iota(by_rank.begin(), by_rank.end(), 0);
    std::sort(by_rank.begin(), by_rank.end(), [&](int x, int y) { return rank_[x] < rank_[y]; });
    std::string out;
    for (int start : by_rank) {
      if (visited_[start]) continue;
      build_tree(start, -1);
      if (!out.empty()) out += '.';
      emit(start, out);
    }
    return out;
  }

 private:
  struct Closure {
    int bond;
    bool opening;
  };

  void build_tree(int u, int parent_bond) {
    visited_[u] = true;
    on_stack_.push_back(u);
    std::vector<Neighbor> nbrs(g_.neighbors(u).begin(), g_.neighbors(u).end());
    std::sort(nbrs.begin(), nbrs.end(), [&](const Neighbor& x, const Neighbor& y) { return rank_[x.atom] < rank_[y.atom]; });
    for (const auto& nb : nbrs) {
      if (nb.bond == parent_bond) continue;
      if (!visited_[nb.atom]) {
        children_[u].push_back(nb);
        build_tree(nb.atom, nb.bond);
      } else if (std::find(on_stack_.begin(), on_stack_.end(), nb.atom) != on_stack_.end()) {
        // back edge to an ancestor: opened there, closed here
        closures_[nb.atom].push_back({nb.bond, true});
        closures_[u].push_back({nb.bond, false});
      }
    }
    on_stack_.pop_back();
  }

  void emit(int u, std::string& out) {
    out += atom_text(g_, u);
    for (const auto& c : closures_[u]) {
      if (c.opening) continue;
      const int label = open_labels_.at(c.bond);
      open_labels_.erase(c.bond);
      used_labels_.erase(label);
      out += ring_label(label);
    }
    for (const auto& c : closures_[u]) {
      if (!c.opening) continue;
      int label = 1;
      while (used_labels_.count(label)) ++label;
      used_labels_.insert({label, c.bond});
      open_labels_[c.bond] = label;
      out += bond_text(g_, c.bond);
      out += ring_label(label);
    }
    const auto& kids = children_[u];
    for (std::size_t k = 0; k < kids.size(); ++k) {
      const bool last = k + 1 == kids.size();
      if (!last) out += '(';
      out += bond_text(g_, kids[k].bond);
      emit(kids[k].atom, out);
      if (!last) out += ')';
    }
  }

  const MolGraph& g_;
  std::vector<int> rank_;
  std::vector<bool> visited_;
  std::vector<int> on_stack_;
  std::vector<std::vector<Neighbor>> children_;
  std::vector<std::vector<Closure>> closures_;
  std::map<int, int> open_labels_;  // bond -> label
  std::map<int, int> used_labels_;  // label -> bond
};

}  // namespace

std::string write(const MolGraph& graph) {
  if (graph.atom_count() == 0) return {};
  return Writer(graph).run();
}

}  // namespace molstyle::smiles
