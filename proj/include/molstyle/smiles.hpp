#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace molstyle::smiles {

enum class TokenKind { Atom, BracketAtom, Bond, RingClosure, BranchOpen, BranchClose, Dot };

std::string_view to_string(TokenKind kind);

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t position = 0;  // byte offset in the source string

  bool operator==(const Token&) const = default;
};

enum class SmilesErrorKind {
  EmptyInput,
  UnknownCharacter,
  UnclosedRingBond,
  UnbalancedBranch,
  DanglingBond,
  InvalidBracketAtom,
  RingBondConflict,
};

std::string_view to_string(SmilesErrorKind kind);

class SmilesError : public std::runtime_error {
 public:
  SmilesError(SmilesErrorKind kind, std::size_t position, std::string detail = {});

  SmilesErrorKind kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return position_; }
  // Ring label for UnclosedRingBond, otherwise empty.
  const std::string& detail() const noexcept { return detail_; }

 private:
  SmilesErrorKind kind_;
  std::size_t position_;
  std::string detail_;
};

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

// Integer contribution to the sigma/pi bond count; aromatic counts as one
// sigma bond (its pi share is resolved separately, see valence.cpp).
int integral_order(BondOrder order);
char bond_symbol(BondOrder order);

struct Atom {
  std::string element;
  bool aromatic = false;
  int formal_charge = 0;
  std::optional<int> explicit_h;  // set for bracket atoms
  std::optional<int> isotope;
  bool bracket = false;
  int implicit_h = 0;  // filled by assign_implicit_hydrogens
  int component = 0;

  int total_h() const { return explicit_h.value_or(0) + implicit_h; }
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;

  int other(int atom) const { return atom == a ? b : a; }
};

struct Neighbor {
  int atom;
  int bond;
};

class MolGraph {
 public:
  int add_atom(Atom atom);
  // Throws std::invalid_argument on self-loops, bad indices or duplicates.
  int add_bond(int a, int b, BondOrder order);

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  std::vector<Atom>& mutable_atoms() { return atoms_; }
  void set_bond_order(int bond, BondOrder order) { bonds_.at(bond).order = order; }

  std::size_t atom_count() const { return atoms_.size(); }
  std::size_t bond_count() const { return bonds_.size(); }
  std::span<const Neighbor> neighbors(int atom) const { return adjacency_.at(atom); }
  int degree(int atom) const { return static_cast<int>(adjacency_.at(atom).size()); }
  std::optional<int> bond_between(int a, int b) const;
  int component_count() const { return component_count_; }

  // Recomputes Atom::component labels; returns the number of components.
  int label_components();

  // Relabels atoms: new index of old atom i is perm[i]. Bond list order is
  // preserved; used for permutation-invariance testing.
  MolGraph permuted(std::span<const int> perm) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
  int component_count_ = 0;
};

// Lexes a SMILES string. Token texts concatenate back to the input.
std::vector<Token> tokenize(std::string_view input);

// Builds a graph from tokens. Stereo markers are accepted and dropped.
// Implicit hydrogens are not assigned; see assign_implicit_hydrogens.
MolGraph parse(std::span<const Token> tokens);

void assign_implicit_hydrogens(MolGraph& graph);

// tokenize + parse + assign_implicit_hydrogens.
MolGraph read(std::string_view smiles);

enum class ValidityReason {
  ValenceExceeded,
  UnsupportedChargeState,
  AromaticAtomNotInRing,
  AromaticBondNotInRing,
  AromaticSystemUnassignable,
  NegativeHydrogenCount,
};

std::string_view to_string(ValidityReason reason);

struct ValidityFailure {
  int atom;  // atom index, or -1 when the failure refers to a bond
  int bond;  // bond index, or -1
  ValidityReason reason;
};

struct ValidityReport {
  std::vector<ValidityFailure> failures;
  bool valid() const { return failures.empty(); }
};

ValidityReport validate(const MolGraph& graph);

// Parses and validates; returns nullopt on any parse error or invalid graph.
std::optional<MolGraph> read_valid(std::string_view smiles);

// Deterministic writer: DFS seeded by Morgan-style ranks.
std::string write(const MolGraph& graph);

// Morgan-style refined ranks (ties broken by index) used by the writer.
std::vector<int> atom_ranks(const MolGraph& graph);

}  // namespace molstyle::smiles
