#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace molstyle {

struct ElementInfo {
  std::string_view symbol;
  int atomic_number;
  double atomic_weight;  // g/mol, IUPAC conventional values
  bool organic_subset;   // may be written without brackets
  bool aromatic_ok;      // may appear as an aromatic atom
};

// nullptr when the symbol is not in the supported element table.
const ElementInfo* find_element(std::string_view symbol);
std::span<const ElementInfo> supported_elements();

inline constexpr double kHydrogenWeight = 1.008;

// Allowed valences for an (element, formal charge) pair from the bundled
// valence table; empty when the pair is unsupported.
std::span<const int> allowed_valences(std::string_view element, int formal_charge);

// Smallest allowed valence >= needed, or nullopt.
std::optional<int> next_valence(std::string_view element, int formal_charge, int needed);

}  // namespace molstyle
