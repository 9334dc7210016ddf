#include "molstyle/elements.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "molstyle/data_files.hpp"

namespace molstyle {
namespace {

constexpr std::array<ElementInfo, 19> kElements{{
    {"H", 1, 1.008, false, false},
    {"Li", 3, 6.94, false, false},
    {"B", 5, 10.81, true, true},
    {"C", 6, 12.011, true, true},
    {"N", 7, 14.007, true, true},
    {"O", 8, 15.999, true, true},
    {"F", 9, 18.998, true, false},
    {"Na", 11, 22.990, false, false},
    {"Mg", 12, 24.305, false, false},
    {"Si", 14, 28.085, false, false},
    {"P", 15, 30.974, true, true},
    {"S", 16, 32.06, true, true},
    {"Cl", 17, 35.45, true, false},
    {"K", 19, 39.098, false, false},
    {"Ca", 20, 40.078, false, false},
    {"Zn", 30, 65.38, false, false},
    {"Se", 34, 78.971, false, true},
    {"Br", 35, 79.904, true, false},
    {"I", 53, 126.904, true, false},
}};

struct ValenceTable {
  std::map<std::pair<std::string, int>, std::vector<int>> entries;
};

const ValenceTable& valence_table() {
  static const ValenceTable table = [] {
    ValenceTable t;
    std::istringstream in{std::string(data::valence_table())};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream fields(line);
      std::string element;
      int charge = 0;
      if (!(fields >> element >> charge)) continue;
      std::vector<int> valences;
      int v = 0;
      while (fields >> v) valences.push_back(v);
      if (valences.empty()) throw std::runtime_error("valence table: no valences for " + element);
      std::sort(valences.begin(), valences.end());
      t.entries[{element, charge}] = std::move(valences);
    }
    return t;
  }();
  return table;
}

}  // namespace

std::span<const ElementInfo> supported_elements() {
  return kElements;
}

const ElementInfo* find_element(std::string_view symbol) {
  for (const auto& e : supported_elements()) {
    if (e.symbol == symbol) return &e;
  }
  return nullptr;
}

std::span<const int> allowed_valences(std::string_view element, int formal_charge) {
  const auto& entries = valence_table().entries;
  auto it = entries.find({std::string(element), formal_charge});
  if (it == entries.end()) return {};
  return it->second;
}

std::optional<int> next_valence(std::string_view element, int formal_charge, int needed) {
  for (int v : allowed_valences(element, formal_charge)) {
    if (v >= needed) return v;
  }
  return std::nullopt;
}

}  // namespace molstyle
