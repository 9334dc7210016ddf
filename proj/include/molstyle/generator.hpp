#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace molstyle::data {

// Randomised fragment-grammar assembly of drug-like molecules.
struct GeneratorConfig {
  std::uint64_t seed = 1;
  // Per-molecule complexity is drawn uniformly from [complexity_low,
  // complexity_high]. Low values favour common rings and substituents; high
  // values favour fused, bridged and macrocyclic systems, charged groups,
  // rare elements and heteroatom swaps.
  double complexity_low = 0.0;
  double complexity_high = 1.0;
  double alert_rate = 0.3;  // chance of grafting one structural-alert group
  int max_heavy_atoms = 32;
  int max_rings = 4;  // ring fragments per molecule (each may hold several rings)
};

// One molecule in canonical (writer) form; the generator retries until the
// assembled graph passes validation.
std::string generate_molecule(std::uint64_t seed, const GeneratorConfig& config);

// `size` unique molecules, deduplicated by writer output; deterministic by
// config.seed.
std::vector<std::string> make_desk_corpus(const GeneratorConfig& config, std::size_t size);

}  // namespace molstyle::data
