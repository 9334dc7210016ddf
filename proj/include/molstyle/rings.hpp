#pragma once

#include <vector>

#include "molstyle/smiles.hpp"

namespace molstyle {

struct RingInfo {
  std::vector<bool> bond_in_ring;
  std::vector<bool> atom_in_ring;
  // Size of the smallest cycle through each bond; 0 for acyclic bonds.
  std::vector<int> smallest_cycle;
  // Number of ring bonds incident to each atom.
  std::vector<int> ring_degree;

  // A ring bond whose endpoints both carry three or more ring bonds, i.e.
  // a bond shared between fused rings.
  bool is_fusion_bond(const smiles::MolGraph& graph, int bond) const;
  int cycle_rank = 0;  // bonds - atoms + components
};

RingInfo perceive_rings(const smiles::MolGraph& graph);

}  // namespace molstyle
