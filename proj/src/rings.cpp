#include "molstyle/rings.hpp"

#include <algorithm>
#include <deque>
#include <utility>

namespace molstyle {

using smiles::MolGraph;

bool RingInfo::is_fusion_bond(const MolGraph& graph, int bond) const {
  if (!bond_in_ring[bond]) return false;
  const auto& b = graph.bonds()[bond];
  return ring_degree[b.a] >= 3 && ring_degree[b.b] >= 3;
}

namespace {

// Tarjan bridge finding, iterative to stay safe on long chains.
std::vector<bool> find_bridges(const MolGraph& graph) {
  const int n = static_cast<int>(graph.atom_count());
  std::vector<bool> bridge(graph.bond_count(), false);
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  struct Frame {
    int atom;
    int parent_bond;
    std::size_t next;
  };
  for (int root = 0; root < n; ++root) {
    if (disc[root] != -1) continue;
    std::vector<Frame> stack{{root, -1, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      auto nbrs = graph.neighbors(f.atom);
      if (f.next < nbrs.size()) {
        const auto nb = nbrs[f.next++];
        if (nb.bond == f.parent_bond) continue;
        if (disc[nb.atom] == -1) {
          disc[nb.atom] = low[nb.atom] = timer++;
          stack.push_back({nb.atom, nb.bond, 0});
        } else {
          low[f.atom] = std::min(low[f.atom], disc[nb.atom]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          Frame& parent = stack.back();
          low[parent.atom] = std::min(low[parent.atom], low[done.atom]);
          if (low[done.atom] > disc[parent.atom]) bridge[done.parent_bond] = true;
        }
      }
    }
  }
  return bridge;
}

int shortest_path_avoiding(const MolGraph& graph, int from, int to, int skip_bond) {
  std::vector<int> dist(graph.atom_count(), -1);
  std::deque<int> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (u == to) return dist[u];
    for (const auto& nb : graph.neighbors(u)) {
      if (nb.bond == skip_bond || dist[nb.atom] != -1) continue;
      dist[nb.atom] = dist[u] + 1;
      queue.push_back(nb.atom);
    }
  }
  return -1;
}

}  // namespace

RingInfo perceive_rings(const MolGraph& graph) {
  RingInfo info;
  const auto bridges = find_bridges(graph);
  info.bond_in_ring.assign(graph.bond_count(), false);
  info.atom_in_ring.assign(graph.atom_count(), false);
  info.smallest_cycle.assign(graph.bond_count(), 0);
  info.ring_degree.assign(graph.atom_count(), 0);
  for (std::size_t i = 0; i < graph.bond_count(); ++i) {
    if (bridges[i]) continue;
    const auto& b = graph.bonds()[i];
    info.bond_in_ring[i] = true;
    info.atom_in_ring[b.a] = info.atom_in_ring[b.b] = true;
    ++info.ring_degree[b.a];
    ++info.ring_degree[b.b];
    info.smallest_cycle[i] = shortest_path_avoiding(graph, b.a, b.b, static_cast<int>(i)) + 1;
  }
  std::vector<int> parent(graph.atom_count());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = static_cast<int>(graph.atom_count());
  for (const auto& b : graph.bonds()) {
    const int ra = find(b.a), rb = find(b.b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  info.cycle_rank = static_cast<int>(graph.bond_count()) - static_cast<int>(graph.atom_count()) + components;
  return info;
}

}  // namespace molstyle
