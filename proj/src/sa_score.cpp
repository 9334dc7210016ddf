#include <algorithm>
#include <cmath>

#include "molstyle/chem.hpp"
#include "molstyle/rings.hpp"

namespace molstyle::chem {
namespace {

std::vector<std::uint64_t> fragments(const MolGraph& graph) {
  std::vector<std::uint64_t> out;
  for (const auto& round : atom_environments(graph, kSaFragmentRadius)) out.insert(out.end(), round.begin(), round.end());
  return out;
}

// Linear-interpolated percentile of sorted values, q in [0, 1].
double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

FragmentFreqTable FragmentFreqTable::build(std::span<const MolGraph> corpus) {
  std::unordered_map<std::uint64_t, double> counts;
  for (const auto& g : corpus) {
    for (auto id : fragments(g)) counts[id] += 1;
  }
  if (counts.empty()) throw EmptyTable();

  // Reference count: the fragment count at which the most common fragments
  // cover 80% of all occurrences.
  std::vector<double> sorted;
  double total = 0;
  for (const auto& [id, c] : counts) {
    sorted.push_back(c);
    total += c;
  }
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double covered = 0, ref = sorted.back();
  for (double c : sorted) {
    covered += c;
    if (covered >= 0.8 * total) {
      ref = c;
      break;
    }
  }

  FragmentFreqTable table;
  for (const auto& [id, c] : counts) table.contributions[id] = std::log((c + 1) / ref);
  table.unseen_contribution = std::log(1 / ref);

  std::vector<double> raws;
  raws.reserve(corpus.size());
  table.raw_low = 0;
  table.raw_high = 1;
  for (const auto& g : corpus) raws.push_back(sa_breakdown(g, table).raw());
  std::sort(raws.begin(), raws.end());
  table.raw_low = percentile(raws, 0.01);
  table.raw_high = percentile(raws, 0.99);
  if (!(table.raw_high > table.raw_low)) table.raw_high = table.raw_low + 1;
  return table;
}

SaBreakdown sa_breakdown(const MolGraph& graph, const FragmentFreqTable& table) {
  if (table.empty()) throw EmptyTable();
  SaBreakdown s;
  const auto frags = fragments(graph);
  if (!frags.empty()) {
    double sum = 0;
    for (auto id : frags) {
      auto it = table.contributions.find(id);
      sum += it == table.contributions.end() ? table.unseen_contribution : it->second;
    }
    s.fragment_score = sum / static_cast<double>(frags.size());
  }

  const double n = heavy_atom_count(graph);
  s.size_penalty = std::pow(n, 1.005) - n;

  const RingInfo rings = perceive_rings(graph);
  int fused = 0;
  bool macro = false;
  for (std::size_t b = 0; b < graph.bond_count(); ++b) {
    fused += rings.is_fusion_bond(graph, static_cast<int>(b));
    macro = macro || rings.smallest_cycle[b] > 8;
  }
  s.fusion_penalty = std::log(fused + 1.0);
  s.macrocycle_penalty = macro ? std::log(2.0) : 0.0;

  int charged = 0;
  for (const auto& a : graph.atoms()) charged += a.formal_charge != 0;
  s.charge_penalty = 0.5 * charged;
  return s;
}

double sa_rescale(double raw, const FragmentFreqTable& table) {
  const double score = 1 + 9 * (table.raw_high - raw) / (table.raw_high - table.raw_low);
  // Exponential tails instead of a hard clamp keep the map strictly
  // monotone, so molecules beyond the calibration bounds still rank.
  if (score < 1.5) return 1 + 0.5 * std::exp(score - 1.5);
  if (score > 9.5) return 10 - 0.5 * std::exp(9.5 - score);
  return score;
}

double sa_score(const MolGraph& graph, const FragmentFreqTable& table) {
  return sa_rescale(sa_breakdown(graph, table).raw(), table);
}

}  // namespace molstyle::chem
