#include <algorithm>
#include <bit>
#include <stdexcept>

#include "molstyle/chem.hpp"
#include "molstyle/elements.hpp"

namespace molstyle::chem {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ (mix64(value) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

std::vector<std::vector<std::uint64_t>> atom_environments(const MolGraph& graph, int radius) {
  const int n = static_cast<int>(graph.atom_count());
  std::vector<std::vector<std::uint64_t>> ids(radius + 1, std::vector<std::uint64_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& a = graph.atoms()[i];
    const auto* e = find_element(a.element);
    std::uint64_t h = kFingerprintSeed;
    h = hash_combine(h, e ? e->atomic_number : 0);
    h = hash_combine(h, graph.degree(i));
    h = hash_combine(h, static_cast<std::uint64_t>(a.formal_charge + 128));
    h = hash_combine(h, a.aromatic);
    h = hash_combine(h, a.total_h());
    ids[0][i] = h;
  }
  std::vector<std::pair<int, std::uint64_t>> around;
  for (int r = 1; r <= radius; ++r) {
    for (int i = 0; i < n; ++i) {
      around.clear();
      for (const auto& nb : graph.neighbors(i)) {
        around.emplace_back(static_cast<int>(graph.bonds()[nb.bond].order), ids[r - 1][nb.atom]);
      }
      std::sort(around.begin(), around.end());
      std::uint64_t h = hash_combine(ids[r - 1][i], static_cast<std::uint64_t>(r));
      for (const auto& [order, id] : around) h = hash_combine(hash_combine(h, order), id);
      ids[r][i] = h;
    }
  }
  return ids;
}

Fingerprint::Fingerprint(int width, int radius) : width_(width), radius_(radius) {
  if (width <= 0) throw std::invalid_argument("fingerprint width must be positive");
  words_.assign((width + 63) / 64, 0);
}

void Fingerprint::set(std::size_t bit) { words_.at(bit / 64) |= std::uint64_t{1} << (bit % 64); }

bool Fingerprint::test(std::size_t bit) const { return (words_.at(bit / 64) >> (bit % 64)) & 1; }

int Fingerprint::count() const {
  int c = 0;
  for (auto w : words_) c += std::popcount(w);
  return c;
}

bool Fingerprint::subset_of(const Fingerprint& other) const {
  if (other.width_ != width_) return false;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] & ~other.words_[i]) return false;
  }
  return true;
}

std::vector<int> Fingerprint::on_bits() const {
  std::vector<int> out;
  for (int i = 0; i < width_; ++i) {
    if (test(i)) out.push_back(i);
  }
  return out;
}

Fingerprint circular_fingerprint(const MolGraph& graph, int radius, int width) {
  Fingerprint fp(width, radius);
  for (const auto& round : atom_environments(graph, radius)) {
    for (auto id : round) fp.set(id % static_cast<std::uint64_t>(width));
  }
  return fp;
}

}  // namespace molstyle::chem
