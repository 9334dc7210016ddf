#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "molstyle/smiles.hpp"

namespace molstyle::chem {

using smiles::MolGraph;

// ------------------------------------------------------------ properties

// The eight content attributes preserved during style transfer.
struct PropertyVector {
  double mw = 0;    // g/mol
  double logp = 0;  // unitless
  int hba = 0;
  int hbd = 0;
  int rot_bonds = 0;
  int rings = 0;
  int net_charge = 0;
  double tpsa = 0;  // square angstroms

  static constexpr std::size_t kSize = 8;
  static constexpr std::array<std::string_view, kSize> kNames{"mw", "logp", "hba", "hbd", "rot", "rings", "charge", "tpsa"};
  // true for properties that only take integer values
  static constexpr std::array<bool, kSize> kIsCount{false, false, true, true, true, true, true, false};

  std::array<double, kSize> values() const {
    return {mw, logp, double(hba), double(hbd), double(rot_bonds), double(rings), double(net_charge), tpsa};
  }
  bool operator==(const PropertyVector&) const = default;
};

struct PropertyOptions {
  bool exclude_amide_cn = false;  // drop C(=O)-N bonds from the rotatable count
};

class UnsupportedElement : public std::runtime_error {
 public:
  explicit UnsupportedElement(const std::string& element)
      : std::runtime_error("no contribution-table entry for element " + element) {}
};

struct PropertyDiagnostics {
  int tpsa_unmatched = 0;  // N/O atoms without a TPSA table entry (counted as 0)
};

PropertyVector content_properties(const MolGraph& graph, const PropertyOptions& options = {},
                                  PropertyDiagnostics* diagnostics = nullptr);

double molecular_weight(const MolGraph& graph);
int rotatable_bonds(const MolGraph& graph, const PropertyOptions& options = {});
double crippen_logp(const MolGraph& graph);
double polar_surface_area(const MolGraph& graph, int* unmatched = nullptr);
int heavy_atom_count(const MolGraph& graph);
bool has_aromatic_ring(const MolGraph& graph);

// ------------------------------------------------------------ fingerprints

// Seeded 64-bit mixing (splitmix64 finaliser). Stable across platforms.
inline constexpr std::uint64_t kFingerprintSeed = 0x6d6f6c7374796c65ULL;
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);

// Environment identifiers: result[r][atom] is the id of `atom` after r
// refinement rounds (r = 0..radius).
std::vector<std::vector<std::uint64_t>> atom_environments(const MolGraph& graph, int radius);

class Fingerprint {
 public:
  Fingerprint(int width, int radius);

  int width() const { return width_; }
  int radius() const { return radius_; }
  void set(std::size_t bit);
  bool test(std::size_t bit) const;
  int count() const;
  bool subset_of(const Fingerprint& other) const;
  std::vector<int> on_bits() const;
  bool operator==(const Fingerprint&) const = default;

 private:
  int width_;
  int radius_;
  std::vector<std::uint64_t> words_;
};

Fingerprint circular_fingerprint(const MolGraph& graph, int radius = 2, int width = 2048);

// ------------------------------------------------------------ SA score

class EmptyTable : public std::runtime_error {
 public:
  EmptyTable() : std::runtime_error("fragment frequency table is empty") {}
};

struct FragmentFreqTable {
  std::unordered_map<std::uint64_t, double> contributions;  // ln(count / reference count)
  double unseen_contribution = 0;
  double raw_low = 0;   // 1st percentile of raw scores over the reference corpus
  double raw_high = 0;  // 99th percentile

  bool empty() const { return contributions.empty(); }

  static FragmentFreqTable build(std::span<const MolGraph> corpus);
};

struct SaBreakdown {
  double fragment_score = 0;
  double size_penalty = 0;
  double fusion_penalty = 0;
  double macrocycle_penalty = 0;
  double charge_penalty = 0;

  double complexity_penalty() const { return size_penalty + fusion_penalty + macrocycle_penalty + charge_penalty; }
  double raw() const { return fragment_score - complexity_penalty(); }
};

inline constexpr int kSaFragmentRadius = 2;

SaBreakdown sa_breakdown(const MolGraph& graph, const FragmentFreqTable& table);
// Affine map of a raw score onto [1, 10] with compressed tails; higher
// means harder to make.
double sa_rescale(double raw, const FragmentFreqTable& table);
double sa_score(const MolGraph& graph, const FragmentFreqTable& table);

// ------------------------------------------------------------ alerts

struct AtomPredicate {
  enum class Aromaticity { Aromatic, Aliphatic, Either };
  std::vector<std::string> elements;  // empty: any element
  Aromaticity aromaticity = Aromaticity::Either;
  std::optional<int> charge;
  std::optional<int> min_h;
  std::optional<int> degree;

  bool matches(const MolGraph& graph, int atom) const;
};

struct BondPredicate {
  enum class Order { Single, Double, Triple, Aromatic, Any };
  int a = 0;
  int b = 0;
  Order order = Order::Any;

  bool matches(smiles::BondOrder order) const;
};

struct AlertPattern {
  std::string id;
  std::string name;
  std::vector<AtomPredicate> atoms;
  std::vector<BondPredicate> bonds;
};

std::vector<AlertPattern> parse_alerts(std::string_view text);
const std::vector<AlertPattern>& bundled_alerts();

bool has_embedding(const AlertPattern& pattern, const MolGraph& graph);
std::vector<std::string> match_alerts(const MolGraph& graph, std::span<const AlertPattern> alerts);

// ------------------------------------------------------------ toxicity

class DegenerateLabels : public std::invalid_argument {
 public:
  DegenerateLabels() : std::invalid_argument("training labels contain a single class") {}
};

struct ToxModel {
  Eigen::VectorXd weights;  // one per fingerprint bit
  double bias = 0;
  int radius = 2;
  int width = 2048;
  std::string corpus_hash;
  double heldout_auroc = 0;
  std::size_t train_size = 0;
  std::size_t heldout_size = 0;

  static ToxModel zeros(int width = 2048, int radius = 2);
};

struct ToxTrainConfig {
  double heldout_fraction = 0.25;
  int epochs = 400;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
  int radius = 2;
  int width = 2048;
};

struct LabeledMolecule {
  std::string smiles;
  MolGraph graph;
  int label = 0;  // 1 = toxic
};

ToxModel train_tox_predictor(std::span<const LabeledMolecule> corpus, const ToxTrainConfig& config = {});
double predict_tox(const ToxModel& model, const MolGraph& graph);

// Area under the ROC curve (Mann-Whitney form, ties counted as one half).
double auroc(std::span<const double> scores, std::span<const int> labels);

}  // namespace molstyle::chem
