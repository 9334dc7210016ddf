#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "molstyle/chem.hpp"

namespace molstyle::metrics {

using chem::MolGraph;
using chem::PropertyVector;

class ScoringFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyTestSet : public std::invalid_argument {
 public:
  EmptyTestSet() : std::invalid_argument("evaluation needs at least one test molecule") {}
};

enum class TaskKind { Toxicity, Synthesizability };

struct TaskSpec {
  std::string name;
  TaskKind kind = TaskKind::Synthesizability;
  // Both tasks move the style score down; improvement = score(x) - score(y).
  bool decrease = true;
  double success_threshold = 2.5;  // style condition: score(y) < threshold
  double pss_threshold = 0.7;
  // Pool predicates. Toxicity uses open bounds (p > 0.9, p < 0.03); the SA
  // task uses closed ranges ([5, 8], [0, 2.5]).
  double source_low = 5, source_high = 8;
  double target_low = 0, target_high = 2.5;

  static TaskSpec toxicity();
  static TaskSpec synthesizability();
  static TaskSpec by_name(const std::string& name);  // "toxicity" or "synthesizability"

  bool in_source(double score) const;
  bool in_target(double score) const;
};

// Everything needed to score the style properties of a molecule.
struct Scorers {
  chem::FragmentFreqTable sa_table;
  chem::ToxModel tox;
  std::string sa_version;   // hash of the reference corpus used for the table
  std::string tox_version;  // hash of the tox training corpus

  double sa(const MolGraph& g) const { return chem::sa_score(g, sa_table); }
  double toxicity(const MolGraph& g) const { return chem::predict_tox(tox, g); }
  // Task style score; wraps any failure in ScoringFailure.
  double style(const TaskSpec& task, const MolGraph& g) const;
};

// ------------------------------------------------------------ pair metrics

double improvement(double score_x, double score_y, const TaskSpec& task);

inline constexpr double kPssFloor = 1e-6;

// Per-property similarity scales: interdecile range over a training corpus.
struct PssScales {
  std::array<double, PropertyVector::kSize> range{};

  // Ranges fall back to 1 for count properties and 1e-6 otherwise when the
  // interdecile range is smaller.
  static PssScales fit(std::span<const PropertyVector> corpus);
};

// Per-property similarity max(0, 1 - |dp| / R_p).
std::array<double, PropertyVector::kSize> property_similarities(const PropertyVector& x, const PropertyVector& y,
                                                                const PssScales& scales);
double pss(const PropertyVector& x, const PropertyVector& y, const PssScales& scales);

bool success(double style_y, double pss_xy, const TaskSpec& task);

// Percentage of strings that parse and validate.
double validity_rate(std::span<const std::string> smiles);

// Cube root of the product; std::invalid_argument on a negative factor.
double gm(double mean_imp, double mean_pss, double sr);

// Percentage of molecules with at least one alert match.
double alert_rate(std::span<const MolGraph> molecules, std::span<const chem::AlertPattern> alerts);

// ------------------------------------------------------------ reports

struct PairRecord {
  std::string input_smiles;
  std::string output_smiles;
  double prop_x = 0;
  double prop_y = 0;  // NaN when the output is invalid
  double imp = 0;
  double pss = 0;
  bool valid = false;
  bool success = false;
};

struct MetricsReport {
  std::vector<PairRecord> records;
  std::string orientation = "imp = prop(x) - prop(y)";
  double imp = 0;         // mean over valid records
  double pss = 0;         // mean over valid records
  double validity = 0;    // percent of valid outputs
  double sr = 0;          // mean success over all records
  std::optional<double> gm;  // empty when mean imp is negative
  double alert_rate = 0;  // percent of valid outputs with an alert

  // Fills every aggregate from records; alert rate from the valid outputs.
  void aggregate(std::span<const chem::AlertPattern> alerts);
};

// Scores one transfer pair; invalid outputs get valid = false, success = false.
PairRecord score_pair(const std::string& input, const std::string& output, const TaskSpec& task,
                      const Scorers& scorers, const PssScales& scales);

// input_smiles,output_smiles,prop_x,prop_y,imp,pss,valid,success
void write_report_csv(const MetricsReport& report, const std::filesystem::path& path);
std::vector<PairRecord> read_report_csv(const std::filesystem::path& path);
// key=value lines: imp, pss, validity, sr, gm, alert_rate
void write_summary(const MetricsReport& report, const std::filesystem::path& path);
std::string summary_text(const MetricsReport& report);

// Success rate when each input is paired with a uniformly drawn member of
// the target pool instead of a transferred output.
double random_pairing_sr(std::span<const std::string> inputs, std::span<const std::string> target_pool,
                         const TaskSpec& task, const Scorers& scorers, const PssScales& scales, std::uint64_t seed);

}  // namespace molstyle::metrics
