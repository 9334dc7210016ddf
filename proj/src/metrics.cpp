#include "molstyle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "molstyle/smiles.hpp"

namespace molstyle::metrics {

TaskSpec TaskSpec::toxicity() {
  TaskSpec t;
  t.name = "toxicity";
  t.kind = TaskKind::Toxicity;
  t.success_threshold = 0.1;
  t.source_low = 0.9;
  t.source_high = 1.0;
  t.target_low = 0.0;
  t.target_high = 0.03;
  return t;
}

TaskSpec TaskSpec::synthesizability() {
  TaskSpec t;
  t.name = "synthesizability";
  t.kind = TaskKind::Synthesizability;
  t.success_threshold = 2.5;
  t.source_low = 5;
  t.source_high = 8;
  t.target_low = 0;
  t.target_high = 2.5;
  return t;
}

TaskSpec TaskSpec::by_name(const std::string& name) {
  if (name == "toxicity") return toxicity();
  if (name == "synthesizability" || name == "sa") return synthesizability();
  throw std::invalid_argument("unknown task " + name);
}

bool TaskSpec::in_source(double s) const {
  return kind == TaskKind::Toxicity ? s > source_low : (s >= source_low && s <= source_high);
}

bool TaskSpec::in_target(double s) const {
  return kind == TaskKind::Toxicity ? s < target_high : (s >= target_low && s <= target_high);
}

double Scorers::style(const TaskSpec& task, const MolGraph& g) const {
  try {
    const double s = task.kind == TaskKind::Toxicity ? toxicity(g) : sa(g);
    if (!std::isfinite(s)) throw ScoringFailure("non-finite style score");
    return s;
  } catch (const ScoringFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw ScoringFailure(std::string("style scoring failed: ") + e.what());
  }
}

double improvement(double score_x, double score_y, const TaskSpec& task) {
  return task.decrease ? score_x - score_y : score_y - score_x;
}

namespace {

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

PssScales PssScales::fit(std::span<const PropertyVector> corpus) {
  if (corpus.empty()) throw std::invalid_argument("PSS scales need a non-empty corpus");
  PssScales s;
  for (std::size_t p = 0; p < PropertyVector::kSize; ++p) {
    std::vector<double> col;
    col.reserve(corpus.size());
    for (const auto& v : corpus) col.push_back(v.values()[p]);
    const double r = percentile(col, 0.9) - percentile(col, 0.1);
    const double floor = PropertyVector::kIsCount[p] ? 1.0 : 1e-6;
    s.range[p] = std::max(r, floor);
  }
  return s;
}

std::array<double, PropertyVector::kSize> property_similarities(const PropertyVector& x, const PropertyVector& y,
                                                                const PssScales& scales) {
  const auto a = x.values(), b = y.values();
  std::array<double, PropertyVector::kSize> s{};
  for (std::size_t p = 0; p < s.size(); ++p) s[p] = std::max(0.0, 1.0 - std::abs(a[p] - b[p]) / scales.range[p]);
  return s;
}

double pss(const PropertyVector& x, const PropertyVector& y, const PssScales& scales) {
  double sum = 0;
  for (double v : property_similarities(x, y, scales)) sum += v;
  return std::max(kPssFloor, sum / static_cast<double>(PropertyVector::kSize));
}

bool success(double style_y, double pss_xy, const TaskSpec& task) {
  return style_y < task.success_threshold && pss_xy > task.pss_threshold;
}

double validity_rate(std::span<const std::string> smiles) {
  if (smiles.empty()) return 0;
  std::size_t ok = 0;
  for (const auto& s : smiles) ok += !s.empty() && smiles::read_valid(s).has_value();
  return 100.0 * static_cast<double>(ok) / static_cast<double>(smiles.size());
}

double gm(double mean_imp, double mean_pss, double sr) {
  if (mean_imp < 0 || mean_pss < 0 || sr < 0) throw std::invalid_argument("gm: negative factor");
  return std::cbrt(mean_imp * mean_pss * sr);
}

double alert_rate(std::span<const MolGraph> molecules, std::span<const chem::AlertPattern> alerts) {
  if (molecules.empty()) return 0;
  std::size_t hit = 0;
  for (const auto& g : molecules) hit += !chem::match_alerts(g, alerts).empty();
  return 100.0 * static_cast<double>(hit) / static_cast<double>(molecules.size());
}

void MetricsReport::aggregate(std::span<const chem::AlertPattern> alerts) {
  double imp_sum = 0, pss_sum = 0, succ = 0;
  std::size_t valid_n = 0;
  std::vector<MolGraph> outputs;
  for (const auto& r : records) {
    succ += r.success;
    if (!r.valid) continue;
    ++valid_n;
    imp_sum += r.imp;
    pss_sum += r.pss;
    if (auto g = smiles::read_valid(r.output_smiles)) outputs.push_back(std::move(*g));
  }
  const double n = static_cast<double>(records.size());
  imp = valid_n ? imp_sum / static_cast<double>(valid_n) : 0.0;
  pss = valid_n ? pss_sum / static_cast<double>(valid_n) : 0.0;
  validity = records.empty() ? 0.0 : 100.0 * static_cast<double>(valid_n) / n;
  sr = records.empty() ? 0.0 : succ / n;
  gm.reset();
  if (imp >= 0) gm = metrics::gm(imp, pss, sr);
  alert_rate = metrics::alert_rate(outputs, alerts);
}

PairRecord score_pair(const std::string& input, const std::string& output, const TaskSpec& task,
                      const Scorers& scorers, const PssScales& scales) {
  PairRecord r;
  r.input_smiles = input;
  r.output_smiles = output;
  const auto gx = smiles::read_valid(input);
  if (!gx) throw ScoringFailure("input molecule does not validate: " + input);
  r.prop_x = scorers.style(task, *gx);
  r.prop_y = std::nan("");
  const auto gy = output.empty() ? std::nullopt : smiles::read_valid(output);
  if (!gy) return r;
  try {
    r.prop_y = scorers.style(task, *gy);
    r.pss = pss(chem::content_properties(*gx), chem::content_properties(*gy), scales);
  } catch (const std::exception&) {
    // unscoreable outputs (e.g. elements without table entries) count as invalid
    r.prop_y = std::nan("");
    r.pss = 0;
    return r;
  }
  r.valid = true;
  r.imp = improvement(r.prop_x, r.prop_y, task);
  r.success = success(r.prop_y, r.pss, task);
  return r;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void write_report_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << "input_smiles,output_smiles,prop_x,prop_y,imp,pss,valid,success\n";
  for (const auto& r : report.records) {
    out << csv_field(r.input_smiles) << ',' << csv_field(r.output_smiles) << ',' << fmt(r.prop_x) << ','
        << fmt(r.prop_y) << ',' << fmt(r.imp) << ',' << fmt(r.pss) << ',' << (r.valid ? 1 : 0) << ','
        << (r.success ? 1 : 0) << '\n';
  }
}

std::vector<PairRecord> read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read report " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "input_smiles,output_smiles,prop_x,prop_y,imp,pss,valid,success") {
    throw std::runtime_error("unexpected report header in " + path.string());
  }
  std::vector<PairRecord> out;
  while (std::getline(in, line)) {
    // SMILES never contain commas or quotes, so a plain split is exact.
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw std::runtime_error("malformed report row: " + line);
    PairRecord r;
    r.input_smiles = f[0];
    r.output_smiles = f[1];
    r.prop_x = std::stod(f[2]);
    r.prop_y = f[3] == "nan" ? std::nan("") : std::stod(f[3]);
    r.imp = std::stod(f[4]);
    r.pss = std::stod(f[5]);
    r.valid = f[6] == "1";
    r.success = f[7] == "1";
    out.push_back(r);
  }
  return out;
}

std::string summary_text(const MetricsReport& report) {
  std::ostringstream out;
  out << "imp=" << fmt(report.imp) << '\n'
      << "pss=" << fmt(report.pss) << '\n'
      << "validity=" << fmt(report.validity) << '\n'
      << "sr=" << fmt(report.sr) << '\n'
      << "gm=" << (report.gm ? fmt(*report.gm) : std::string("nan")) << '\n'
      << "alert_rate=" << fmt(report.alert_rate) << '\n';
  return out.str();
}

void write_summary(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary " + path.string());
  out << summary_text(report);
}

double random_pairing_sr(std::span<const std::string> inputs, std::span<const std::string> target_pool,
                         const TaskSpec& task, const Scorers& scorers, const PssScales& scales, std::uint64_t seed) {
  if (inputs.empty()) throw EmptyTestSet();
  if (target_pool.empty()) throw std::invalid_argument("random pairing needs a target pool");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, target_pool.size() - 1);
  double succ = 0;
  for (const auto& x : inputs) succ += score_pair(x, target_pool[pick(rng)], task, scorers, scales).success;
  return succ / static_cast<double>(inputs.size());
}

}  // namespace molstyle::metrics
