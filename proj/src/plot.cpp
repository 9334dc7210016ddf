#include "molstyle/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace molstyle::plot {

Projection pca2(const Eigen::MatrixXd& data) {
  if (data.rows() < 2 || data.cols() < 2) throw std::invalid_argument("pca2 needs at least 2 rows and 2 columns");
  Eigen::MatrixXd x = data.rowwise() - data.colwise().mean();
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double sd = std::sqrt(x.col(c).squaredNorm() / static_cast<double>(x.rows() - 1));
    if (sd > 1e-12) x.col(c) /= sd;
    else x.col(c).setZero();
  }
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::Index n = cov.rows();
  Projection p;
  p.components.resize(n, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(n - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.components.col(k) = v;
    p.explained(k) = eig.eigenvalues()(n - 1 - k);
  }
  p.points = x * p.components;
  return p;
}

Histogram histogram(std::span<const double> values, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values)
    if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) return h;
  if (hi == lo) hi = lo + 1;
  h.low = lo;
  h.high = hi;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
    h.counts[std::min(b, h.counts.size() - 1)]++;
  }
  return h;
}

namespace {

constexpr double kW = 640, kH = 480, kMargin = 60;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

void header(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n"
    << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kW - 2 * kMargin << "\" height=\""
    << kH - 2 * kMargin << "\" fill=\"none\" stroke=\"black\"/>\n";
}

// Blue (low) to red (high).
std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(40 + 215 * t), 60,
                static_cast<int>(255 - 215 * t));
  return buf;
}

}  // namespace

std::string scatter_svg(const Projection& p, std::span<const double> color, const std::string& title,
                        const std::string& color_label) {
  if (static_cast<Eigen::Index>(color.size()) != p.points.rows())
    throw std::invalid_argument("one colour value per point required");
  std::ostringstream o;
  header(o, title);
  const double x0 = p.points.col(0).minCoeff(), x1 = p.points.col(0).maxCoeff();
  const double y0 = p.points.col(1).minCoeff(), y1 = p.points.col(1).maxCoeff();
  const auto [c0, c1] = std::minmax_element(color.begin(), color.end());
  const double cspan = color.empty() || *c1 == *c0 ? 1 : *c1 - *c0;
  auto sx = [&](double v) { return kMargin + (x1 > x0 ? (v - x0) / (x1 - x0) : 0.5) * (kW - 2 * kMargin); };
  auto sy = [&](double v) { return kH - kMargin - (y1 > y0 ? (v - y0) / (y1 - y0) : 0.5) * (kH - 2 * kMargin); };
  for (Eigen::Index i = 0; i < p.points.rows(); ++i) {
    o << "<circle cx=\"" << fmt(sx(p.points(i, 0))) << "\" cy=\"" << fmt(sy(p.points(i, 1))) << "\" r=\"2\" fill=\""
      << ramp((color[static_cast<std::size_t>(i)] - *c0) / cspan) << "\" fill-opacity=\"0.7\"/>\n";
  }
  o << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 20 << "\" text-anchor=\"middle\">PC1 (var " << fmt(p.explained(0))
    << ")</text>\n"
    << "<text x=\"18\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << kH / 2
    << ")\">PC2 (var " << fmt(p.explained(1)) << ")</text>\n";
  if (!color.empty()) {
    o << "<text x=\"" << kW - kMargin << "\" y=\"48\" text-anchor=\"end\">" << escape(color_label) << ": <tspan fill=\""
      << ramp(0) << "\">" << fmt(*c0) << "</tspan> to <tspan fill=\"" << ramp(1) << "\">" << fmt(*c1)
      << "</tspan></text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string histogram_svg(const Histogram& h, const std::string& title) {
  std::ostringstream o;
  header(o, title);
  const std::size_t top = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
  const double bw = (kW - 2 * kMargin) / static_cast<double>(std::max<std::size_t>(h.counts.size(), 1));
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double bh = top ? static_cast<double>(h.counts[b]) / static_cast<double>(top) * (kH - 2 * kMargin) : 0;
    o << "<rect x=\"" << fmt(kMargin + b * bw) << "\" y=\"" << fmt(kH - kMargin - bh) << "\" width=\"" << fmt(bw - 1)
      << "\" height=\"" << fmt(bh) << "\" fill=\"#4a6fd0\"/>\n";
  }
  o << "<text x=\"" << kMargin << "\" y=\"" << kH - kMargin + 18 << "\">" << fmt(h.low) << "</text>\n"
    << "<text x=\"" << kW - kMargin << "\" y=\"" << kH - kMargin + 18 << "\" text-anchor=\"end\">" << fmt(h.high)
    << "</text>\n"
    << "<text x=\"" << kMargin - 6 << "\" y=\"" << kMargin + 4 << "\" text-anchor=\"end\">" << top << "</text>\n"
    << "</svg>\n";
  return o.str();
}

}  // namespace molstyle::plot
