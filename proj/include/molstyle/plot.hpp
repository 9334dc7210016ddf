#pragma once
// Static SVG figures: principal-component scatter of content properties and
// per-metric histograms.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace molstyle::plot {

struct Projection {
  Eigen::MatrixXd points;      // rows x 2
  Eigen::MatrixXd components;  // features x 2, unit columns
  Eigen::Vector2d explained;   // variance along each component
};

// Standardises columns (constant columns left at zero) and projects onto the
// two leading principal components. Component signs are fixed so the largest
// loading is positive.
Projection pca2(const Eigen::MatrixXd& data);

struct Histogram {
  double low = 0, high = 0;
  std::vector<std::size_t> counts;
};

// Equal-width bins over [min, max] of the finite values; NaNs are skipped.
Histogram histogram(std::span<const double> values, int bins);

std::string scatter_svg(const Projection& p, std::span<const double> color, const std::string& title,
                        const std::string& color_label);
std::string histogram_svg(const Histogram& h, const std::string& title);

}  // namespace molstyle::plot
