#include <doctest.h>

#include <cmath>
#include <random>

#include "molstyle/plot.hpp"

using namespace molstyle;

TEST_CASE("pca recovers the dominant direction") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd x(500, 3);
  for (int i = 0; i < 500; ++i) {
    const double t = n(rng);
    x(i, 0) = t + 0.05 * n(rng);
    x(i, 1) = 2 * t + 0.1 * n(rng);
    x(i, 2) = n(rng);
  }
  const auto p = plot::pca2(x);
  CHECK(p.points.rows() == 500);
  CHECK(p.explained(0) >= p.explained(1));
  // Standardised, the first two columns are nearly identical.
  CHECK(std::abs(p.components(0, 0) - std::sqrt(0.5)) < 0.02);
  CHECK(std::abs(p.components(1, 0) - std::sqrt(0.5)) < 0.02);
  CHECK(std::abs(p.components.col(0).dot(p.components.col(1))) < 1e-9);

  // Oracle: variance of the projected scores equals the eigenvalue.
  for (int k = 0; k < 2; ++k) {
    const Eigen::VectorXd s = p.points.col(k);
    const double var = (s.array() - s.mean()).square().sum() / 499.0;
    CHECK(var == doctest::Approx(p.explained(k)).epsilon(1e-9));
  }
}

TEST_CASE("constant columns do not break the projection") {
  Eigen::MatrixXd x(4, 3);
  x << 1, 5, 0, 2, 5, 1, 3, 5, 0, 4, 5, 1;
  const auto p = plot::pca2(x);
  CHECK(p.points.allFinite());
}

TEST_CASE("histogram counts every finite value once") {
  const std::vector<double> v{0, 0.1, 0.5, 0.99, 1.0, std::nan(""), 0.5};
  const auto h = plot::histogram(v, 4);
  CHECK(h.low == 0);
  CHECK(h.high == 1);
  CHECK(h.counts == std::vector<std::size_t>{2, 0, 2, 2});
  CHECK(plot::histogram(std::vector<double>{3, 3}, 2).counts == std::vector<std::size_t>{2, 0});
  CHECK_THROWS(plot::histogram(v, 0));
}

TEST_CASE("svg output is well formed") {
  Eigen::MatrixXd x(3, 2);
  x << 0, 1, 1, 0, 2, 2;
  const auto p = plot::pca2(x);
  const std::vector<double> c{1, 2, 3};
  const auto svg = plot::scatter_svg(p, c, "a < b", "SA");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("a &lt; b") != std::string::npos);
  std::size_t circles = 0;
  for (auto pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
  CHECK(circles == 3);
  CHECK_THROWS(plot::scatter_svg(p, std::vector<double>{1}, "t", "c"));
  const auto hs = plot::histogram_svg(plot::histogram(c, 3), "h");
  CHECK(hs.find("</svg>") != std::string::npos);
}
