#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <span>

#include "tcclust/types.hpp"

namespace tcc {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// Log density of N(y | mean, diag(var)).
inline double log_gaussian(std::span<const double> y, std::span<const double> mean,
                           std::span<const double> var) {
  require(y.size() == mean.size() && y.size() == var.size(), "log_gaussian: dimension mismatch");
  double acc = 0.0;
  for (std::size_t d = 0; d < y.size(); ++d) {
    require(var[d] > 0, "log_gaussian: variance must be positive");
    const double r = y[d] - mean[d];
    acc += std::log(var[d]) + r * r / var[d];
  }
  return -0.5 * (static_cast<double>(y.size()) * kLogTwoPi + acc);
}

// Same density with every variance scaled by `scale`; avoids building the scaled vector.
inline double log_gaussian_scaled(std::span<const double> y, std::span<const double> mean,
                                  std::span<const double> var, double scale) {
  require(y.size() == mean.size() && y.size() == var.size(), "log_gaussian: dimension mismatch");
  double acc = 0.0;
  for (std::size_t d = 0; d < y.size(); ++d) {
    const double v = var[d] * scale;
    const double r = y[d] - mean[d];
    acc += std::log(v) + r * r / v;
  }
  return -0.5 * (static_cast<double>(y.size()) * kLogTwoPi + acc);
}

// log of the prior predictive for a fresh component: N(y | mu, sigma0 + sigma1).
inline double marginal_likelihood_new(std::span<const double> y, const HyperParams& hyper) {
  require(y.size() == hyper.dim(), "marginal_likelihood_new: dimension mismatch");
  double acc = 0.0;
  for (std::size_t d = 0; d < y.size(); ++d) {
    const double v = hyper.sigma0[d] + hyper.sigma1[d];
    const double r = y[d] - hyper.mu[d];
    acc += std::log(v) + r * r / v;
  }
  return -0.5 * (static_cast<double>(y.size()) * kLogTwoPi + acc);
}

inline double log_junk_likelihood(std::span<const double> y, const HyperParams& hyper) {
  return log_gaussian_scaled(y, hyper.mu, hyper.sigma1, hyper.c);
}

struct GaussianPosterior {
  Vector mean;
  Vector var;
};

// Conjugate posterior of a component mean given n assigned points with sum `sum_y`:
// precision n/sigma1 + 1/sigma0, mean (sum_y/sigma1 + mu/sigma0) / precision.
inline GaussianPosterior component_posterior(std::size_t n, std::span<const double> sum_y,
                                             const HyperParams& hyper) {
  const std::size_t dim = hyper.dim();
  require(sum_y.size() == dim, "component_posterior: dimension mismatch");
  GaussianPosterior post{Vector(dim), Vector(dim)};
  const double nd = static_cast<double>(n);
  for (std::size_t d = 0; d < dim; ++d) {
    const double precision = nd / hyper.sigma1[d] + 1.0 / hyper.sigma0[d];
    post.var[d] = 1.0 / precision;
    post.mean[d] = post.var[d] * (sum_y[d] / hyper.sigma1[d] + hyper.mu[d] / hyper.sigma0[d]);
  }
  return post;
}

template <class Rng>
Vector sample_gaussian(std::span<const double> mean, std::span<const double> var, Rng& rng) {
  Vector out(mean.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t d = 0; d < mean.size(); ++d) out[d] = mean[d] + std::sqrt(var[d]) * normal(rng);
  return out;
}

}  // namespace tcc
