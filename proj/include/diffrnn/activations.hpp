#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace diffrnn {

enum class ActKind { kSign, kErf, kTanh, kRelu };

std::string to_string(ActKind kind);

// An activation function h together with the closed forms of its Gaussian
// smoothing: h~(x) = [h * k_sigma](x), its smoothed square h2~ = [h^2 * k_sigma],
// and their x-derivatives. sigma = 0 recovers the unsmoothed function.
//
// Closed forms per kind:
//   Sign  h~ = erf(x / (sqrt(2) sigma))
//   Erf   h~ = erf(a x / sqrt(1 + 2 (a sigma)^2)), a > 0 the sharpness
//   Tanh  h~ = tanh(x / sqrt(1 + (pi/2) sigma^2))      (approximate)
//   ReLU  h~ = sigma/sqrt(2 pi) e^{-x^2/(2 sigma^2)} + x/2 (1 + erf(x/(sqrt(2) sigma)))
//
// Only the Erf family (and Sign as its sharp limit) has a smoothed square:
//   h2~ = 1 - sqrt(pi) e^{-4 a^2 x^2 / (pi + 8 a^2 sigma^2)} / sqrt(pi + 8 a^2 sigma^2)
// which rests on erf^2(x) ~ 1 - e^{-4 x^2 / pi} (max abs error ~0.0115). At
// sigma = 0 the exact square h(x)^2 is returned instead, so the zero-bandwidth
// degeneracies (smoothed cost == plain cost) hold exactly.
class DiffusedActivation {
 public:
  static DiffusedActivation sign() { return DiffusedActivation(ActKind::kSign, kSignSharpness); }
  static DiffusedActivation erf(double sharpness);
  static DiffusedActivation tanh() { return DiffusedActivation(ActKind::kTanh, 1.0); }
  static DiffusedActivation relu() { return DiffusedActivation(ActKind::kRelu, 1.0); }
  static DiffusedActivation of(ActKind kind, double sharpness = 1.0);

  ActKind kind() const { return kind_; }
  double sharpness() const { return sharpness_; }

  // h~_sigma(x). Throws std::domain_error on non-finite x, non-finite or
  // negative sigma. Sign at sigma = 0 uses the convention sign(0) = 0.
  double diffused(double x, double sigma) const;

  // h2~_sigma(x). Erf/Sign only; others throw UnsupportedOperationError.
  double diffused_sq(double x, double sigma) const;

  // d/dx h~_sigma(x). Throws std::domain_error where the derivative is
  // undefined (Sign at sigma = 0, x = 0).
  double diffused_deriv(double x, double sigma) const;

  // d/dx h2~_sigma(x). Erf/Sign only.
  double diffused_sq_deriv(double x, double sigma) const;

  // Elementwise application onto vectors.
  Eigen::VectorXd diffused(const Eigen::VectorXd& x, double sigma) const;
  Eigen::VectorXd diffused_sq(const Eigen::VectorXd& x, double sigma) const;
  Eigen::VectorXd diffused_deriv(const Eigen::VectorXd& x, double sigma) const;
  Eigen::VectorXd diffused_sq_deriv(const Eigen::VectorXd& x, double sigma) const;

  // As above but yields NaN instead of throwing at isolated undefined points;
  // used to fill forward-pass caches that cost-only callers never read.
  double diffused_deriv_or_nan(double x, double sigma) const;

  // True whether diffused_sq/diffused_sq_deriv have a closed form.
  bool has_sq_form() const { return kind_ == ActKind::kErf || kind_ == ActKind::kSign; }

  // h(x), the unsmoothed function (== diffused(x, 0)).
  double original(double x) const { return diffused(x, 0.0); }

 private:
  DiffusedActivation(ActKind kind, double sharpness) : kind_(kind), sharpness_(sharpness) {}

  // The Sign smoothed square is taken as the a -> infinity limit of the Erf
  // form, evaluated with this surrogate sharpness.
  static constexpr double kSignSharpness = 1e6;

  ActKind kind_;
  double sharpness_;
};

// Monte-Carlo estimate of the defining convolution [h^power * k_sigma](x):
// mean of h(x - t)^power over n_samples draws t ~ N(0, sigma^2), plus the
// standard error of that mean. Deterministic for a given seed.
struct McEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  long n_samples = 0;
};

McEstimate mc_convolution_oracle(const DiffusedActivation& act, int power, double x,
                                 double sigma, long n_samples, std::uint64_t seed);

// Nodes and weights for an n-point Gauss-Hermite rule in "probabilists" form:
// integral f(t) N(t; 0, 1) dt ~= sum_i w_i f(t_i). Used by verification code
// that needs the true smoothed square where only an approximation ships.
struct GaussHermiteRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

GaussHermiteRule gauss_hermite(int n);

// High-accuracy quadrature of [h^power * k_sigma](x).
double quadrature_convolution(const DiffusedActivation& act, int power, double x, double sigma,
                              int n_points = 80);

}  // namespace diffrnn
