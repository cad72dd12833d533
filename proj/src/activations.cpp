#include "diffrnn/activations.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "diffrnn/errors.hpp"
#include "diffrnn/rng.hpp"

namespace diffrnn {

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrtPi = std::sqrt(kPi);
const double kSqrt2 = std::sqrt(2.0);

void check_point(double x, double sigma) {
  if (!std::isfinite(x)) throw std::domain_error("activation input is not finite");
  if (!std::isfinite(sigma) || sigma < 0.0)
    throw std::domain_error("bandwidth sigma must be finite and >= 0");
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::string to_string(ActKind kind) {
  switch (kind) {
    case ActKind::kSign: return "sign";
    case ActKind::kErf: return "erf";
    case ActKind::kTanh: return "tanh";
    case ActKind::kRelu: return "relu";
  }
  return "?";
}

DiffusedActivation DiffusedActivation::erf(double sharpness) {
  if (!std::isfinite(sharpness) || sharpness <= 0.0)
    throw std::domain_error("erf sharpness must be finite and > 0");
  return DiffusedActivation(ActKind::kErf, sharpness);
}

DiffusedActivation DiffusedActivation::of(ActKind kind, double sharpness) {
  switch (kind) {
    case ActKind::kSign: return sign();
    case ActKind::kErf: return erf(sharpness);
    case ActKind::kTanh: return tanh();
    case ActKind::kRelu: return relu();
  }
  throw std::domain_error("unknown activation kind");
}

double DiffusedActivation::diffused(double x, double sigma) const {
  check_point(x, sigma);
  switch (kind_) {
    case ActKind::kSign:
      if (sigma == 0.0) return sign_of(x);
      return std::erf(x / (kSqrt2 * sigma));
    case ActKind::kErf: {
      const double b = sharpness_ / std::sqrt(1.0 + 2.0 * sharpness_ * sharpness_ * sigma * sigma);
      return std::erf(b * x);
    }
    case ActKind::kTanh:
      return std::tanh(x / std::sqrt(1.0 + 0.5 * kPi * sigma * sigma));
    case ActKind::kRelu:
      if (sigma == 0.0) return x > 0.0 ? x : 0.0;
      return sigma / std::sqrt(2.0 * kPi) * std::exp(-x * x / (2.0 * sigma * sigma)) +
             0.5 * x * (1.0 + std::erf(x / (kSqrt2 * sigma)));
  }
  throw std::domain_error("unknown activation kind");
}

double DiffusedActivation::diffused_sq(double x, double sigma) const {
  check_point(x, sigma);
  switch (kind_) {
    case ActKind::kSign: {
      if (sigma == 0.0) return x == 0.0 ? 0.0 : 1.0;
      const double a = kSignSharpness;
      return 1.0 - std::exp(-x * x / (2.0 * sigma * sigma)) *
                       std::sqrt(kPi / (kPi + 8.0 * a * a * sigma * sigma));
    }
    case ActKind::kErf: {
      const double a = sharpness_;
      if (sigma == 0.0) {
        const double e = std::erf(a * x);
        return e * e;
      }
      const double denom = kPi + 8.0 * a * a * sigma * sigma;
      return 1.0 - kSqrtPi * std::exp(-4.0 * a * a * x * x / denom) / std::sqrt(denom);
    }
    default:
      throw UnsupportedOperationError("diffused square has no closed form for kind " +
                                      to_string(kind_));
  }
}

double DiffusedActivation::diffused_deriv(double x, double sigma) const {
  const double d = diffused_deriv_or_nan(x, sigma);
  if (std::isnan(d))
    throw std::domain_error("derivative undefined at x = " + std::to_string(x) +
                            " for kind " + to_string(kind_) + " at sigma = 0");
  return d;
}

double DiffusedActivation::diffused_deriv_or_nan(double x, double sigma) const {
  check_point(x, sigma);
  switch (kind_) {
    case ActKind::kSign:
      if (sigma == 0.0)
        return x == 0.0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
      return std::sqrt(2.0 / kPi) / sigma * std::exp(-x * x / (2.0 * sigma * sigma));
    case ActKind::kErf: {
      const double b = sharpness_ / std::sqrt(1.0 + 2.0 * sharpness_ * sharpness_ * sigma * sigma);
      return 2.0 * b / kSqrtPi * std::exp(-(b * x) * (b * x));
    }
    case ActKind::kTanh: {
      const double c = std::sqrt(1.0 + 0.5 * kPi * sigma * sigma);
      const double t = std::tanh(x / c);
      return (1.0 - t * t) / c;
    }
    case ActKind::kRelu:
      // sigma -> 0 limit at the kink is 1/2, the midpoint convention.
      if (sigma == 0.0) return x > 0.0 ? 1.0 : (x < 0.0 ? 0.0 : 0.5);
      return 0.5 * (1.0 + std::erf(x / (kSqrt2 * sigma)));
  }
  throw std::domain_error("unknown activation kind");
}

double DiffusedActivation::diffused_sq_deriv(double x, double sigma) const {
  check_point(x, sigma);
  switch (kind_) {
    case ActKind::kSign: {
      if (sigma == 0.0) return 0.0;  // h^2 == 1 almost everywhere
      const double a = kSignSharpness;
      return std::sqrt(kPi / (kPi + 8.0 * a * a * sigma * sigma)) * (x / (sigma * sigma)) *
             std::exp(-x * x / (2.0 * sigma * sigma));
    }
    case ActKind::kErf: {
      const double a = sharpness_;
      if (sigma == 0.0) {
        const double e = std::erf(a * x);
        return 2.0 * e * 2.0 * a / kSqrtPi * std::exp(-(a * x) * (a * x));
      }
      const double denom = kPi + 8.0 * a * a * sigma * sigma;
      return 8.0 * a * a * kSqrtPi * x * std::exp(-4.0 * a * a * x * x / denom) /
             (denom * std::sqrt(denom));
    }
    default:
      throw UnsupportedOperationError("diffused square has no closed form for kind " +
                                      to_string(kind_));
  }
}

namespace {

template <typename F>
Eigen::VectorXd map_vector(const Eigen::VectorXd& x, F&& f) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

}  // namespace

Eigen::VectorXd DiffusedActivation::diffused(const Eigen::VectorXd& x, double sigma) const {
  return map_vector(x, [&](double v) { return diffused(v, sigma); });
}
Eigen::VectorXd DiffusedActivation::diffused_sq(const Eigen::VectorXd& x, double sigma) const {
  return map_vector(x, [&](double v) { return diffused_sq(v, sigma); });
}
Eigen::VectorXd DiffusedActivation::diffused_deriv(const Eigen::VectorXd& x, double sigma) const {
  return map_vector(x, [&](double v) { return diffused_deriv(v, sigma); });
}
Eigen::VectorXd DiffusedActivation::diffused_sq_deriv(const Eigen::VectorXd& x,
                                                      double sigma) const {
  return map_vector(x, [&](double v) { return diffused_sq_deriv(v, sigma); });
}

McEstimate mc_convolution_oracle(const DiffusedActivation& act, int power, double x, double sigma,
                                 long n_samples, std::uint64_t seed) {
  if (power != 1 && power != 2) throw std::domain_error("oracle power must be 1 or 2");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::domain_error("oracle requires sigma > 0");
  if (!std::isfinite(x)) throw std::domain_error("oracle point is not finite");
  if (n_samples < 1000) throw std::domain_error("oracle needs at least 1000 samples");

  Rng rng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (long j = 0; j < n_samples; ++j) {
    const double t = sigma * rng.normal();
    double v = act.original(x - t);
    if (power == 2) v *= v;
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return McEstimate{mean, std::sqrt(var / n), n_samples};
}

GaussHermiteRule gauss_hermite(int n) {
  if (n < 1) throw std::domain_error("gauss_hermite needs n >= 1");
  // Golub-Welsch on the Jacobi matrix of the (probabilists') Hermite
  // recurrence: off-diagonals sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double off = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  GaussHermiteRule rule;
  rule.nodes = solver.eigenvalues();
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double first = solver.eigenvectors()(0, i);
    rule.weights[i] = first * first;  // weights sum to 1 for the N(0,1) measure
  }
  return rule;
}

double quadrature_convolution(const DiffusedActivation& act, int power, double x, double sigma,
                              int n_points) {
  if (power != 1 && power != 2) throw std::domain_error("power must be 1 or 2");
  if (sigma == 0.0) {
    const double v = act.original(x);
    return power == 2 ? v * v : v;
  }
  const GaussHermiteRule rule = gauss_hermite(n_points);
  double sum = 0.0;
  for (int i = 0; i < rule.nodes.size(); ++i) {
    double v = act.original(x - sigma * rule.nodes[i]);
    if (power == 2) v *= v;
    sum += rule.weights[i] * v;
  }
  return sum;
}

}  // namespace diffrnn
