#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "diffrnn/activations.hpp"
#include "diffrnn/model.hpp"
#include "diffrnn/tasks.hpp"

namespace diffrnn {

// Which output steps carry the discrepancy term. kLastStep keeps only t = T;
// the smoothing-induced regularizers on the recursion are unaffected.
enum class Supervision { kAllSteps, kLastStep };

// The smoothed training objective split into its terms:
//   total = fit + variance + lambda * (w_reg + v_reg)
// fit       sum_{s,t} ||h~(n_{s,t}) - y_{s,t}||^2
// variance  sum_{s,t} sum_i (h2~(n)_i - h~(n)_i^2)
// w_reg     sum_{s,t=1..T} ||W diag(sqrt(h2~(m_t)))||_F^2 - ||W diag(h~(m_t))||_F^2
//                          + sigma^2 Y ||h~(m_t)||^2
// v_reg     the same with V and sigma^2 H over t = 0..T-1
// At sigma = 0 every term except fit vanishes identically.
struct CostBreakdown {
  double fit = 0.0;
  double variance = 0.0;
  double w_reg = 0.0;
  double v_reg = 0.0;
  double total = 0.0;
  double lambda = 0.0;
  double sigma = 0.0;
};

CostBreakdown diffused_cost(const RnnParams& params, const SequenceDataset& data,
                            const DiffusedActivation& act, double sigma, double lambda,
                            Supervision supervision = Supervision::kAllSteps);

// Same value computed from an existing forward trace (must match data).
CostBreakdown diffused_cost_from_trace(const ForwardTrace& trace, const RnnParams& params,
                                       const SequenceDataset& data, const DiffusedActivation& act,
                                       double lambda,
                                       Supervision supervision = Supervision::kAllSteps);

// The smoothed objective with free auxiliary variables n, m and quadratic
// penalty residuals. aux_n[s] is Y x T, aux_m[s] is H x T (time steps
// 1..T; m_0 comes from params). When the auxiliaries satisfy the recursion
// the residuals vanish and this equals diffused_cost(...).total.
double penalized_cost(const RnnParams& params, const std::vector<Eigen::MatrixXd>& aux_n,
                      const std::vector<Eigen::MatrixXd>& aux_m, const SequenceDataset& data,
                      const DiffusedActivation& act, double sigma, double lambda,
                      Supervision supervision = Supervision::kAllSteps);

// Mean squared error of the unsmoothed network against targets; the usual
// evaluation metric. kLastStep averages ||h(n_T) - y_T||^2 over sequences,
// kAllSteps averages over sequences and steps.
double evaluate_mse(const RnnParams& params, const SequenceDataset& data,
                    const DiffusedActivation& act,
                    Supervision supervision = Supervision::kLastStep);

// Monte-Carlo verification of the two quadratic smoothing identities:
//  (1) [(.^T y)^2 * k_sigma](x) = (x^T y)^2 + sigma^2 ||y||^2
//  (2) [||A h(.) + c||^2 * k_sigma](x) = ||A h~(x) + c||^2
//        + ||A diag(sqrt(h2~(x)))||_F^2 - ||A diag(h~(x))||_F^2
// The right side of (2) uses the exact smoothed square obtained by
// quadrature, so the check verifies the identity itself rather than the
// module's approximate closed form. Dimensions are capped at 8.
struct SmoothingIdentityReport {
  double dot_mc = 0.0, dot_std_err = 0.0, dot_closed = 0.0;
  double act_mc = 0.0, act_std_err = 0.0, act_closed = 0.0;
  bool dot_within(double k_sigmas) const;
  bool act_within(double k_sigmas) const;
};

SmoothingIdentityReport quadratic_smoothing_identity_check(
    const Eigen::MatrixXd& A, const Eigen::VectorXd& offset, const Eigen::VectorXd& y,
    const Eigen::VectorXd& x, const DiffusedActivation& act, double sigma, long n_samples,
    std::uint64_t seed);

}  // namespace diffrnn
