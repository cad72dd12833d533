#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "diffrnn/cost.hpp"
#include "diffrnn/model.hpp"

namespace diffrnn {

// Gradient of the smoothed cost for the six parameter blocks; shapes mirror
// RnnParams.
struct GradBlocks {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd m0;
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;
  Eigen::MatrixXd W;

  static GradBlocks zeros_like(const RnnParams& params);
  Eigen::VectorXd flat() const;
  double norm() const { return flat().norm(); }
};

// Closed-form gradient of diffused_cost(...).total, accumulated in reverse
// over the smoothed recursion (O(T H (H + X)) per sequence), summed over all
// sequences. Matches central finite differences of the cost.
GradBlocks gradient(const RnnParams& params, const SequenceDataset& data,
                    const DiffusedActivation& act, double sigma, double lambda,
                    Supervision supervision = Supervision::kAllSteps);

// Literal forward-mode transcription of the per-coordinate recursions
// (the chain matrices M_t, the per-row sensitivity stacks for V and U, and
// the m0 chain Q_t), kept as a correctness oracle. Same value as gradient().
// Refuses instances with H * max(X, H) * T > 10000: it materializes H
// sensitivity matrices per step.
GradBlocks gradient_reference(const RnnParams& params, const SequenceDataset& data,
                              const DiffusedActivation& act, double sigma, double lambda,
                              Supervision supervision = Supervision::kAllSteps);

// Central-finite-difference comparison report. If the instance has more than
// max_coordinates coordinates, a seeded random subset is checked. A coordinate
// counts as clean when |analytic - numeric| <= abs_floor; otherwise its score
// is |analytic - numeric| / max(|analytic|, |numeric|).
struct FdReport {
  double max_rel_err = 0.0;
  std::string worst_coordinate;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int n_checked = 0;
  double step = 0.0;
  double sigma = 0.0;
  double lambda = 0.0;

  std::string to_json_line() const;  // one JSON object per line, CI-friendly
};

FdReport fd_check(const RnnParams& params, const SequenceDataset& data,
                  const DiffusedActivation& act, double sigma, double lambda,
                  double step = 1e-5, std::uint64_t seed = 0,
                  Supervision supervision = Supervision::kAllSteps,
                  int max_coordinates = 1000, double abs_floor = 1e-7);

// Compares a caller-supplied gradient against finite differences; fd_check is
// this applied to gradient(). Lets harnesses inject deliberate faults.
FdReport compare_to_fd(const GradBlocks& analytic, const RnnParams& params,
                       const SequenceDataset& data, const DiffusedActivation& act, double sigma,
                       double lambda, double step = 1e-5, std::uint64_t seed = 0,
                       Supervision supervision = Supervision::kAllSteps,
                       int max_coordinates = 1000, double abs_floor = 1e-7);

}  // namespace diffrnn
