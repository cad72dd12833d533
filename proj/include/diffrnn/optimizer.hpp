#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "diffrnn/grad.hpp"
#include "diffrnn/model.hpp"
#include "diffrnn/tasks.hpp"

namespace diffrnn {

// Inner solver run at each bandwidth: gradient descent on the full set or
// seeded minibatch SGD, stopped by gradient tolerance or the epoch cap.
struct InnerPolicy {
  enum class Opt { kGd, kSgd };
  int max_epochs = 50;
  double grad_tolerance = 1e-4;  // on the per-sequence mean gradient norm
  Opt optimizer = Opt::kGd;
  int batch_size = 50;  // used by kSgd
};

// Strictly decreasing bandwidth ladder; the final entry may be 0.
struct ContinuationSchedule {
  std::vector<double> sigmas;
  InnerPolicy inner;

  // sigma0 * gamma^k for k = 0..stages-1, optionally followed by 0.
  static ContinuationSchedule geometric(double sigma0, double gamma, int stages,
                                        bool final_zero = true);
  void validate() const;
};

// Step size eta * sigma, clamped below so the sigma = 0 stage still moves.
struct StepRule {
  double eta = 0.1;
  bool normalize = true;  // step along g / ||g|| instead of g
  double floor = 1e-3;
};

double step_size(const StepRule& rule, double sigma);

struct TrainRow {
  int stage = 0;
  int epoch = 0;  // cumulative across stages
  double sigma = 0.0;
  double step = 0.0;
  double train_cost = 0.0;
  double test_mse = 0.0;  // NaN when no test set was given
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<TrainRow> rows;
  void write_csv(std::ostream& out) const;
  void write_csv(const std::string& path) const;
};

struct TrainResult {
  RnnParams params;
  TrainLog log;
  std::vector<RnnParams> stage_finals;  // continuation only: params after each stage
};

// The continuation loop: for each sigma_k in order, run the inner optimizer
// with step step_size(rule, sigma_k), warm-starting from the previous stage.
// Unnormalized steps use the per-sequence mean gradient. Stage k draws its
// minibatch shuffles from a sub-stream derived from (seed, k). Throws
// NumericError naming the stage and epoch if the cost or gradient turns
// non-finite.
TrainResult continuation_train(const RnnParams& initial, const SequenceDataset& train,
                               const DiffusedActivation& act, const ContinuationSchedule& schedule,
                               const StepRule& rule, double lambda, std::uint64_t seed,
                               const SequenceDataset* test = nullptr,
                               Supervision supervision = Supervision::kAllSteps);

// Plain minibatch SGD on the sigma = 0 objective: p -= lr * mean-gradient of
// the batch. batch_size must not exceed the dataset size; batch_size == S
// reproduces full-batch gradient descent.
TrainResult sgd_train(const RnnParams& initial, const SequenceDataset& train,
                      const DiffusedActivation& act, int batch_size, double lr, int epochs,
                      std::uint64_t seed, const SequenceDataset* test = nullptr,
                      Supervision supervision = Supervision::kAllSteps);

// Sampling estimate of the smoothed gradient: the average over n_samples of
// the sigma = 0 gradient taken at Gaussian-perturbed weights w - t_j,
// t_j ~ N(0, sigma^2 I). Converges (in n_samples) to the gradient of the
// exact smoothing of the sigma = 0 objective.
GradBlocks mc_diffused_gradient(const RnnParams& params, const SequenceDataset& data,
                                const DiffusedActivation& act, double sigma, double lambda,
                                long n_samples, std::uint64_t seed,
                                Supervision supervision = Supervision::kAllSteps);

// Tabulated functions on uniform grids plus discrete Gaussian smoothing with
// a truncated kernel and reflective padding; the demo behind the bandwidth
// sweep of a 1-D/2-D test surface.
struct Grid1D {
  double x0 = 0.0;
  double dx = 1.0;
  std::vector<double> values;
};

struct Grid2D {
  double x0 = 0.0, y0 = 0.0;
  double dx = 1.0, dy = 1.0;
  int nx = 0, ny = 0;
  std::vector<double> values;  // row-major, values[iy * nx + ix]

  double& at(int ix, int iy) { return values[static_cast<std::size_t>(iy) * nx + ix]; }
  double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * nx + ix]; }
};

// sigma = 0 returns the input unchanged. Throws ConfigError when the kernel
// radius would be under 3 cells (grid too coarse for sigma).
Grid1D grid_diffuse(const Grid1D& grid, double sigma);
Grid2D grid_diffuse(const Grid2D& grid, double sigma);

int count_local_minima(const Grid1D& grid);

double ackley1d(double x);
double ackley2d(double x, double y);
Grid1D tabulate_ackley1d(double lo, double hi, int n);
Grid2D tabulate_ackley2d(double lo, double hi, int n);

}  // namespace diffrnn
