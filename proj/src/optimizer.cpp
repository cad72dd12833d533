#include "diffrnn/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "diffrnn/cost.hpp"
#include "diffrnn/errors.hpp"
#include "diffrnn/rng.hpp"

namespace diffrnn {

ContinuationSchedule ContinuationSchedule::geometric(double sigma0, double gamma, int stages,
                                                     bool final_zero) {
  if (!(sigma0 > 0.0) || !(gamma > 0.0) || gamma >= 1.0 || stages < 1)
    throw ConfigError("geometric schedule needs sigma0 > 0, 0 < gamma < 1, stages >= 1");
  ContinuationSchedule schedule;
  double sigma = sigma0;
  for (int k = 0; k < stages; ++k, sigma *= gamma) schedule.sigmas.push_back(sigma);
  if (final_zero) schedule.sigmas.push_back(0.0);
  return schedule;
}

void ContinuationSchedule::validate() const {
  if (sigmas.empty()) throw ConfigError("schedule has no stages");
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    if (!std::isfinite(sigmas[k]) || sigmas[k] < 0.0)
      throw ConfigError("schedule sigmas must be finite and >= 0");
    if (k > 0 && !(sigmas[k] < sigmas[k - 1]))
      throw ConfigError("schedule sigmas must be strictly decreasing");
  }
  if (inner.max_epochs < 1) throw ConfigError("inner max_epochs must be >= 1");
  if (inner.grad_tolerance < 0.0) throw ConfigError("grad tolerance must be >= 0");
  if (inner.optimizer == InnerPolicy::Opt::kSgd && inner.batch_size < 1)
    throw ConfigError("batch size must be >= 1");
}

double step_size(const StepRule& rule, double sigma) {
  if (!(rule.eta > 0.0) || !(rule.floor > 0.0))
    throw ConfigError("step rule needs eta > 0 and floor > 0");
  return std::max(rule.eta * sigma, rule.floor);
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "stage,epoch,sigma,step,train_cost,test_mse,grad_norm,wall_ms\n";
  out.precision(17);
  for (const TrainRow& row : rows) {
    out << row.stage << ',' << row.epoch << ',' << row.sigma << ',' << row.step << ','
        << row.train_cost << ',' << row.test_mse << ',' << row.grad_norm << ',' << row.wall_ms
        << '\n';
  }
}

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open log for writing: " + path);
  write_csv(out);
  if (!out) throw DataError("failed writing log: " + path);
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void axpy(RnnParams& params, double scale, const GradBlocks& g) {
  params.a += scale * g.a;
  params.b += scale * g.b;
  params.m0 += scale * g.m0;
  params.U += scale * g.U;
  params.V += scale * g.V;
  params.W += scale * g.W;
}

SequenceDataset subset(const SequenceDataset& data, const std::vector<int>& order, int offset,
                       int count) {
  SequenceDataset batch;
  batch.task = data.task;
  batch.seed = data.seed;
  for (int i = 0; i < count; ++i) {
    const int idx = order[offset + i];
    batch.inputs.push_back(data.inputs[idx]);
    batch.targets.push_back(data.targets[idx]);
  }
  return batch;
}

// One descent update from gradient g of `count` sequences.
void apply_update(RnnParams& params, const GradBlocks& g, double step, bool normalize,
                  int count) {
  if (normalize) {
    const double norm = g.norm();
    if (norm > 0.0) axpy(params, -step / norm, g);
  } else {
    axpy(params, -step / static_cast<double>(count), g);
  }
}

struct EpochStats {
  double train_cost = 0.0;
  double grad_norm = 0.0;  // per-sequence mean gradient norm
};

EpochStats full_stats(const RnnParams& params, const SequenceDataset& train,
                      const DiffusedActivation& act, double sigma, double lambda,
                      Supervision supervision) {
  EpochStats stats;
  stats.train_cost = diffused_cost(params, train, act, sigma, lambda, supervision).total;
  stats.grad_norm =
      gradient(params, train, act, sigma, lambda, supervision).norm() / train.size();
  return stats;
}

}  // namespace

TrainResult continuation_train(const RnnParams& initial, const SequenceDataset& train,
                               const DiffusedActivation& act, const ContinuationSchedule& schedule,
                               const StepRule& rule, double lambda, std::uint64_t seed,
                               const SequenceDataset* test, Supervision supervision) {
  schedule.validate();
  train.check_consistent();
  if (schedule.inner.optimizer == InnerPolicy::Opt::kSgd &&
      schedule.inner.batch_size > train.size())
    throw ConfigError("batch size exceeds training set size");

  const auto start = Clock::now();
  TrainResult result;
  result.params = initial;
  int epoch_total = 0;

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t k = 0; k < schedule.sigmas.size(); ++k) {
    const double sigma = schedule.sigmas[k];
    const double step = step_size(rule, sigma);
    Rng stage_rng(derive_seed(seed, k));

    for (int epoch = 0; epoch < schedule.inner.max_epochs; ++epoch) {
      try {
        if (schedule.inner.optimizer == InnerPolicy::Opt::kGd) {
          const GradBlocks g = gradient(result.params, train, act, sigma, lambda, supervision);
          apply_update(result.params, g, step, rule.normalize, train.size());
        } else {
          stage_rng.shuffle(order);
          const int batch = schedule.inner.batch_size;
          for (int offset = 0; offset < train.size(); offset += batch) {
            const int count = std::min(batch, train.size() - offset);
            const GradBlocks g = gradient(result.params, subset(train, order, offset, count), act,
                                          sigma, lambda, supervision);
            apply_update(result.params, g, step, rule.normalize, count);
          }
        }
        if (!result.params.all_finite()) throw NumericError("parameters diverged");

        ++epoch_total;
        const EpochStats stats =
            full_stats(result.params, train, act, sigma, lambda, supervision);
        TrainRow row;
        row.stage = static_cast<int>(k);
        row.epoch = epoch_total;
        row.sigma = sigma;
        row.step = step;
        row.train_cost = stats.train_cost;
        row.grad_norm = stats.grad_norm;
        row.test_mse = test != nullptr ? evaluate_mse(result.params, *test, act)
                                       : std::numeric_limits<double>::quiet_NaN();
        row.wall_ms = ms_since(start);
        result.log.rows.push_back(row);
        if (stats.grad_norm <= schedule.inner.grad_tolerance) break;
      } catch (const NumericError& err) {
        throw NumericError("divergence at stage " + std::to_string(k) + ", epoch " +
                           std::to_string(epoch + 1) + ": " + err.what());
      }
    }
    result.stage_finals.push_back(result.params);
  }
  return result;
}

TrainResult sgd_train(const RnnParams& initial, const SequenceDataset& train,
                      const DiffusedActivation& act, int batch_size, double lr, int epochs,
                      std::uint64_t seed, const SequenceDataset* test, Supervision supervision) {
  train.check_consistent();
  if (batch_size < 1 || batch_size > train.size())
    throw ConfigError("batch size must be in [1, S]");
  if (epochs < 0 || lr < 0.0) throw ConfigError("epochs and lr must be >= 0");

  const auto start = Clock::now();
  TrainResult result;
  result.params = initial;

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0));

  for (int epoch = 0; epoch < epochs; ++epoch) {
    try {
      rng.shuffle(order);
      for (int offset = 0; offset < train.size(); offset += batch_size) {
        const int count = std::min(batch_size, train.size() - offset);
        const GradBlocks g = gradient(result.params, subset(train, order, offset, count), act,
                                      0.0, 0.0, supervision);
        axpy(result.params, -lr / static_cast<double>(count), g);
      }
      if (!result.params.all_finite()) throw NumericError("parameters diverged");

      const EpochStats stats = full_stats(result.params, train, act, 0.0, 0.0, supervision);
      TrainRow row;
      row.stage = 0;
      row.epoch = epoch + 1;
      row.sigma = 0.0;
      row.step = lr;
      row.train_cost = stats.train_cost;
      row.grad_norm = stats.grad_norm;
      row.test_mse = test != nullptr ? evaluate_mse(result.params, *test, act)
                                     : std::numeric_limits<double>::quiet_NaN();
      row.wall_ms = ms_since(start);
      result.log.rows.push_back(row);
    } catch (const NumericError& err) {
      throw NumericError("divergence at epoch " + std::to_string(epoch + 1) + ": " + err.what());
    }
  }
  return result;
}

GradBlocks mc_diffused_gradient(const RnnParams& params, const SequenceDataset& data,
                                const DiffusedActivation& act, double sigma, double lambda,
                                long n_samples, std::uint64_t seed, Supervision supervision) {
  if (n_samples < 1) throw ConfigError("need at least one sample");
  if (!(sigma > 0.0)) throw std::domain_error("noise-injection oracle requires sigma > 0");

  const Eigen::VectorXd base = param_vector(params);
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(base.size());
  Eigen::VectorXd noise(base.size());
  for (long j = 0; j < n_samples; ++j) {
    // Per-sample sub-stream so sample j is identical regardless of execution
    // layout.
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = sigma * rng.normal();
    const RnnParams perturbed = params_from_vector(base - noise, params);
    accum += gradient(perturbed, data, act, 0.0, lambda, supervision).flat();
  }
  accum /= static_cast<double>(n_samples);
  GradBlocks g = GradBlocks::zeros_like(params);
  RnnParams shaped = params_from_vector(accum, params);
  g.a = shaped.a;
  g.b = shaped.b;
  g.m0 = shaped.m0;
  g.U = shaped.U;
  g.V = shaped.V;
  g.W = shaped.W;
  return g;
}

namespace {

// Normalized truncated Gaussian taps; radius 4 sigma in cells.
std::vector<double> kernel_taps(double sigma, double cell, const char* what) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma / cell));
  if (radius < 3)
    throw ConfigError(std::string(what) + ": grid too coarse for sigma (kernel radius " +
                      std::to_string(radius) + " cells, need >= 3)");
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double u = i * cell / sigma;
    taps[i + radius] = std::exp(-0.5 * u * u);
    sum += taps[i + radius];
  }
  for (double& tap : taps) tap /= sum;
  return taps;
}

int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

std::vector<double> convolve_line(const std::vector<double>& line,
                                  const std::vector<double>& taps) {
  const int n = static_cast<int>(line.size());
  const int radius = (static_cast<int>(taps.size()) - 1) / 2;
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k)
      sum += taps[k + radius] * line[reflect_index(i + k, n)];
    out[i] = sum;
  }
  return out;
}

}  // namespace

Grid1D grid_diffuse(const Grid1D& grid, double sigma) {
  if (grid.values.empty() || !(grid.dx > 0.0)) throw ConfigError("empty or invalid 1-D grid");
  if (!std::isfinite(sigma) || sigma < 0.0) throw ConfigError("sigma must be >= 0");
  if (sigma == 0.0) return grid;
  Grid1D out = grid;
  out.values = convolve_line(grid.values, kernel_taps(sigma, grid.dx, "grid_diffuse"));
  return out;
}

Grid2D grid_diffuse(const Grid2D& grid, double sigma) {
  if (grid.nx < 1 || grid.ny < 1 ||
      grid.values.size() != static_cast<std::size_t>(grid.nx) * grid.ny)
    throw ConfigError("empty or invalid 2-D grid");
  if (!std::isfinite(sigma) || sigma < 0.0) throw ConfigError("sigma must be >= 0");
  if (sigma == 0.0) return grid;
  const std::vector<double> taps_x = kernel_taps(sigma, grid.dx, "grid_diffuse");
  const std::vector<double> taps_y = kernel_taps(sigma, grid.dy, "grid_diffuse");

  Grid2D out = grid;
  std::vector<double> line;
  for (int iy = 0; iy < grid.ny; ++iy) {  // rows first
    line.assign(grid.values.begin() + static_cast<std::size_t>(iy) * grid.nx,
                grid.values.begin() + static_cast<std::size_t>(iy + 1) * grid.nx);
    const std::vector<double> smoothed = convolve_line(line, taps_x);
    std::copy(smoothed.begin(), smoothed.end(),
              out.values.begin() + static_cast<std::size_t>(iy) * grid.nx);
  }
  for (int ix = 0; ix < grid.nx; ++ix) {  // then columns
    line.resize(grid.ny);
    for (int iy = 0; iy < grid.ny; ++iy) line[iy] = out.at(ix, iy);
    const std::vector<double> smoothed = convolve_line(line, taps_y);
    for (int iy = 0; iy < grid.ny; ++iy) out.at(ix, iy) = smoothed[iy];
  }
  return out;
}

int count_local_minima(const Grid1D& grid) {
  int count = 0;
  for (std::size_t i = 1; i + 1 < grid.values.size(); ++i) {
    if (grid.values[i] < grid.values[i - 1] && grid.values[i] < grid.values[i + 1]) ++count;
  }
  return count;
}

double ackley1d(double x) {
  constexpr double kA = 20.0, kB = 0.2, kC = 2.0 * std::numbers::pi;
  return -kA * std::exp(-kB * std::abs(x)) - std::exp(std::cos(kC * x)) + kA + std::numbers::e;
}

double ackley2d(double x, double y) {
  constexpr double kA = 20.0, kB = 0.2, kC = 2.0 * std::numbers::pi;
  const double mean_sq = 0.5 * (x * x + y * y);
  const double mean_cos = 0.5 * (std::cos(kC * x) + std::cos(kC * y));
  return -kA * std::exp(-kB * std::sqrt(mean_sq)) - std::exp(mean_cos) + kA + std::numbers::e;
}

Grid1D tabulate_ackley1d(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw ConfigError("need n >= 2 grid points and hi > lo");
  Grid1D grid;
  grid.x0 = lo;
  grid.dx = (hi - lo) / (n - 1);
  grid.values.resize(n);
  for (int i = 0; i < n; ++i) grid.values[i] = ackley1d(lo + i * grid.dx);
  return grid;
}

Grid2D tabulate_ackley2d(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw ConfigError("need n >= 2 grid points and hi > lo");
  Grid2D grid;
  grid.x0 = grid.y0 = lo;
  grid.dx = grid.dy = (hi - lo) / (n - 1);
  grid.nx = grid.ny = n;
  grid.values.resize(static_cast<std::size_t>(n) * n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      grid.at(ix, iy) = ackley2d(lo + ix * grid.dx, lo + iy * grid.dy);
  return grid;
}

}  // namespace diffrnn
