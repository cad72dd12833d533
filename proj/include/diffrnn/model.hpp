#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "diffrnn/activations.hpp"

namespace diffrnn {

struct Dims {
  int X = 1;  // input dimension
  int H = 1;  // hidden units
  int Y = 1;  // output dimension
  int T = 1;  // sequence length
  int S = 1;  // number of sequences

  void validate() const;
};

// The six learnable blocks of the recurrent network:
//   m_t = U x_t + V h~(m_{t-1}) + a,   n_t = W h~(m_t) + b,   m_0 given.
struct RnnParams {
  Eigen::VectorXd a;   // H, hidden bias
  Eigen::VectorXd b;   // Y, output bias
  Eigen::VectorXd m0;  // H, initial pre-activation state
  Eigen::MatrixXd U;   // H x X
  Eigen::MatrixXd V;   // H x H
  Eigen::MatrixXd W;   // Y x H

  int hidden() const { return static_cast<int>(a.size()); }
  int input() const { return static_cast<int>(U.cols()); }
  int output() const { return static_cast<int>(b.size()); }
  Eigen::Index size() const { return a.size() + b.size() + m0.size() + U.size() + V.size() + W.size(); }

  void check_shapes() const;
  bool all_finite() const;
};

enum class InitScheme { kZeros, kUniform, kScaledGaussian };

// Deterministic parameter init. kUniform draws from [-scale, scale],
// kScaledGaussian from N(0, scale^2); kZeros ignores scale.
RnnParams init_params(const Dims& dims, InitScheme scheme, double scale, std::uint64_t seed);

// Flatten in declared block order a, b, m0, U, V, W (matrices row-major).
Eigen::VectorXd param_vector(const RnnParams& params);
RnnParams params_from_vector(const Eigen::VectorXd& flat, const RnnParams& like);

// Human-readable name of a flat coordinate, e.g. "V[2,0]".
std::string param_coordinate_name(const RnnParams& like, Eigen::Index flat_index);

// Per-sequence forward results with the activation caches the cost and
// gradient reuse. Column t of m is m_t (column 0 = m0); column t of n is
// n_{t+1} in one-based time.
struct SeqTrace {
  Eigen::MatrixXd m, hm, dhm, h2m, dh2m;  // H x (T+1)
  Eigen::MatrixXd n, hn, dhn, h2n, dh2n;  // Y x T
};

struct ForwardTrace {
  double sigma = 0.0;
  std::vector<SeqTrace> seqs;
};

// Runs the smoothed recursion for every sequence. Inputs are one X x T
// matrix per sequence. Derivative caches hold NaN at isolated points where
// the derivative is undefined (only possible for Sign at sigma = 0); square
// caches are filled only when the activation has a smoothed-square form.
// Throws ShapeError on inconsistent shapes and NumericError (with the s, t
// location) if the recursion produces non-finite values.
ForwardTrace forward(const RnnParams& params, const std::vector<Eigen::MatrixXd>& inputs,
                     const DiffusedActivation& act, double sigma);

// Binary checkpoint with dims header and the six blocks in declared order;
// round-trips bit-exactly. Little-endian hosts only (asserted at compile time).
void save_checkpoint(const RnnParams& params, const std::string& path);
RnnParams load_checkpoint(const std::string& path);

}  // namespace diffrnn
