#include "diffrnn/cost.hpp"

#include <cmath>

#include "diffrnn/errors.hpp"
#include "diffrnn/rng.hpp"

namespace diffrnn {

namespace {

void check_model_data(const RnnParams& params, const SequenceDataset& data) {
  params.check_shapes();
  data.check_consistent();
  if (data.size() == 0) return;
  if (data.input_dim() != params.input()) throw ShapeError("dataset X != params X");
  if (data.target_dim() != params.output()) throw ShapeError("dataset Y != params Y");
}

double step_weight(Supervision supervision, Eigen::Index t, Eigen::Index steps) {
  if (supervision == Supervision::kAllSteps) return 1.0;
  return t == steps - 1 ? 1.0 : 0.0;
}

}  // namespace

CostBreakdown diffused_cost_from_trace(const ForwardTrace& trace, const RnnParams& params,
                                       const SequenceDataset& data, const DiffusedActivation& act,
                                       double lambda, Supervision supervision) {
  check_model_data(params, data);
  if (trace.seqs.size() != data.inputs.size()) throw ShapeError("trace does not match dataset");
  if (lambda < 0.0) throw std::domain_error("lambda must be >= 0");
  const double sigma = trace.sigma;
  if (sigma > 0.0 && !act.has_sq_form())
    throw UnsupportedOperationError("smoothed cost at sigma > 0 needs a smoothed square for kind " +
                                    to_string(act.kind()));
  const Eigen::Index H = params.hidden();
  const Eigen::Index Y = params.output();
  // At sigma = 0 the variance and regularizer terms are identically zero.
  const bool degenerate = sigma == 0.0;

  // Column sums of the squared entries: ||A diag(d)||_F^2 = sum_j cA_j d_j^2.
  const Eigen::RowVectorXd col_w = params.W.array().square().colwise().sum();
  const Eigen::RowVectorXd col_v = params.V.array().square().colwise().sum();

  // Fixed reduction order (sequence-major, then time) in extended precision.
  long double fit = 0, variance = 0, w_reg = 0, v_reg = 0;
  for (std::size_t s = 0; s < trace.seqs.size(); ++s) {
    const SeqTrace& seq = trace.seqs[s];
    const Eigen::MatrixXd& y = data.targets[s];
    const Eigen::Index T = y.cols();
    for (Eigen::Index t = 1; t <= T; ++t) {
      const double w = step_weight(supervision, t - 1, T);
      if (w != 0.0) fit += w * (seq.hn.col(t - 1) - y.col(t - 1)).squaredNorm();
      if (degenerate) continue;
      if (w != 0.0)
        variance += w * (seq.h2n.col(t - 1) - seq.hn.col(t - 1).cwiseAbs2()).sum();
      const Eigen::VectorXd gap = seq.h2m.col(t) - seq.hm.col(t).cwiseAbs2();
      w_reg += col_w.dot(gap) +
               sigma * sigma * static_cast<double>(Y) * seq.hm.col(t).squaredNorm();
    }
    if (degenerate) continue;
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::VectorXd gap = seq.h2m.col(t) - seq.hm.col(t).cwiseAbs2();
      v_reg += col_v.dot(gap) +
               sigma * sigma * static_cast<double>(H) * seq.hm.col(t).squaredNorm();
    }
  }

  CostBreakdown out;
  out.fit = static_cast<double>(fit);
  out.variance = static_cast<double>(variance);
  out.w_reg = static_cast<double>(w_reg);
  out.v_reg = static_cast<double>(v_reg);
  out.lambda = lambda;
  out.sigma = sigma;
  out.total = out.fit + out.variance + lambda * (out.w_reg + out.v_reg);
  if (!std::isfinite(out.total)) throw NumericError("non-finite cost accumulation");
  return out;
}

CostBreakdown diffused_cost(const RnnParams& params, const SequenceDataset& data,
                            const DiffusedActivation& act, double sigma, double lambda,
                            Supervision supervision) {
  const ForwardTrace trace = forward(params, data.inputs, act, sigma);
  return diffused_cost_from_trace(trace, params, data, act, lambda, supervision);
}

double penalized_cost(const RnnParams& params, const std::vector<Eigen::MatrixXd>& aux_n,
                      const std::vector<Eigen::MatrixXd>& aux_m, const SequenceDataset& data,
                      const DiffusedActivation& act, double sigma, double lambda,
                      Supervision supervision) {
  check_model_data(params, data);
  if (aux_n.size() != data.inputs.size() || aux_m.size() != data.inputs.size())
    throw ShapeError("auxiliary variables must cover every sequence");
  if (sigma > 0.0 && !act.has_sq_form())
    throw UnsupportedOperationError("penalized cost at sigma > 0 needs a smoothed square");
  const bool degenerate = sigma == 0.0;
  const Eigen::Index H = params.hidden();
  const Eigen::Index Y = params.output();
  const Eigen::RowVectorXd col_w = params.W.array().square().colwise().sum();
  const Eigen::RowVectorXd col_v = params.V.array().square().colwise().sum();

  long double total = 0;
  for (std::size_t s = 0; s < data.inputs.size(); ++s) {
    const Eigen::MatrixXd& x = data.inputs[s];
    const Eigen::MatrixXd& y = data.targets[s];
    const Eigen::Index T = x.cols();
    if (aux_n[s].rows() != Y || aux_n[s].cols() != T || aux_m[s].rows() != H ||
        aux_m[s].cols() != T)
      throw ShapeError("auxiliary shapes must be Y x T and H x T at sequence " +
                       std::to_string(s));

    // m-column t (0-based) of the extended state: t = 0 is params.m0.
    auto m_col = [&](Eigen::Index t) -> Eigen::VectorXd {
      return t == 0 ? params.m0 : aux_m[s].col(t - 1);
    };
    // The variance gap h2~ - h~^2 is identically zero at sigma = 0.
    auto gap_of = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& hv) -> Eigen::VectorXd {
      if (degenerate) return Eigen::VectorXd::Zero(v.size());
      return act.diffused_sq(v, sigma) - hv.cwiseAbs2();
    };

    for (Eigen::Index t = 1; t <= T; ++t) {
      const Eigen::VectorXd n_t = aux_n[s].col(t - 1);
      const Eigen::VectorXd m_t = m_col(t);
      const Eigen::VectorXd hn = act.diffused(n_t, sigma);
      const Eigen::VectorXd hm = act.diffused(m_t, sigma);
      const Eigen::VectorXd hm_prev = act.diffused(m_col(t - 1), sigma);

      const double w = step_weight(supervision, t - 1, T);
      total += w * ((hn - y.col(t - 1)).squaredNorm() + gap_of(n_t, hn).sum());
      total += lambda * (params.W * hm + params.b - n_t).squaredNorm();
      total += lambda *
               (params.U * x.col(t - 1) + params.V * hm_prev + params.a - m_t).squaredNorm();
      total += lambda * (col_w.dot(gap_of(m_t, hm)) +
                         sigma * sigma * static_cast<double>(Y) * hm.squaredNorm());
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::VectorXd m_t = m_col(t);
      const Eigen::VectorXd hm = act.diffused(m_t, sigma);
      total += lambda * (col_v.dot(gap_of(m_t, hm)) +
                         sigma * sigma * static_cast<double>(H) * hm.squaredNorm());
    }
  }
  const auto result = static_cast<double>(total);
  if (!std::isfinite(result)) throw NumericError("non-finite penalized cost");
  return result;
}

double evaluate_mse(const RnnParams& params, const SequenceDataset& data,
                    const DiffusedActivation& act, Supervision supervision) {
  check_model_data(params, data);
  if (data.size() == 0) throw ShapeError("cannot evaluate on an empty dataset");
  const ForwardTrace trace = forward(params, data.inputs, act, 0.0);
  long double sum = 0;
  long count = 0;
  for (std::size_t s = 0; s < trace.seqs.size(); ++s) {
    const Eigen::MatrixXd& y = data.targets[s];
    const Eigen::Index T = y.cols();
    for (Eigen::Index t = 0; t < T; ++t) {
      if (step_weight(supervision, t, T) == 0.0) continue;
      sum += (trace.seqs[s].hn.col(t) - y.col(t)).squaredNorm();
      ++count;
    }
  }
  return static_cast<double>(sum / count);
}

bool SmoothingIdentityReport::dot_within(double k_sigmas) const {
  return std::abs(dot_mc - dot_closed) <= k_sigmas * dot_std_err;
}

bool SmoothingIdentityReport::act_within(double k_sigmas) const {
  return std::abs(act_mc - act_closed) <= k_sigmas * act_std_err;
}

SmoothingIdentityReport quadratic_smoothing_identity_check(
    const Eigen::MatrixXd& A, const Eigen::VectorXd& offset, const Eigen::VectorXd& y,
    const Eigen::VectorXd& x, const DiffusedActivation& act, double sigma, long n_samples,
    std::uint64_t seed) {
  if (x.size() > 8 || y.size() > 8 || A.rows() > 8 || A.cols() > 8)
    throw ShapeError("identity check is limited to dims <= 8");
  if (y.size() != x.size() || A.cols() != x.size() || offset.size() != A.rows())
    throw ShapeError("identity check shapes are inconsistent");
  if (!(sigma > 0.0)) throw std::domain_error("identity check requires sigma > 0");
  if (n_samples < 1000) throw std::domain_error("identity check needs at least 1000 samples");

  const Eigen::Index n = x.size();
  SmoothingIdentityReport report;
  report.dot_closed = std::pow(x.dot(y), 2) + sigma * sigma * y.squaredNorm();

  {
    Rng rng(seed);
    long double sum = 0, sum_sq = 0;
    for (long j = 0; j < n_samples; ++j) {
      Eigen::VectorXd t(n);
      for (Eigen::Index i = 0; i < n; ++i) t[i] = sigma * rng.normal();
      const double v = std::pow((x - t).dot(y), 2);
      sum += v;
      sum_sq += v * v;
    }
    const auto count = static_cast<long double>(n_samples);
    report.dot_mc = static_cast<double>(sum / count);
    const long double var = std::max<long double>(
        0, (sum_sq - count * (sum / count) * (sum / count)) / (count - 1));
    report.dot_std_err = static_cast<double>(std::sqrt(static_cast<double>(var / count)));
  }

  // Right side of identity (2) with the exact smoothed square by quadrature.
  {
    Eigen::VectorXd h_mean(n), h_sq(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      h_mean[i] = act.diffused(x[i], sigma);
      h_sq[i] = quadrature_convolution(act, 2, x[i], sigma);
    }
    const Eigen::RowVectorXd col_a = A.array().square().colwise().sum();
    report.act_closed = (A * h_mean + offset).squaredNorm() +
                        col_a.dot(h_sq - h_mean.cwiseAbs2());

    Rng rng(derive_seed(seed, 1));
    long double sum = 0, sum_sq = 0;
    Eigen::VectorXd h(n);
    for (long j = 0; j < n_samples; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) h[i] = act.original(x[i] - sigma * rng.normal());
      const double v = (A * h + offset).squaredNorm();
      sum += v;
      sum_sq += v * v;
    }
    const auto count = static_cast<long double>(n_samples);
    report.act_mc = static_cast<double>(sum / count);
    const long double var = std::max<long double>(
        0, (sum_sq - count * (sum / count) * (sum / count)) / (count - 1));
    report.act_std_err = static_cast<double>(std::sqrt(static_cast<double>(var / count)));
  }
  return report;
}

}  // namespace diffrnn
