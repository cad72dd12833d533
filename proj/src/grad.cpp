#include "diffrnn/grad.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "diffrnn/errors.hpp"
#include "diffrnn/rng.hpp"

namespace diffrnn {

GradBlocks GradBlocks::zeros_like(const RnnParams& params) {
  GradBlocks g;
  g.a = Eigen::VectorXd::Zero(params.a.size());
  g.b = Eigen::VectorXd::Zero(params.b.size());
  g.m0 = Eigen::VectorXd::Zero(params.m0.size());
  g.U = Eigen::MatrixXd::Zero(params.U.rows(), params.U.cols());
  g.V = Eigen::MatrixXd::Zero(params.V.rows(), params.V.cols());
  g.W = Eigen::MatrixXd::Zero(params.W.rows(), params.W.cols());
  return g;
}

Eigen::VectorXd GradBlocks::flat() const {
  RnnParams like;
  like.a = a;
  like.b = b;
  like.m0 = m0;
  like.U = U;
  like.V = V;
  like.W = W;
  return param_vector(like);
}

namespace {

void check_gradient_inputs(const RnnParams& params, const SequenceDataset& data,
                           const DiffusedActivation& act, double sigma, double lambda) {
  params.check_shapes();
  data.check_consistent();
  if (data.size() > 0 && (data.input_dim() != params.input() ||
                          data.target_dim() != params.output()))
    throw ShapeError("dataset dims do not match parameters");
  if (lambda < 0.0) throw std::domain_error("lambda must be >= 0");
  if (!std::isfinite(sigma) || sigma < 0.0) throw std::domain_error("sigma must be >= 0");
  if (sigma > 0.0 && !act.has_sq_form())
    throw UnsupportedOperationError("gradient at sigma > 0 needs a smoothed square for kind " +
                                    to_string(act.kind()));
}

void check_deriv_caches(const SeqTrace& seq, std::size_t s) {
  if (!seq.dhm.allFinite() || !seq.dhn.allFinite())
    throw NumericError("activation derivative undefined inside sequence " + std::to_string(s));
}

// Shared per-sequence quantities of the Appendix-style gradient expressions.
// With sigma = 0 every smoothing term (the h2~ - h~^2 gaps and their
// derivatives, and the sigma^2 pulls) vanishes identically, which this
// struct encodes by zero columns so one code path serves both regimes.
struct SeqTerms {
  Eigen::MatrixXd q;        // Y x T, dg/dn_t
  Eigen::MatrixXd r;        // H x T, direct dg/dm_t (through n_t and the regularizers)
  Eigen::MatrixXd gap_m;    // H x (T+1), h2~(m_t) - h~(m_t)^2
  Eigen::VectorXd r0_direct;  // H, direct dg/dm_0 from the t = 0 regularizer
};

SeqTerms sequence_terms(const SeqTrace& seq, const RnnParams& params, const Eigen::MatrixXd& y,
                        double sigma, double lambda, Supervision supervision,
                        const Eigen::RowVectorXd& col_w, const Eigen::RowVectorXd& col_v) {
  const Eigen::Index T = y.cols();
  const Eigen::Index H = params.hidden();
  const Eigen::Index Y = params.output();
  const bool smooth = sigma > 0.0;

  SeqTerms terms;
  terms.q.resize(Y, T);
  terms.r.resize(H, T);
  terms.gap_m = smooth ? (seq.h2m - seq.hm.cwiseAbs2()).eval()
                       : Eigen::MatrixXd::Zero(H, T + 1);

  // Gap derivatives d/dx (h2~ - h~^2) = h2~' - 2 h~' h~, zero at sigma = 0.
  auto gap_deriv_m = [&](Eigen::Index t) -> Eigen::VectorXd {
    if (!smooth) return Eigen::VectorXd::Zero(H);
    return seq.dh2m.col(t) - 2.0 * seq.dhm.col(t).cwiseProduct(seq.hm.col(t));
  };

  for (Eigen::Index t = 1; t <= T; ++t) {
    const double w =
        supervision == Supervision::kAllSteps ? 1.0 : (t == T ? 1.0 : 0.0);
    // dg/dn_t = h2~'(n_t) - 2 h~'(n_t) . y_t, written via the gap derivative
    // so the sigma = 0 case needs no smoothed square.
    Eigen::VectorXd gap_deriv_n =
        smooth ? (seq.dh2n.col(t - 1) - 2.0 * seq.dhn.col(t - 1).cwiseProduct(seq.hn.col(t - 1)))
                     .eval()
               : Eigen::VectorXd::Zero(Y).eval();
    terms.q.col(t - 1) =
        w * (gap_deriv_n +
             2.0 * seq.dhn.col(t - 1).cwiseProduct(seq.hn.col(t - 1) - y.col(t - 1)));

    // r_t: the chain through n_t plus the direct regularizer pull on m_t.
    Eigen::VectorXd r_t =
        seq.dhm.col(t).cwiseProduct(params.W.transpose() * terms.q.col(t - 1));
    if (smooth) {
      const double not_last = t != T ? 1.0 : 0.0;
      const Eigen::RowVectorXd col_sum = col_w + not_last * col_v;
      r_t += lambda * (gap_deriv_m(t).cwiseProduct(col_sum.transpose()) +
                       2.0 * sigma * sigma *
                           (not_last * static_cast<double>(H) + static_cast<double>(Y)) *
                           seq.dhm.col(t).cwiseProduct(seq.hm.col(t)));
    }
    terms.r.col(t - 1) = r_t;
  }

  terms.r0_direct = Eigen::VectorXd::Zero(H);
  if (smooth) {
    terms.r0_direct =
        lambda * (gap_deriv_m(0).cwiseProduct(col_v.transpose()) +
                  2.0 * sigma * sigma * static_cast<double>(H) *
                      seq.dhm.col(0).cwiseProduct(seq.hm.col(0)));
  }
  return terms;
}

}  // namespace

GradBlocks gradient(const RnnParams& params, const SequenceDataset& data,
                    const DiffusedActivation& act, double sigma, double lambda,
                    Supervision supervision) {
  check_gradient_inputs(params, data, act, sigma, lambda);
  const ForwardTrace trace = forward(params, data.inputs, act, sigma);
  const Eigen::RowVectorXd col_w = params.W.array().square().colwise().sum();
  const Eigen::RowVectorXd col_v = params.V.array().square().colwise().sum();

  GradBlocks g = GradBlocks::zeros_like(params);
  for (std::size_t s = 0; s < trace.seqs.size(); ++s) {
    const SeqTrace& seq = trace.seqs[s];
    check_deriv_caches(seq, s);
    const Eigen::MatrixXd& x = data.inputs[s];
    const Eigen::MatrixXd& y = data.targets[s];
    const Eigen::Index T = y.cols();
    const SeqTerms terms = sequence_terms(seq, params, y, sigma, lambda, supervision, col_w, col_v);

    // Reverse accumulation of the total derivative dg/dm_t:
    //   gbar_T = r_T,   gbar_t = r_t + diag(h~'(m_t)) V^T gbar_{t+1}.
    Eigen::MatrixXd gbar(params.hidden(), T);
    gbar.col(T - 1) = terms.r.col(T - 1);
    for (Eigen::Index t = T - 1; t >= 1; --t)
      gbar.col(t - 1) =
          terms.r.col(t - 1) +
          seq.dhm.col(t).cwiseProduct(params.V.transpose() * gbar.col(t));

    for (Eigen::Index t = 1; t <= T; ++t) {
      g.b += terms.q.col(t - 1);
      g.W += terms.q.col(t - 1) * seq.hm.col(t).transpose();
      g.a += gbar.col(t - 1);
      g.U += gbar.col(t - 1) * x.col(t - 1).transpose();
      g.V += gbar.col(t - 1) * seq.hm.col(t - 1).transpose();
    }
    g.W += 2.0 * lambda * params.W *
           terms.gap_m.rightCols(T).rowwise().sum().asDiagonal();
    g.V += 2.0 * lambda * params.V *
           terms.gap_m.leftCols(T).rowwise().sum().asDiagonal();
    g.m0 += terms.r0_direct +
            seq.dhm.col(0).cwiseProduct(params.V.transpose() * gbar.col(0));
  }
  return g;
}

GradBlocks gradient_reference(const RnnParams& params, const SequenceDataset& data,
                              const DiffusedActivation& act, double sigma, double lambda,
                              Supervision supervision) {
  check_gradient_inputs(params, data, act, sigma, lambda);
  const Eigen::Index H = params.hidden();
  const Eigen::Index X = params.input();
  const long budget = static_cast<long>(H) * std::max(X, H) *
                      (data.size() > 0 ? data.length() : 1);
  if (budget > 10000)
    throw std::invalid_argument("gradient_reference is an oracle for tiny instances only "
                                "(H * max(X, H) * T must be <= 10000)");

  const ForwardTrace trace = forward(params, data.inputs, act, sigma);
  const Eigen::RowVectorXd col_w = params.W.array().square().colwise().sum();
  const Eigen::RowVectorXd col_v = params.V.array().square().colwise().sum();

  GradBlocks g = GradBlocks::zeros_like(params);
  for (std::size_t s = 0; s < trace.seqs.size(); ++s) {
    const SeqTrace& seq = trace.seqs[s];
    check_deriv_caches(seq, s);
    const Eigen::MatrixXd& x = data.inputs[s];
    const Eigen::MatrixXd& y = data.targets[s];
    const Eigen::Index T = y.cols();
    const SeqTerms terms = sequence_terms(seq, params, y, sigma, lambda, supervision, col_w, col_v);

    // Forward chain dm_t/da: M_1 = I, M_t = I + V diag(h~'(m_{t-1})) M_{t-1}.
    {
      Eigen::MatrixXd chain = Eigen::MatrixXd::Identity(H, H);
      for (Eigen::Index t = 1; t <= T; ++t) {
        if (t > 1)
          chain = Eigen::MatrixXd::Identity(H, H) +
                  params.V * seq.dhm.col(t - 1).asDiagonal() * chain;
        g.a += chain.transpose() * terms.r.col(t - 1);
      }
    }

    // Forward chain dm_t/dm0: Q_0 = I, Q_t = V diag(h~'(m_{t-1})) Q_{t-1}.
    {
      Eigen::MatrixXd chain = Eigen::MatrixXd::Identity(H, H);
      Eigen::VectorXd dm0 = terms.r0_direct;
      for (Eigen::Index t = 1; t <= T; ++t) {
        chain = params.V * seq.dhm.col(t - 1).asDiagonal() * chain;
        dm0 += chain.transpose() * terms.r.col(t - 1);
      }
      g.m0 += dm0;
    }

    // Per-row sensitivity stacks: for each hidden coordinate d,
    //   dV: S_1^(d) = e_d h~(m_0)^T, S_t^(d) = e_d h~(m_{t-1})^T
    //         + sum_d' V(d,d') h~'(m_{t-1})_d' S_{t-1}^(d')
    //   dU: the same with x_t^T rows.
    {
      std::vector<Eigen::MatrixXd> sens_v(H), sens_u(H);
      std::vector<Eigen::MatrixXd> next_v(H), next_u(H);
      for (Eigen::Index t = 1; t <= T; ++t) {
        for (Eigen::Index d = 0; d < H; ++d) {
          Eigen::MatrixXd sv = Eigen::MatrixXd::Zero(H, H);
          Eigen::MatrixXd su = Eigen::MatrixXd::Zero(H, X);
          sv.row(d) = seq.hm.col(t - 1).transpose();
          su.row(d) = x.col(t - 1).transpose();
          if (t > 1) {
            for (Eigen::Index dp = 0; dp < H; ++dp) {
              const double factor = params.V(d, dp) * seq.dhm(dp, t - 1);
              if (factor != 0.0) {
                sv += factor * sens_v[dp];
                su += factor * sens_u[dp];
              }
            }
          }
          next_v[d] = std::move(sv);
          next_u[d] = std::move(su);
        }
        sens_v.swap(next_v);
        sens_u.swap(next_u);
        for (Eigen::Index d = 0; d < H; ++d) {
          g.V += terms.r(d, t - 1) * sens_v[d];
          g.U += terms.r(d, t - 1) * sens_u[d];
        }
      }
    }

    for (Eigen::Index t = 1; t <= T; ++t) {
      g.b += terms.q.col(t - 1);
      g.W += terms.q.col(t - 1) * seq.hm.col(t).transpose();
    }
    g.W += 2.0 * lambda * params.W *
           terms.gap_m.rightCols(T).rowwise().sum().asDiagonal();
    g.V += 2.0 * lambda * params.V *
           terms.gap_m.leftCols(T).rowwise().sum().asDiagonal();
  }
  return g;
}

std::string FdReport::to_json_line() const {
  std::ostringstream out;
  out.precision(17);
  out << "{\"max_rel_err\":" << max_rel_err << ",\"worst_coordinate\":\"" << worst_coordinate
      << "\",\"worst_analytic\":" << worst_analytic << ",\"worst_numeric\":" << worst_numeric
      << ",\"n_checked\":" << n_checked << ",\"step\":" << step << ",\"sigma\":" << sigma
      << ",\"lambda\":" << lambda << "}";
  return out.str();
}

FdReport compare_to_fd(const GradBlocks& analytic, const RnnParams& params,
                       const SequenceDataset& data, const DiffusedActivation& act, double sigma,
                       double lambda, double step, std::uint64_t seed, Supervision supervision,
                       int max_coordinates, double abs_floor) {
  if (!(step > 0.0)) throw std::domain_error("finite-difference step must be > 0");
  const Eigen::VectorXd base = param_vector(params);
  const Eigen::VectorXd flat_analytic = analytic.flat();
  if (flat_analytic.size() != base.size())
    throw ShapeError("gradient size does not match parameters");

  std::vector<Eigen::Index> coords(base.size());
  for (Eigen::Index i = 0; i < base.size(); ++i) coords[i] = i;
  if (static_cast<int>(coords.size()) > max_coordinates) {
    Rng rng(seed);
    rng.shuffle(coords);
    coords.resize(max_coordinates);
  }

  FdReport report;
  report.step = step;
  report.sigma = sigma;
  report.lambda = lambda;
  report.n_checked = static_cast<int>(coords.size());
  for (const Eigen::Index i : coords) {
    Eigen::VectorXd probe = base;
    probe[i] = base[i] + step;
    const double up =
        diffused_cost(params_from_vector(probe, params), data, act, sigma, lambda, supervision)
            .total;
    probe[i] = base[i] - step;
    const double down =
        diffused_cost(params_from_vector(probe, params), data, act, sigma, lambda, supervision)
            .total;
    const double numeric = (up - down) / (2.0 * step);
    const double diff = std::abs(flat_analytic[i] - numeric);
    if (diff <= abs_floor) continue;
    const double rel = diff / std::max(std::abs(flat_analytic[i]), std::abs(numeric));
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_coordinate = param_coordinate_name(params, i);
      report.worst_analytic = flat_analytic[i];
      report.worst_numeric = numeric;
    }
  }
  return report;
}

FdReport fd_check(const RnnParams& params, const SequenceDataset& data,
                  const DiffusedActivation& act, double sigma, double lambda, double step,
                  std::uint64_t seed, Supervision supervision, int max_coordinates,
                  double abs_floor) {
  const GradBlocks analytic = gradient(params, data, act, sigma, lambda, supervision);
  return compare_to_fd(analytic, params, data, act, sigma, lambda, step, seed, supervision,
                       max_coordinates, abs_floor);
}

}  // namespace diffrnn
