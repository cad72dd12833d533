#include "diffrnn/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "diffrnn/errors.hpp"
#include "diffrnn/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint and dataset files assume a little-endian host");

namespace diffrnn {

void Dims::validate() const {
  if (X < 1 || H < 1 || Y < 1 || T < 1 || S < 1)
    throw ShapeError("all dimensions must be positive integers");
}

void RnnParams::check_shapes() const {
  const Eigen::Index H = a.size();
  const Eigen::Index Y = b.size();
  if (m0.size() != H) throw ShapeError("m0 must be H x 1");
  if (U.rows() != H) throw ShapeError("U must be H x X");
  if (V.rows() != H || V.cols() != H) throw ShapeError("V must be H x H");
  if (W.rows() != Y || W.cols() != H) throw ShapeError("W must be Y x H");
}

bool RnnParams::all_finite() const {
  return a.allFinite() && b.allFinite() && m0.allFinite() && U.allFinite() && V.allFinite() &&
         W.allFinite();
}

RnnParams init_params(const Dims& dims, InitScheme scheme, double scale, std::uint64_t seed) {
  dims.validate();
  RnnParams p;
  p.a.setZero(dims.H);
  p.b.setZero(dims.Y);
  p.m0.setZero(dims.H);
  p.U.setZero(dims.H, dims.X);
  p.V.setZero(dims.H, dims.H);
  p.W.setZero(dims.Y, dims.H);
  if (scheme == InitScheme::kZeros) return p;

  Rng rng(seed);
  auto draw = [&]() {
    return scheme == InitScheme::kUniform ? rng.uniform(-scale, scale) : rng.normal(0.0, scale);
  };
  // Fill in declared order, row-major within matrices, so the stream of
  // draws matches the flat layout of param_vector.
  for (Eigen::Index i = 0; i < p.a.size(); ++i) p.a[i] = draw();
  for (Eigen::Index i = 0; i < p.b.size(); ++i) p.b[i] = draw();
  for (Eigen::Index i = 0; i < p.m0.size(); ++i) p.m0[i] = draw();
  for (Eigen::Index r = 0; r < p.U.rows(); ++r)
    for (Eigen::Index c = 0; c < p.U.cols(); ++c) p.U(r, c) = draw();
  for (Eigen::Index r = 0; r < p.V.rows(); ++r)
    for (Eigen::Index c = 0; c < p.V.cols(); ++c) p.V(r, c) = draw();
  for (Eigen::Index r = 0; r < p.W.rows(); ++r)
    for (Eigen::Index c = 0; c < p.W.cols(); ++c) p.W(r, c) = draw();
  return p;
}

namespace {

void append_vector(Eigen::VectorXd& out, Eigen::Index& at, const Eigen::VectorXd& v) {
  out.segment(at, v.size()) = v;
  at += v.size();
}

void append_matrix(Eigen::VectorXd& out, Eigen::Index& at, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[at++] = m(r, c);
}

void take_vector(const Eigen::VectorXd& in, Eigen::Index& at, Eigen::VectorXd& v) {
  v = in.segment(at, v.size());
  at += v.size();
}

void take_matrix(const Eigen::VectorXd& in, Eigen::Index& at, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in[at++];
}

}  // namespace

Eigen::VectorXd param_vector(const RnnParams& params) {
  Eigen::VectorXd flat(params.size());
  Eigen::Index at = 0;
  append_vector(flat, at, params.a);
  append_vector(flat, at, params.b);
  append_vector(flat, at, params.m0);
  append_matrix(flat, at, params.U);
  append_matrix(flat, at, params.V);
  append_matrix(flat, at, params.W);
  return flat;
}

RnnParams params_from_vector(const Eigen::VectorXd& flat, const RnnParams& like) {
  if (flat.size() != like.size()) throw ShapeError("flat vector size does not match parameters");
  RnnParams p = like;
  Eigen::Index at = 0;
  take_vector(flat, at, p.a);
  take_vector(flat, at, p.b);
  take_vector(flat, at, p.m0);
  take_matrix(flat, at, p.U);
  take_matrix(flat, at, p.V);
  take_matrix(flat, at, p.W);
  return p;
}

std::string param_coordinate_name(const RnnParams& like, Eigen::Index flat_index) {
  struct Block {
    const char* name;
    Eigen::Index rows, cols;
  };
  const Block blocks[] = {
      {"a", like.a.size(), 1},   {"b", like.b.size(), 1},   {"m0", like.m0.size(), 1},
      {"U", like.U.rows(), like.U.cols()},
      {"V", like.V.rows(), like.V.cols()},
      {"W", like.W.rows(), like.W.cols()},
  };
  for (const auto& block : blocks) {
    const Eigen::Index n = block.rows * block.cols;
    if (flat_index < n) {
      if (block.cols == 1) return std::string(block.name) + "[" + std::to_string(flat_index) + "]";
      return std::string(block.name) + "[" + std::to_string(flat_index / block.cols) + "," +
             std::to_string(flat_index % block.cols) + "]";
    }
    flat_index -= n;
  }
  return "<out of range>";
}

ForwardTrace forward(const RnnParams& params, const std::vector<Eigen::MatrixXd>& inputs,
                     const DiffusedActivation& act, double sigma) {
  params.check_shapes();
  const Eigen::Index H = params.a.size();
  const Eigen::Index Y = params.b.size();
  const bool want_sq = act.has_sq_form();

  ForwardTrace trace;
  trace.sigma = sigma;
  trace.seqs.resize(inputs.size());
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const Eigen::MatrixXd& x = inputs[s];
    if (x.rows() != params.U.cols())
      throw ShapeError("sequence " + std::to_string(s) + ": input rows != X");
    const Eigen::Index T = x.cols();
    SeqTrace& seq = trace.seqs[s];
    seq.m.resize(H, T + 1);
    seq.hm.resize(H, T + 1);
    seq.dhm.resize(H, T + 1);
    seq.h2m.resize(H, T + 1);
    seq.dh2m.resize(H, T + 1);
    seq.n.resize(Y, T);
    seq.hn.resize(Y, T);
    seq.dhn.resize(Y, T);
    seq.h2n.resize(Y, T);
    seq.dh2n.resize(Y, T);

    auto fill_m = [&](Eigen::Index t) {
      for (Eigen::Index i = 0; i < H; ++i) {
        const double v = seq.m(i, t);
        seq.hm(i, t) = act.diffused(v, sigma);
        seq.dhm(i, t) = act.diffused_deriv_or_nan(v, sigma);
        seq.h2m(i, t) = want_sq ? act.diffused_sq(v, sigma) : 0.0;
        seq.dh2m(i, t) = want_sq ? act.diffused_sq_deriv(v, sigma) : 0.0;
      }
    };

    seq.m.col(0) = params.m0;
    fill_m(0);
    for (Eigen::Index t = 1; t <= T; ++t) {
      seq.m.col(t) = params.U * x.col(t - 1) + params.V * seq.hm.col(t - 1) + params.a;
      if (!seq.m.col(t).allFinite())
        throw NumericError("non-finite hidden state at sequence " + std::to_string(s) +
                           ", t = " + std::to_string(t));
      fill_m(t);
      seq.n.col(t - 1) = params.W * seq.hm.col(t) + params.b;
      if (!seq.n.col(t - 1).allFinite())
        throw NumericError("non-finite output state at sequence " + std::to_string(s) +
                           ", t = " + std::to_string(t));
      for (Eigen::Index i = 0; i < Y; ++i) {
        const double v = seq.n(i, t - 1);
        seq.hn(i, t - 1) = act.diffused(v, sigma);
        seq.dhn(i, t - 1) = act.diffused_deriv_or_nan(v, sigma);
        seq.h2n(i, t - 1) = want_sq ? act.diffused_sq(v, sigma) : 0.0;
        seq.dh2n(i, t - 1) = want_sq ? act.diffused_sq_deriv(v, sigma) : 0.0;
      }
    }
  }
  return trace;
}

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'R', 'N', 'P', 'A', 'R', 'M', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& value, const char* what) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError(std::string("truncated file while reading ") + what);
}

void write_doubles(std::ostream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::size_t count, const char* what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw DataError(std::string("truncated file while reading ") + what);
}

void write_matrix_rowmajor(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod(out, m(r, c));
}

void read_matrix_rowmajor(std::istream& in, Eigen::MatrixXd& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) read_pod(in, m(r, c), what);
}

}  // namespace

void save_checkpoint(const RnnParams& params, const std::string& path) {
  params.check_shapes();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod(out, kCheckpointVersion);
  const std::int32_t x = params.input(), h = params.hidden(), y = params.output();
  write_pod(out, x);
  write_pod(out, h);
  write_pod(out, y);
  write_doubles(out, params.a.data(), params.a.size());
  write_doubles(out, params.b.data(), params.b.size());
  write_doubles(out, params.m0.data(), params.m0.size());
  write_matrix_rowmajor(out, params.U);
  write_matrix_rowmajor(out, params.V);
  write_matrix_rowmajor(out, params.W);
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

RnnParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw DataError("not a parameter checkpoint: " + path);
  std::uint32_t version = 0;
  read_pod(in, version, "version");
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  std::int32_t x = 0, h = 0, y = 0;
  read_pod(in, x, "dims");
  read_pod(in, h, "dims");
  read_pod(in, y, "dims");
  if (x < 1 || h < 1 || y < 1) throw DataError("corrupt checkpoint dims");
  RnnParams p;
  p.a.resize(h);
  p.b.resize(y);
  p.m0.resize(h);
  p.U.resize(h, x);
  p.V.resize(h, h);
  p.W.resize(y, h);
  read_doubles(in, p.a.data(), p.a.size(), "a");
  read_doubles(in, p.b.data(), p.b.size(), "b");
  read_doubles(in, p.m0.data(), p.m0.size(), "m0");
  read_matrix_rowmajor(in, p.U, "U");
  read_matrix_rowmajor(in, p.V, "V");
  read_matrix_rowmajor(in, p.W, "W");
  return p;
}

}  // namespace diffrnn
