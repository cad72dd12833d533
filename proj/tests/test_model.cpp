#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "diffrnn/errors.hpp"
#include "diffrnn/model.hpp"
#include "diffrnn/rng.hpp"
#include "test_support.hpp"

using diffrnn::DiffusedActivation;
using diffrnn::Dims;
using diffrnn::InitScheme;
using diffrnn::RnnParams;

TEST_SUITE_BEGIN("model");

TEST_CASE("zero parameters give the zero fixed point") {
  const Dims dims{2, 3, 1, 4, 2};
  const RnnParams zeros = diffrnn::init_params(dims, InitScheme::kZeros, 0.0, 0);
  auto inst = testsupport::make_tiny_instance(11);
  const auto trace = diffrnn::forward(zeros, inst.data.inputs, DiffusedActivation::erf(1.0), 0.7);
  for (const auto& seq : trace.seqs) {
    CHECK(seq.m.cwiseAbs().maxCoeff() == 0.0);
    CHECK(seq.n.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("bias-only recursion holds every step at the bias") {
  const Dims dims{2, 3, 1, 4, 1};
  RnnParams p = diffrnn::init_params(dims, InitScheme::kZeros, 0.0, 0);
  const double alpha = 0.37;
  p.a.setConstant(alpha);
  auto inst = testsupport::make_tiny_instance(3, 2, 3, 1, 4, 1);
  const auto trace = diffrnn::forward(p, inst.data.inputs, DiffusedActivation::erf(1.0), 0.0);
  for (Eigen::Index t = 1; t <= 4; ++t)
    for (Eigen::Index i = 0; i < 3; ++i)
      CHECK(trace.seqs[0].m(i, t) == doctest::Approx(alpha).epsilon(1e-15));
}

TEST_CASE("trace satisfies the recursion bit-exactly") {
  auto inst = testsupport::make_tiny_instance(42);
  const auto act = DiffusedActivation::erf(1.3);
  const double sigma = 0.8;
  const auto trace = diffrnn::forward(inst.params, inst.data.inputs, act, sigma);
  for (std::size_t s = 0; s < trace.seqs.size(); ++s) {
    const auto& seq = trace.seqs[s];
    CHECK(seq.m.col(0) == inst.params.m0);
    for (Eigen::Index t = 1; t < seq.m.cols(); ++t) {
      const Eigen::VectorXd expect_m = inst.params.U * inst.data.inputs[s].col(t - 1) +
                                       inst.params.V * act.diffused(seq.m.col(t - 1), sigma) +
                                       inst.params.a;
      const Eigen::VectorXd expect_n =
          inst.params.W * act.diffused(seq.m.col(t), sigma) + inst.params.b;
      CHECK((seq.m.col(t) - expect_m).cwiseAbs().maxCoeff() == 0.0);
      CHECK((seq.n.col(t - 1) - expect_n).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("sigma = 0 equals a plain unsmoothed forward pass") {
  auto inst = testsupport::make_tiny_instance(5);
  const auto act = DiffusedActivation::erf(1.0);
  const auto trace = diffrnn::forward(inst.params, inst.data.inputs, act, 0.0);
  // independent plain recursion with std::erf
  for (std::size_t s = 0; s < trace.seqs.size(); ++s) {
    Eigen::VectorXd m = inst.params.m0;
    for (Eigen::Index t = 1; t <= inst.data.length(); ++t) {
      Eigen::VectorXd hm(m.size());
      for (Eigen::Index i = 0; i < m.size(); ++i) hm[i] = std::erf(m[i]);
      m = inst.params.U * inst.data.inputs[s].col(t - 1) + inst.params.V * hm + inst.params.a;
      for (Eigen::Index i = 0; i < m.size(); ++i) hm[i] = std::erf(m[i]);
      const Eigen::VectorXd n = inst.params.W * hm + inst.params.b;
      CHECK((trace.seqs[s].m.col(t) - m).cwiseAbs().maxCoeff() <= 1e-15);
      CHECK((trace.seqs[s].n.col(t - 1) - n).cwiseAbs().maxCoeff() <= 1e-15);
    }
  }
}

TEST_CASE("permuting sequences permutes the trace") {
  auto inst = testsupport::make_tiny_instance(9, 2, 3, 1, 4, 3);
  const auto act = DiffusedActivation::erf(1.0);
  const auto trace = diffrnn::forward(inst.params, inst.data.inputs, act, 0.5);
  std::vector<Eigen::MatrixXd> reversed(inst.data.inputs.rbegin(), inst.data.inputs.rend());
  const auto trace_rev = diffrnn::forward(inst.params, reversed, act, 0.5);
  for (std::size_t s = 0; s < reversed.size(); ++s) {
    CHECK(trace.seqs[s].m == trace_rev.seqs[reversed.size() - 1 - s].m);
    CHECK(trace.seqs[s].n == trace_rev.seqs[reversed.size() - 1 - s].n);
  }
}

TEST_CASE("forward rejects shape mismatches and overflow carries location") {
  auto inst = testsupport::make_tiny_instance(1);
  std::vector<Eigen::MatrixXd> bad = {Eigen::MatrixXd::Zero(3, 4)};  // X = 3 != 2
  CHECK_THROWS_AS(diffrnn::forward(inst.params, bad, DiffusedActivation::erf(1.0), 0.0),
                  diffrnn::ShapeError);

  RnnParams huge = inst.params;
  huge.V.setConstant(1e308);
  huge.a.setConstant(1e308);
  try {
    diffrnn::forward(huge, inst.data.inputs, DiffusedActivation::relu(), 0.0);
    FAIL("expected NumericError");
  } catch (const diffrnn::NumericError& err) {
    CHECK(std::string(err.what()).find("t = ") != std::string::npos);
  }
}

TEST_CASE("init schemes: zeros, determinism, gaussian scale") {
  const Dims dims{3, 10, 2, 5, 1};
  const RnnParams zeros = diffrnn::init_params(dims, InitScheme::kZeros, 1.0, 7);
  CHECK(diffrnn::param_vector(zeros).cwiseAbs().maxCoeff() == 0.0);

  const RnnParams first = diffrnn::init_params(dims, InitScheme::kUniform, 0.1, 7);
  const RnnParams second = diffrnn::init_params(dims, InitScheme::kUniform, 0.1, 7);
  CHECK(diffrnn::param_vector(first) == diffrnn::param_vector(second));
  CHECK(diffrnn::param_vector(first).cwiseAbs().maxCoeff() <= 0.1);
  const RnnParams third = diffrnn::init_params(dims, InitScheme::kUniform, 0.1, 8);
  CHECK(diffrnn::param_vector(first) != diffrnn::param_vector(third));

  // empirical std of N(0, 0.01) within 20% over ~1e4 draws
  const Dims big{50, 70, 20, 1, 1};
  const RnnParams gauss = diffrnn::init_params(big, InitScheme::kScaledGaussian, 0.1, 3);
  const Eigen::VectorXd flat = diffrnn::param_vector(gauss);
  const double mean = flat.mean();
  const double std_dev = std::sqrt((flat.array() - mean).square().sum() / (flat.size() - 1));
  CHECK(std_dev == doctest::Approx(0.1).epsilon(0.2));
}

TEST_CASE("flatten order and coordinate names") {
  auto inst = testsupport::make_tiny_instance(2);
  const Eigen::VectorXd flat = diffrnn::param_vector(inst.params);
  CHECK(flat.size() == inst.params.size());
  CHECK(flat[0] == inst.params.a[0]);
  const RnnParams back = diffrnn::params_from_vector(flat, inst.params);
  CHECK(diffrnn::param_vector(back) == flat);
  CHECK(diffrnn::param_coordinate_name(inst.params, 0) == "a[0]");
  CHECK(diffrnn::param_coordinate_name(inst.params, 3) == "b[0]");
  CHECK(diffrnn::param_coordinate_name(inst.params, 7) == "U[0,0]");
  CHECK(diffrnn::param_coordinate_name(inst.params, 13) == "V[0,0]");
  CHECK(diffrnn::param_coordinate_name(inst.params, 22) == "W[0,0]");
}

TEST_CASE("checkpoint round-trips bit-exactly and rejects bad files") {
  auto inst = testsupport::make_tiny_instance(77);
  const std::string path = "checkpoint_test.bin";
  diffrnn::save_checkpoint(inst.params, path);
  const RnnParams loaded = diffrnn::load_checkpoint(path);
  CHECK(diffrnn::param_vector(loaded) == diffrnn::param_vector(inst.params));

  // truncation
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out("checkpoint_trunc.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(diffrnn::load_checkpoint("checkpoint_trunc.bin"), diffrnn::DataError);

  // wrong magic
  {
    std::ofstream out("checkpoint_magic.bin", std::ios::binary);
    out << "NOTAPARM11111111111111111";
  }
  CHECK_THROWS_AS(diffrnn::load_checkpoint("checkpoint_magic.bin"), diffrnn::DataError);
  CHECK_THROWS_AS(diffrnn::load_checkpoint("does_not_exist.bin"), diffrnn::DataError);

  std::remove(path.c_str());
  std::remove("checkpoint_trunc.bin");
  std::remove("checkpoint_magic.bin");
}

TEST_SUITE_END();
