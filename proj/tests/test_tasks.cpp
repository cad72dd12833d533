#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "diffrnn/errors.hpp"
#include "diffrnn/tasks.hpp"

using diffrnn::SequenceDataset;

TEST_SUITE_BEGIN("tasks");

TEST_CASE("adding task construction invariants") {
  const SequenceDataset data = diffrnn::gen_adding(200, 10, 4242);
  CHECK(data.size() == 200);
  CHECK(data.length() == 10);
  CHECK(data.input_dim() == 2);
  CHECK(data.target_dim() == 1);
  for (int s = 0; s < data.size(); ++s) {
    const auto& x = data.inputs[s];
    CHECK(x.row(1).sum() == 2.0);  // exactly two markers
    for (int t = 0; t < 10; ++t) {
      CHECK((x(1, t) == 0.0 || x(1, t) == 1.0));
      CHECK(std::abs(x(0, t)) <= 0.5);
    }
    const auto [first, second] = std::pair(data.marker_positions[s][0],
                                           data.marker_positions[s][1]);
    CHECK(first != second);
    const double sum = x(0, first) + x(0, second);
    for (int t = 0; t < 10; ++t) CHECK(data.targets[s](0, t) == sum);
    CHECK(std::abs(sum) <= 1.0);  // inside the erf output range
  }
}

TEST_CASE("zero value range forces zero targets") {
  const SequenceDataset data = diffrnn::gen_adding(20, 6, 1, /*value_range=*/0.0);
  for (const auto& y : data.targets) CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generation is deterministic and rejects short sequences") {
  const SequenceDataset a = diffrnn::gen_adding(3, 10, 1);
  const SequenceDataset b = diffrnn::gen_adding(3, 10, 1);
  for (int s = 0; s < 3; ++s) {
    CHECK(a.inputs[s] == b.inputs[s]);
    CHECK(a.targets[s] == b.targets[s]);
  }
  CHECK_THROWS_AS(diffrnn::gen_adding(3, 1, 1), diffrnn::ShapeError);
}

TEST_CASE("marker positions cover the whole sequence roughly uniformly") {
  const SequenceDataset data = diffrnn::gen_adding(5000, 10, 99);
  std::vector<int> counts(10, 0);
  for (const auto& mark : data.marker_positions) {
    ++counts[mark[0]];
    ++counts[mark[1]];
  }
  for (int t = 0; t < 10; ++t) {
    CHECK(counts[t] > 800);  // expectation 1000 per position
    CHECK(counts[t] < 1200);
  }
}

TEST_CASE("split produces disjoint seeded subsets") {
  const SequenceDataset data = diffrnn::gen_adding(1100, 10, 7);
  const auto [train, test] = diffrnn::split(data, 1000, 100, 5);
  CHECK(train.size() == 1000);
  CHECK(test.size() == 100);

  const auto [train2, test2] = diffrnn::split(data, 1000, 100, 5);
  CHECK(train.inputs[0] == train2.inputs[0]);
  CHECK(test.inputs[99] == test2.inputs[99]);

  const auto [all_train, empty_test] = diffrnn::split(data, 1100, 0, 5);
  CHECK(empty_test.size() == 0);
  CHECK(all_train.size() == 1100);

  CHECK_THROWS_AS(diffrnn::split(data, 1100, 1, 5), diffrnn::ShapeError);

  // disjointness: every sequence of the source appears exactly once overall
  std::multiset<double> seen;
  for (const auto& x : train.inputs) seen.insert(x(0, 0));
  for (const auto& x : test.inputs) seen.insert(x(0, 0));
  std::multiset<double> source;
  for (const auto& x : data.inputs) source.insert(x(0, 0));
  CHECK(seen == source);
}

TEST_CASE("dataset file round-trips bit-exactly") {
  const SequenceDataset data = diffrnn::gen_adding(17, 10, 31);
  diffrnn::save_dataset(data, "dataset_test.bin");
  const SequenceDataset loaded = diffrnn::load_dataset("dataset_test.bin");
  CHECK(loaded.task == data.task);
  CHECK(loaded.seed == data.seed);
  CHECK(loaded.marker_positions == data.marker_positions);
  for (int s = 0; s < data.size(); ++s) {
    CHECK(loaded.inputs[s] == data.inputs[s]);
    CHECK(loaded.targets[s] == data.targets[s]);
  }
  std::remove("dataset_test.bin");
}

TEST_CASE("dataset loader rejects truncation, bad magic, version bump") {
  const SequenceDataset data = diffrnn::gen_adding(5, 10, 31);
  diffrnn::save_dataset(data, "dataset_full.bin");
  std::ifstream in("dataset_full.bin", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  {
    std::ofstream out("dataset_trunc.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 40));
  }
  CHECK_THROWS_AS(diffrnn::load_dataset("dataset_trunc.bin"), diffrnn::DataError);

  {
    std::string corrupted = bytes;
    corrupted[0] = 'X';
    std::ofstream out("dataset_magic.bin", std::ios::binary);
    out.write(corrupted.data(), static_cast<std::streamsize>(corrupted.size()));
  }
  CHECK_THROWS_AS(diffrnn::load_dataset("dataset_magic.bin"), diffrnn::DataError);

  {
    std::string bumped = bytes;
    bumped[8] = 9;  // version field follows the 8-byte magic
    std::ofstream out("dataset_version.bin", std::ios::binary);
    out.write(bumped.data(), static_cast<std::streamsize>(bumped.size()));
  }
  try {
    diffrnn::load_dataset("dataset_version.bin");
    FAIL("expected version mismatch");
  } catch (const diffrnn::DataError& err) {
    CHECK(std::string(err.what()).find("version") != std::string::npos);
  }

  std::remove("dataset_full.bin");
  std::remove("dataset_trunc.bin");
  std::remove("dataset_magic.bin");
  std::remove("dataset_version.bin");
}

TEST_CASE("trivial zero predictor scores near the target variance") {
  // Var(v1 + v2) = 2/12 for values uniform on [-1/2, 1/2]
  const SequenceDataset data = diffrnn::gen_adding(10000, 10, 123);
  double sum_sq = 0.0;
  for (const auto& y : data.targets) sum_sq += y(0, 0) * y(0, 0);
  const double mse = sum_sq / data.size();
  CHECK(mse > 1.0 / 6.0 * 0.9);
  CHECK(mse < 1.0 / 6.0 * 1.1);
}

TEST_SUITE_END();
