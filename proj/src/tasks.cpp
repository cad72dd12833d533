#include "diffrnn/tasks.hpp"

#include <cstring>
#include <fstream>
#include <numeric>

#include "diffrnn/errors.hpp"
#include "diffrnn/rng.hpp"

namespace diffrnn {

void SequenceDataset::check_consistent() const {
  if (inputs.size() != targets.size()) throw ShapeError("inputs/targets sequence counts differ");
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    if (inputs[s].rows() != input_dim() || inputs[s].cols() != length() ||
        targets[s].rows() != target_dim() || targets[s].cols() != length())
      throw ShapeError("inconsistent shapes at sequence " + std::to_string(s));
  }
}

SequenceDataset gen_adding(int n_sequences, int length, std::uint64_t seed, double value_range) {
  if (length < 2) throw ShapeError("adding task needs length >= 2");
  if (n_sequences < 1) throw ShapeError("need at least one sequence");
  if (value_range < 0.0) throw ShapeError("value range must be >= 0");

  SequenceDataset data;
  data.task = "adding";
  data.seed = seed;
  data.inputs.reserve(n_sequences);
  data.targets.reserve(n_sequences);
  data.marker_positions.reserve(n_sequences);

  Rng rng(seed);
  for (int s = 0; s < n_sequences; ++s) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, length);
    for (int t = 0; t < length; ++t) x(0, t) = rng.uniform(-value_range, value_range);
    const auto first = static_cast<std::int32_t>(rng.next_below(length));
    auto second = static_cast<std::int32_t>(rng.next_below(length - 1));
    if (second >= first) ++second;  // uniform over the remaining positions
    x(1, first) = 1.0;
    x(1, second) = 1.0;
    const double target = x(0, first) + x(0, second);
    data.inputs.push_back(std::move(x));
    data.targets.push_back(Eigen::MatrixXd::Constant(1, length, target));
    data.marker_positions.push_back({first, second});
  }
  return data;
}

std::pair<SequenceDataset, SequenceDataset> split(const SequenceDataset& dataset, int n_train,
                                                  int n_test, std::uint64_t seed) {
  dataset.check_consistent();
  if (n_train < 0 || n_test < 0 || n_train + n_test > dataset.size())
    throw ShapeError("split sizes exceed dataset size");

  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  auto take = [&](int offset, int count) {
    SequenceDataset out;
    out.task = dataset.task;
    out.seed = dataset.seed;
    for (int i = 0; i < count; ++i) {
      const int idx = order[offset + i];
      out.inputs.push_back(dataset.inputs[idx]);
      out.targets.push_back(dataset.targets[idx]);
      if (!dataset.marker_positions.empty())
        out.marker_positions.push_back(dataset.marker_positions[idx]);
    }
    return out;
  };
  return {take(0, n_train), take(n_train, n_test)};
}

namespace {

constexpr char kDatasetMagic[8] = {'D', 'R', 'N', 'D', 'A', 'T', 'A', '1'};
constexpr std::uint32_t kDatasetVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& value, const char* what) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError(std::string("truncated dataset file while reading ") + what);
}

// Time-major: for each t, the column of values.
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index t = 0; t < m.cols(); ++t)
    for (Eigen::Index i = 0; i < m.rows(); ++i) write_pod(out, m(i, t));
}

void read_matrix(std::istream& in, Eigen::MatrixXd& m, const char* what) {
  for (Eigen::Index t = 0; t < m.cols(); ++t)
    for (Eigen::Index i = 0; i < m.rows(); ++i) read_pod(in, m(i, t), what);
}

}  // namespace

void save_dataset(const SequenceDataset& dataset, const std::string& path) {
  dataset.check_consistent();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open dataset for writing: " + path);
  out.write(kDatasetMagic, sizeof(kDatasetMagic));
  write_pod(out, kDatasetVersion);
  const auto task_len = static_cast<std::uint32_t>(dataset.task.size());
  write_pod(out, task_len);
  out.write(dataset.task.data(), task_len);
  write_pod(out, dataset.seed);
  const std::int32_t s = dataset.size(), t = dataset.length(), x = dataset.input_dim(),
                     y = dataset.target_dim();
  write_pod(out, s);
  write_pod(out, t);
  write_pod(out, x);
  write_pod(out, y);
  const auto n_marks = static_cast<std::uint32_t>(dataset.marker_positions.size());
  write_pod(out, n_marks);
  for (const auto& mark : dataset.marker_positions) {
    write_pod(out, mark[0]);
    write_pod(out, mark[1]);
  }
  for (int i = 0; i < s; ++i) write_matrix(out, dataset.inputs[i]);
  for (int i = 0; i < s; ++i) write_matrix(out, dataset.targets[i]);
  if (!out) throw DataError("failed writing dataset: " + path);
}

SequenceDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0)
    throw DataError("not a dataset file: " + path);
  std::uint32_t version = 0;
  read_pod(in, version, "version");
  if (version != kDatasetVersion)
    throw DataError("unsupported dataset version " + std::to_string(version) + " (expected " +
                    std::to_string(kDatasetVersion) + ")");
  std::uint32_t task_len = 0;
  read_pod(in, task_len, "task name");
  if (task_len > 4096) throw DataError("corrupt task name length");
  SequenceDataset data;
  data.task.resize(task_len);
  in.read(data.task.data(), task_len);
  if (!in) throw DataError("truncated dataset file while reading task name");
  read_pod(in, data.seed, "seed");
  std::int32_t s = 0, t = 0, x = 0, y = 0;
  read_pod(in, s, "dims");
  read_pod(in, t, "dims");
  read_pod(in, x, "dims");
  read_pod(in, y, "dims");
  if (s < 0 || t < 1 || x < 1 || y < 1) throw DataError("corrupt dataset dims");
  std::uint32_t n_marks = 0;
  read_pod(in, n_marks, "marker count");
  if (n_marks != 0 && n_marks != static_cast<std::uint32_t>(s))
    throw DataError("corrupt marker count");
  data.marker_positions.resize(n_marks);
  for (auto& mark : data.marker_positions) {
    read_pod(in, mark[0], "marker");
    read_pod(in, mark[1], "marker");
  }
  data.inputs.assign(s, Eigen::MatrixXd(x, t));
  data.targets.assign(s, Eigen::MatrixXd(y, t));
  for (auto& m : data.inputs) read_matrix(in, m, "inputs");
  for (auto& m : data.targets) read_matrix(in, m, "targets");
  return data;
}

}  // namespace diffrnn
