#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace diffrnn {

// A set of S input/target sequence pairs. inputs[s] is X x T, targets[s] is
// Y x T. For the adding task X = 2 (row 0 values, row 1 markers), Y = 1, and
// the target at every step equals the sum of the two marked values.
struct SequenceDataset {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> targets;

  std::string task;
  std::uint64_t seed = 0;
  std::vector<std::array<std::int32_t, 2>> marker_positions;  // adding task only

  int size() const { return static_cast<int>(inputs.size()); }
  int length() const { return inputs.empty() ? 0 : static_cast<int>(inputs[0].cols()); }
  int input_dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs[0].rows()); }
  int target_dim() const { return targets.empty() ? 0 : static_cast<int>(targets[0].rows()); }

  void check_consistent() const;
};

// Adding problem: the value channel is i.i.d. uniform on [-value_range,
// value_range]; the marker channel is 1 at two distinct positions drawn
// uniformly without replacement and 0 elsewhere; the target is the sum of
// the two marked values, constant across output steps. Deterministic per seed.
SequenceDataset gen_adding(int n_sequences, int length, std::uint64_t seed,
                           double value_range = 0.5);

// Disjoint seeded split into n_train + n_test sequences.
std::pair<SequenceDataset, SequenceDataset> split(const SequenceDataset& dataset, int n_train,
                                                  int n_test, std::uint64_t seed);

// Versioned binary container; round-trips bit-exactly. Little-endian layout.
void save_dataset(const SequenceDataset& dataset, const std::string& path);
SequenceDataset load_dataset(const std::string& path);

}  // namespace diffrnn
