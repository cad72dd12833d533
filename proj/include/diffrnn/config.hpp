#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "diffrnn/activations.hpp"
#include "diffrnn/cost.hpp"
#include "diffrnn/model.hpp"
#include "diffrnn/optimizer.hpp"

namespace diffrnn {

// Every knob of a run, serializable as a flat key=value file so any output
// can be reproduced from the config written next to it.
struct ExperimentConfig {
  // data
  std::string task = "adding";
  int data_total = 1100;
  int data_train = 1000;
  int data_test = 100;
  int data_length = 10;
  std::uint64_t data_seed = 1001;
  double value_range = 0.5;
  Supervision supervision = Supervision::kAllSteps;

  // model
  int hidden = 10;
  ActKind activation = ActKind::kErf;
  double sharpness = 1.0;
  InitScheme init_scheme = InitScheme::kUniform;
  double init_scale = 0.1;
  std::uint64_t init_seed = 1;

  // method
  std::string method = "diffusion";  // diffusion | sgd
  double lambda = 1.0;
  std::uint64_t train_seed = 1;

  // diffusion schedule + step rule
  double sigma0 = 2.0;
  double gamma = 0.5;
  int stages = 7;
  bool final_zero = true;
  std::string inner_optimizer = "gd";  // gd | sgd
  int inner_max_epochs = 50;
  double inner_grad_tolerance = 1e-4;
  int inner_batch_size = 50;
  double eta = 0.1;
  bool normalize = true;
  double floor = 1e-3;

  // sgd baseline
  double sgd_lr = 0.05;
  int sgd_epochs = 200;
  int sgd_batch_size = 50;

  ContinuationSchedule make_schedule() const;
  StepRule make_step_rule() const;
  DiffusedActivation make_activation() const;

  void validate() const;
};

// Flat key=value serialization ('#' starts a comment). Unknown keys are an
// error; keys absent from the file keep their current value, so a loaded
// file overrides whatever the caller has set so far.
void apply_config_file(ExperimentConfig& config, const std::string& path);
void write_config(const ExperimentConfig& config, std::ostream& out);
void write_config(const ExperimentConfig& config, const std::string& path);

std::string to_string(Supervision supervision);
std::string to_string(InitScheme scheme);

}  // namespace diffrnn
