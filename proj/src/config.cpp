#include "diffrnn/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "diffrnn/errors.hpp"

namespace diffrnn {

ContinuationSchedule ExperimentConfig::make_schedule() const {
  ContinuationSchedule schedule = ContinuationSchedule::geometric(sigma0, gamma, stages, final_zero);
  schedule.inner.max_epochs = inner_max_epochs;
  schedule.inner.grad_tolerance = inner_grad_tolerance;
  schedule.inner.optimizer =
      inner_optimizer == "sgd" ? InnerPolicy::Opt::kSgd : InnerPolicy::Opt::kGd;
  schedule.inner.batch_size = inner_batch_size;
  return schedule;
}

StepRule ExperimentConfig::make_step_rule() const { return StepRule{eta, normalize, floor}; }

DiffusedActivation ExperimentConfig::make_activation() const {
  return DiffusedActivation::of(activation, sharpness);
}

void ExperimentConfig::validate() const {
  if (method != "diffusion" && method != "sgd")
    throw ConfigError("method must be diffusion or sgd");
  if (inner_optimizer != "gd" && inner_optimizer != "sgd")
    throw ConfigError("inner.optimizer must be gd or sgd");
  if (data_train + data_test > data_total)
    throw ConfigError("train + test sizes exceed data.total");
  if (data_length < 2) throw ConfigError("data.length must be >= 2");
  if (hidden < 1) throw ConfigError("model.hidden must be >= 1");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  make_schedule().validate();
  make_step_rule();      // validated by step_size on use; eta/floor checked here
  make_activation();     // validates sharpness
  if (step_size(make_step_rule(), 0.0) <= 0.0) throw ConfigError("floor must be > 0");
}

std::string to_string(Supervision supervision) {
  return supervision == Supervision::kAllSteps ? "all" : "last";
}

std::string to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kZeros: return "zeros";
    case InitScheme::kUniform: return "uniform";
    case InitScheme::kScaledGaussian: return "gaussian";
  }
  return "?";
}

namespace {

ActKind act_from_string(const std::string& s) {
  if (s == "sign") return ActKind::kSign;
  if (s == "erf") return ActKind::kErf;
  if (s == "tanh") return ActKind::kTanh;
  if (s == "relu") return ActKind::kRelu;
  throw ConfigError("unknown activation: " + s);
}

InitScheme init_from_string(const std::string& s) {
  if (s == "zeros") return InitScheme::kZeros;
  if (s == "uniform") return InitScheme::kUniform;
  if (s == "gaussian") return InitScheme::kScaledGaussian;
  throw ConfigError("unknown init scheme: " + s);
}

Supervision supervision_from_string(const std::string& s) {
  if (s == "all") return Supervision::kAllSteps;
  if (s == "last") return Supervision::kLastStep;
  throw ConfigError("supervision must be all or last");
}

bool bool_from_string(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("expected a boolean, got: " + s);
}

// key -> (setter from string, getter to string)
struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
std::string num_to_string(T value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

const std::map<std::string, Field>& fields() {
  auto num = [](auto member) {
    using Member = decltype(member);
    return Field{
        [member](ExperimentConfig& c, const std::string& s) {
          std::istringstream in(s);
          in >> c.*member;
          if (in.fail()) throw ConfigError("bad numeric value: " + s);
        },
        [member](const ExperimentConfig& c) { return num_to_string(c.*member); }};
  };
  auto str = [](std::string ExperimentConfig::* member) {
    return Field{[member](ExperimentConfig& c, const std::string& s) { c.*member = s; },
                 [member](const ExperimentConfig& c) { return c.*member; }};
  };
  static const std::map<std::string, Field> table = {
      {"task", str(&ExperimentConfig::task)},
      {"data.total", num(&ExperimentConfig::data_total)},
      {"data.train", num(&ExperimentConfig::data_train)},
      {"data.test", num(&ExperimentConfig::data_test)},
      {"data.length", num(&ExperimentConfig::data_length)},
      {"data.seed", num(&ExperimentConfig::data_seed)},
      {"data.value_range", num(&ExperimentConfig::value_range)},
      {"supervision",
       {[](ExperimentConfig& c, const std::string& s) { c.supervision = supervision_from_string(s); },
        [](const ExperimentConfig& c) { return to_string(c.supervision); }}},
      {"model.hidden", num(&ExperimentConfig::hidden)},
      {"model.activation",
       {[](ExperimentConfig& c, const std::string& s) { c.activation = act_from_string(s); },
        [](const ExperimentConfig& c) { return to_string(c.activation); }}},
      {"model.sharpness", num(&ExperimentConfig::sharpness)},
      {"init.scheme",
       {[](ExperimentConfig& c, const std::string& s) { c.init_scheme = init_from_string(s); },
        [](const ExperimentConfig& c) { return to_string(c.init_scheme); }}},
      {"init.scale", num(&ExperimentConfig::init_scale)},
      {"init.seed", num(&ExperimentConfig::init_seed)},
      {"method", str(&ExperimentConfig::method)},
      {"lambda", num(&ExperimentConfig::lambda)},
      {"train.seed", num(&ExperimentConfig::train_seed)},
      {"schedule.sigma0", num(&ExperimentConfig::sigma0)},
      {"schedule.gamma", num(&ExperimentConfig::gamma)},
      {"schedule.stages", num(&ExperimentConfig::stages)},
      {"schedule.final_zero",
       {[](ExperimentConfig& c, const std::string& s) { c.final_zero = bool_from_string(s); },
        [](const ExperimentConfig& c) { return c.final_zero ? "true" : "false"; }}},
      {"inner.optimizer", str(&ExperimentConfig::inner_optimizer)},
      {"inner.max_epochs", num(&ExperimentConfig::inner_max_epochs)},
      {"inner.grad_tolerance", num(&ExperimentConfig::inner_grad_tolerance)},
      {"inner.batch_size", num(&ExperimentConfig::inner_batch_size)},
      {"step.eta", num(&ExperimentConfig::eta)},
      {"step.normalize",
       {[](ExperimentConfig& c, const std::string& s) { c.normalize = bool_from_string(s); },
        [](const ExperimentConfig& c) { return c.normalize ? "true" : "false"; }}},
      {"step.floor", num(&ExperimentConfig::floor)},
      {"sgd.lr", num(&ExperimentConfig::sgd_lr)},
      {"sgd.epochs", num(&ExperimentConfig::sgd_epochs)},
      {"sgd.batch_size", num(&ExperimentConfig::sgd_batch_size)},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second.set(config, value);
  }
}

void write_config(const ExperimentConfig& config, std::ostream& out) {
  for (const auto& [key, field] : fields()) out << key << " = " << field.get(config) << "\n";
}

void write_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open config for writing: " + path);
  write_config(config, out);
  if (!out) throw DataError("failed writing config: " + path);
}

}  // namespace diffrnn
