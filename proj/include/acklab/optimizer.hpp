#pragma once

#include "acklab/tensor.hpp"

#include <limits>
#include <optional>

namespace acklab {

enum class Algorithm { Sgd, AdaptiveMoments };

const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::Sgd;
  double learning_rate = 0.1;
  double anneal_factor = 0.5;
  int patience = 3;
  std::optional<double> clip_norm = 5.0;

  // adaptive-moments only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Fraction of total_steps spent ramping up linearly; after warmup the rate
  // decays linearly to zero at total_steps. Ignored when total_steps == 0.
  double warmup_fraction = 0.0;
  std::size_t total_steps = 0;

  // Defaults for CRF taggers: plain SGD with plateau annealing.
  static OptimizerConfig crf_default();
  // Defaults for fine-tuning the transformer encoder.
  static OptimizerConfig finetune_default();

  void validate() const;
};

struct SchedulerState {
  double learning_rate = 0.0;
  double best_score = -std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  std::size_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

SchedulerState make_scheduler(const OptimizerConfig& cfg);

// Learning rate used for the next update (warmup/decay applied).
double effective_learning_rate(const OptimizerConfig& cfg, const SchedulerState& state);

// Applies one update from Parameter::grad. Gradients are clipped to the
// global norm cfg.clip_norm when set.
SchedulerState optimizer_step(std::span<Parameter* const> params, const OptimizerConfig& cfg, SchedulerState state);

// Plateau annealing: after more than `patience` epochs without improvement the
// learning rate is multiplied by anneal_factor.
SchedulerState report_dev_score(const OptimizerConfig& cfg, SchedulerState state, double score);

double global_grad_norm(std::span<Parameter* const> params);

}  // namespace acklab
