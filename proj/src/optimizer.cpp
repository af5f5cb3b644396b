#include "acklab/optimizer.hpp"

#include <cmath>

namespace acklab {

const char* algorithm_name(Algorithm a) {
  return a == Algorithm::Sgd ? "sgd" : "adaptive-moments";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "sgd") return Algorithm::Sgd;
  if (name == "adaptive-moments" || name == "adam") return Algorithm::AdaptiveMoments;
  throw DataError("unknown optimizer algorithm: " + name);
}

OptimizerConfig OptimizerConfig::crf_default() { return OptimizerConfig{}; }

OptimizerConfig OptimizerConfig::finetune_default() {
  OptimizerConfig cfg;
  cfg.algorithm = Algorithm::AdaptiveMoments;
  cfg.learning_rate = 5e-5;
  cfg.anneal_factor = 1.0;
  cfg.warmup_fraction = 0.1;
  cfg.clip_norm = 1.0;
  return cfg;
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DataError("optimizer: learning_rate must be > 0");
  if (!(anneal_factor > 0.0 && anneal_factor <= 1.0)) throw DataError("optimizer: anneal_factor must be in (0,1]");
  if (patience < 0) throw DataError("optimizer: patience must be non-negative");
  if (clip_norm && !(*clip_norm > 0.0)) throw DataError("optimizer: clip_norm must be > 0");
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) throw DataError("optimizer: warmup_fraction must be in [0,1)");
}

SchedulerState make_scheduler(const OptimizerConfig& cfg) {
  cfg.validate();
  SchedulerState s;
  s.learning_rate = cfg.learning_rate;
  return s;
}

double effective_learning_rate(const OptimizerConfig& cfg, const SchedulerState& state) {
  if (cfg.total_steps == 0) return state.learning_rate;
  const double total = static_cast<double>(cfg.total_steps);
  const double step = static_cast<double>(state.step) + 1.0;
  const double warm = cfg.warmup_fraction * total;
  double factor;
  if (warm > 0.0 && step <= warm) {
    factor = step / warm;
  } else {
    factor = std::max(0.0, (total - step + 1.0) / std::max(1.0, total - warm));
  }
  return state.learning_rate * std::min(1.0, factor);
}

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

SchedulerState optimizer_step(std::span<Parameter* const> params, const OptimizerConfig& cfg, SchedulerState state) {
  for (const Parameter* p : params) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
      throw ShapeError("optimizer: gradient shape " + shape_string(p->grad) + " for parameter " + p->name + " " +
                       shape_string(p->value));
    if (!p->grad.allFinite()) throw Error("optimizer: non-finite gradient for parameter " + p->name);
  }

  double factor = 1.0;
  if (cfg.clip_norm) {
    const double norm = global_grad_norm(params);
    if (norm > *cfg.clip_norm) factor = *cfg.clip_norm / norm;
  }
  const double lr = effective_learning_rate(cfg, state);

  if (cfg.algorithm == Algorithm::Sgd) {
    for (Parameter* p : params) p->value -= (lr * factor) * p->grad;
  } else {
    if (state.first_moment.size() != params.size()) {
      state.first_moment.clear();
      state.second_moment.clear();
      for (const Parameter* p : params) {
        state.first_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        state.second_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      }
    }
    const double t = static_cast<double>(state.step + 1);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter* p = params[i];
      Matrix g = p->grad * factor;
      Matrix& m = state.first_moment[i];
      Matrix& v = state.second_moment[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
      p->value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
    }
  }
  ++state.step;
  return state;
}

SchedulerState report_dev_score(const OptimizerConfig& cfg, SchedulerState state, double score) {
  if (score > state.best_score) {
    state.best_score = score;
    state.bad_epochs = 0;
    return state;
  }
  if (++state.bad_epochs > cfg.patience) {
    state.learning_rate *= cfg.anneal_factor;
    state.bad_epochs = 0;
  }
  return state;
}

}  // namespace acklab
