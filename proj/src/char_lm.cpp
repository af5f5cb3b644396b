#include "acklab/char_lm.hpp"

#include <algorithm>
#include <cmath>

namespace acklab {

const char* direction_name(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

Direction parse_direction(const std::string& s) {
  if (s == "forward") return Direction::Forward;
  if (s == "backward") return Direction::Backward;
  throw DataError("unknown char-LM direction '" + s + "'");
}

CharLm::CharLm(Direction direction, const CharLmConfig& cfg) : direction_(direction), cfg_(cfg) {
  if (cfg.hidden <= 0 || cfg.embedding <= 0 || cfg.sequence_length <= 0 || cfg.batch <= 0)
    throw Error("char-LM: hidden, embedding, sequence_length and batch must be positive");
  std::mt19937_64 rng(cfg.seed);
  embedding_ = &params_.add("embedding", xavier_uniform(kSymbols, cfg.embedding, rng));
  lstm_ = Lstm(params_, "lstm", cfg.embedding, cfg.hidden, rng);
  output_ = Linear(params_, "output", cfg.hidden, kSymbols, rng);
}

Matrix CharLm::states(const std::vector<int>& symbols) const {
  Matrix x(static_cast<Eigen::Index>(symbols.size()), cfg_.embedding);
  for (std::size_t i = 0; i < symbols.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = embedding_->value.row(symbols[i]);
  return lstm_.run(x, false);
}

Matrix CharLm::logits(const Matrix& states) const { return output_.apply(states); }

double CharLm::cross_entropy(const std::vector<int>& symbols) const {
  if (symbols.size() < 2) return 0.0;
  const std::vector<int> inputs(symbols.begin(), symbols.end() - 1);
  const Matrix z = logits(states(inputs));
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    total += m + std::log((z.row(r).array() - m).exp().sum()) - z(r, symbols[static_cast<std::size_t>(r) + 1]);
  }
  return total / static_cast<double>(z.rows());
}

Var CharLm::window_loss(Binder& b, const std::vector<std::vector<int>>& windows, Lstm::State& state) const {
  const std::size_t batch = windows.size();
  const std::size_t len = windows.front().size() - 1;
  std::vector<int> inputs, targets;
  inputs.reserve(batch * len);
  targets.reserve(batch * len);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t s = 0; s < batch; ++s) {
      inputs.push_back(windows[s][t]);
      targets.push_back(windows[s][t + 1]);
    }
  const auto rows = static_cast<Eigen::Index>(batch);
  Var projected = add_row(matmul(lookup(b(embedding_), inputs), b(lstm_.w_input)), b(lstm_.bias));
  std::vector<Var> hs;
  hs.reserve(len);
  for (std::size_t t = 0; t < len; ++t) {
    state = lstm_.step(b, slice(projected, static_cast<Eigen::Index>(t) * rows, 0, rows, 4 * cfg_.hidden), state);
    hs.push_back(state.h);
  }
  Var z = output_(b, concat_rows(hs));
  return scale(acklab::cross_entropy(z, targets), 1.0 / static_cast<double>(targets.size()));
}

void CharLm::save(Checkpoint& ck, const std::string& prefix) const {
  ck.meta[prefix + "direction"] = direction_name(direction_);
  ck.meta[prefix + "hidden"] = std::to_string(cfg_.hidden);
  ck.meta[prefix + "embedding"] = std::to_string(cfg_.embedding);
  ck.meta[prefix + "sequence_length"] = std::to_string(cfg_.sequence_length);
  ck.meta[prefix + "batch"] = std::to_string(cfg_.batch);
  ck.put_params(prefix, params_);
}

CharLm CharLm::load(const Checkpoint& ck, const std::string& prefix) {
  CharLmConfig cfg;
  cfg.hidden = std::stoi(ck.get_meta(prefix + "hidden"));
  cfg.embedding = std::stoi(ck.get_meta(prefix + "embedding"));
  cfg.sequence_length = std::stoi(ck.get_meta(prefix + "sequence_length", "48"));
  cfg.batch = std::stoi(ck.get_meta(prefix + "batch", "16"));
  CharLm lm(parse_direction(ck.get_meta(prefix + "direction")), cfg);
  ck.load_params(prefix, lm.params_);
  return lm;
}

std::vector<int> char_stream(const std::vector<std::string>& lines, Direction direction) {
  std::vector<int> out;
  for (const std::string& line : lines) {
    if (line.empty()) continue;
    out.push_back(CharLm::kBos);
    const std::size_t first = out.size();
    for (unsigned char c : line) out.push_back(c);
    if (direction == Direction::Backward) std::reverse(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
    out.push_back(CharLm::kEos);
  }
  return out;
}

CharLmTraining train_char_lm(const std::vector<std::string>& lines, Direction direction, const CharLmConfig& cfg) {
  const std::vector<int> stream = char_stream(lines, direction);
  if (stream.empty()) throw Error("char-LM: empty training corpus");
  if (!(cfg.heldout_fraction > 0.0 && cfg.heldout_fraction < 1.0))
    throw Error("char-LM: heldout_fraction must be in (0, 1)");

  CharLmTraining out{CharLm(direction, cfg), {}};
  CharLm& lm = out.model;

  auto heldout_size = static_cast<std::size_t>(cfg.heldout_fraction * static_cast<double>(stream.size()));
  if (heldout_size < 2 || stream.size() - heldout_size < 2) heldout_size = 0;
  const std::vector<int> train(stream.begin(), stream.end() - static_cast<std::ptrdiff_t>(heldout_size));
  // A stream too short to hold out anything is scored on itself.
  const std::vector<int> heldout = heldout_size ? std::vector<int>(stream.end() - static_cast<std::ptrdiff_t>(heldout_size), stream.end()) : train;

  const std::size_t window = static_cast<std::size_t>(cfg.sequence_length);
  const std::size_t batch = std::clamp<std::size_t>(train.size() / (window + 1), 1, static_cast<std::size_t>(cfg.batch));
  const std::size_t segment = train.size() / batch;

  OptimizerConfig opt;
  opt.algorithm = Algorithm::AdaptiveMoments;
  opt.learning_rate = cfg.learning_rate;
  opt.clip_norm = 5.0;
  SchedulerState sched = make_scheduler(opt);
  const std::vector<Parameter*> params = lm.params().all();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Matrix h = Matrix::Zero(static_cast<Eigen::Index>(batch), cfg.hidden);
    Matrix c = h;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t w = 0; w + 1 < segment; w += window) {
      const std::size_t len = std::min(window, segment - 1 - w);
      std::vector<std::vector<int>> windows(batch);
      for (std::size_t s = 0; s < batch; ++s) {
        auto begin = train.begin() + static_cast<std::ptrdiff_t>(s * segment + w);
        windows[s].assign(begin, begin + static_cast<std::ptrdiff_t>(len + 1));
      }
      Tape tape;
      Binder binder(tape);
      Lstm::State state{tape.constant(h), tape.constant(c)};
      Var loss = lm.window_loss(binder, windows, state);
      h = state.h.value();
      c = state.c.value();
      loss_sum += loss.scalar() * static_cast<double>(len);
      loss_count += len;
      lm.params().zero_grad();
      tape.backward(loss);
      sched = optimizer_step(params, opt, std::move(sched));
    }
    out.log.push_back({epoch, loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0,
                       std::exp(lm.cross_entropy(heldout))});
  }
  lm.params().zero_grad();
  return out;
}

}  // namespace acklab
