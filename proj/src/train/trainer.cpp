#include "nmt/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "nmt/error.hpp"
#include "nmt/rng.hpp"
#include "nmt/tensor/tensor.hpp"

namespace nmt::train {

using model::Dropout;
using model::TransformerParams;
using tensor::Tensor;

void TrainConfig::validate() const {
  if (micro_batch_size == 0) throw DataError("micro_batch_size must be >= 1");
  if (effective_batch_size == 0 ||
      effective_batch_size % micro_batch_size != 0) {
    throw DataError("effective_batch_size " +
                    std::to_string(effective_batch_size) +
                    " must be a positive multiple of micro_batch_size " +
                    std::to_string(micro_batch_size));
  }
  if (max_steps < 1) throw DataError("max_steps must be >= 1");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw DataError("label_smoothing must lie in [0, 1)");
  }
}

// ---- batching --------------------------------------------------------

namespace {

Batch pad_batch(const std::vector<TokenizedPair>& data,
                const std::size_t* idx, std::size_t count) {
  std::size_t max_src = 0, max_tgt = 0;
  for (std::size_t i = 0; i < count; ++i) {
    max_src = std::max(max_src, data[idx[i]].src.size());
    max_tgt = std::max(max_tgt, data[idx[i]].tgt.size());
  }
  Batch b;
  b.src.reserve(count);
  b.tgt.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    tok::TokenSeq s = data[idx[i]].src;
    tok::TokenSeq t = data[idx[i]].tgt;
    s.resize(max_src, tok::kPad);
    t.resize(max_tgt, tok::kPad);
    b.src.push_back(std::move(s));
    b.tgt.push_back(std::move(t));
  }
  return b;
}

}  // namespace

Batcher::Batcher(std::vector<TokenizedPair> data, std::size_t micro_batch_size,
                 std::uint64_t seed)
    : data_(std::move(data)), micro_(micro_batch_size), seed_(seed) {
  if (data_.empty()) throw DataError("cannot batch an empty dataset");
  if (micro_ == 0) throw DataError("micro_batch_size must be >= 1");
  order_.resize(data_.size());
  batches_per_epoch_ = (data_.size() + micro_ - 1) / micro_;
  start_epoch();
}

void Batcher::start_epoch() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng(Rng::mix(seed_, epoch_));
  rng.shuffle(order_);
  cursor_ = 0;
}

Batch Batcher::next() {
  if (cursor_ >= batches_per_epoch_) {
    ++epoch_;
    start_epoch();
  }
  const std::size_t begin = cursor_ * micro_;
  const std::size_t count = std::min(micro_, data_.size() - begin);
  ++cursor_;
  return pad_batch(data_, order_.data() + begin, count);
}

void Batcher::skip(std::size_t micro_batches) {
  while (micro_batches > 0) {
    const std::size_t left = batches_per_epoch_ - cursor_;
    if (micro_batches < left) {
      cursor_ += micro_batches;
      return;
    }
    micro_batches -= left;
    ++epoch_;
    start_epoch();
  }
}

std::vector<Batch> make_batches(const std::vector<TokenizedPair>& data,
                                std::size_t micro_batch_size,
                                std::uint64_t seed, std::size_t epoch) {
  if (data.empty()) throw DataError("cannot batch an empty dataset");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(Rng::mix(seed, epoch));
  rng.shuffle(order);
  std::vector<Batch> out;
  for (std::size_t begin = 0; begin < data.size(); begin += micro_batch_size) {
    const std::size_t count = std::min(micro_batch_size, data.size() - begin);
    out.push_back(pad_batch(data, order.data() + begin, count));
  }
  return out;
}

// ---- learning rate ---------------------------------------------------

double lr_at(std::size_t step, const LrSchedule& schedule) {
  if (step < 1) throw DataError("lr_at steps are 1-based");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(schedule.warmup_steps);
  return schedule.scale / std::sqrt(static_cast<double>(schedule.d_model)) *
         std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
}

// ---- Adam ------------------------------------------------------------

OptimizerState OptimizerState::for_params(const TransformerParams& params) {
  OptimizerState st;
  for (const auto& np : params.named()) {
    st.slots.push_back({std::vector<double>(np.tensor.numel(), 0.0),
                        std::vector<double>(np.tensor.numel(), 0.0)});
  }
  return st;
}

namespace {

inline void adam_one(double& p, double g, double& m, double& v, double lr,
                     double beta1, double beta2, double eps, double bc1,
                     double bc2) {
  m = beta1 * m + (1.0 - beta1) * g;
  v = beta2 * v + (1.0 - beta2) * g * g;
  const double mhat = m / bc1;
  const double vhat = v / bc2;
  p = tensor::round_to_precision(p - lr * mhat / (std::sqrt(vhat) + eps));
}

}  // namespace

void adam_update_dense(std::vector<double>& param,
                       const std::vector<double>& grad,
                       OptimizerState::Slot& slot, std::size_t step, double lr,
                       double beta1, double beta2, double eps) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    adam_one(param[i], grad[i], slot.m[i], slot.v[i], lr, beta1, beta2, eps,
             bc1, bc2);
  }
}

void adam_update_lazy_rows(std::vector<double>& param,
                           const std::vector<double>& grad,
                           OptimizerState::Slot& slot, std::size_t rows,
                           std::size_t cols, std::size_t step, double lr,
                           double beta1, double beta2, double eps) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * cols;
    bool touched = false;
    for (std::size_t j = 0; j < cols && !touched; ++j) {
      touched = grad[base + j] != 0.0;
    }
    if (!touched) continue;
    for (std::size_t j = 0; j < cols; ++j) {
      adam_one(param[base + j], grad[base + j], slot.m[base + j],
               slot.v[base + j], lr, beta1, beta2, eps, bc1, bc2);
    }
  }
}

void adam_step(TransformerParams& params, OptimizerState& state, double lr,
               const TrainConfig& cfg) {
  auto named = params.named();
  if (state.slots.size() != named.size()) {
    throw TrainingError("optimizer state does not match the parameter set");
  }
  for (const auto& np : named) {
    if (!np.tensor.has_grad()) continue;
    for (double g : np.tensor.data()->grad) {
      if (!std::isfinite(g)) {
        throw TrainingError("non-finite gradient in parameter " + np.name);
      }
    }
  }
  const std::size_t step = ++state.step;
  for (std::size_t i = 0; i < named.size(); ++i) {
    Tensor t = named[i].tensor;
    auto& grad = t.grad();  // zeros when untouched
    auto& values = t.values();
    if (named[i].embedding_rows) {
      adam_update_lazy_rows(values, grad, state.slots[i], t.shape()[0],
                            t.shape()[1], step, lr, cfg.beta1, cfg.beta2,
                            cfg.adam_eps);
    } else {
      adam_update_dense(values, grad, state.slots[i], step, lr, cfg.beta1,
                        cfg.beta2, cfg.adam_eps);
    }
  }
}

// ---- loss over one batch ---------------------------------------------

namespace {

struct BatchLoss {
  Tensor loss_sum;  // scalar, recorded on the active tape
  std::size_t tokens = 0;
};

BatchLoss batch_loss(const TransformerParams& params, const Batch& batch,
                     double label_smoothing, const Dropout& dropout) {
  const auto& config = params.config;
  std::vector<tok::TokenSeq> tgt_in;
  tok::TokenSeq tgt_out;
  tgt_in.reserve(batch.tgt.size());
  for (const auto& row : batch.tgt) {
    tgt_in.emplace_back(row.begin(), row.end() - 1);
    tgt_out.insert(tgt_out.end(), row.begin() + 1, row.end());
  }
  Tensor memory = model::encoder_forward(batch.src, params, config, dropout);
  auto masks = model::make_decoder_masks(tgt_in, batch.src, config.num_heads);
  Tensor logits =
      model::decoder_forward(tgt_in, memory, masks, params, config, dropout);
  Tensor flat = tensor::reshape(
      logits, {batch.tgt.size() * tgt_in[0].size(), config.tgt_vocab_size});
  BatchLoss out;
  out.loss_sum = tensor::cross_entropy_sum(flat, tgt_out, tok::kPad,
                                           &out.tokens, label_smoothing);
  return out;
}

}  // namespace

double evaluate_loss(const TransformerParams& params,
                     const std::vector<TokenizedPair>& data,
                     const TrainConfig& cfg) {
  if (data.empty()) throw DataError("cannot evaluate on an empty dataset");
  double total = 0.0;
  std::size_t tokens = 0;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.size();
       begin += cfg.micro_batch_size) {
    const std::size_t count =
        std::min(cfg.micro_batch_size, data.size() - begin);
    idx.resize(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = begin + i;
    Batch b = pad_batch(data, idx.data(), count);
    BatchLoss bl = batch_loss(params, b, 0.0, {});
    total += bl.loss_sum.item();
    tokens += bl.tokens;
  }
  return total / static_cast<double>(tokens);
}

// ---- training loop ----------------------------------------------------

TrainResult train(TrainState& state,
                  const std::vector<TokenizedPair>& train_data,
                  const std::vector<TokenizedPair>& dev_data,
                  const TrainConfig& cfg, const SaveHook& save) {
  cfg.validate();
  if (train_data.empty()) throw DataError("training data is empty");
  const std::size_t accum = cfg.accumulation_steps();

  Batcher batcher(train_data, cfg.micro_batch_size, cfg.seed);
  batcher.skip(state.steps_done * accum);
  LrSchedule sched{cfg.lr_scale, cfg.warmup_steps, state.params.config.d_model};

  TrainResult result;
  double best_dev = std::numeric_limits<double>::infinity();
  std::size_t strikes = 0;

  while (state.steps_done < cfg.max_steps) {
    const std::size_t step = state.steps_done + 1;
    const double lr = lr_at(step, sched);
    state.params.zero_grad();

    double loss_sum = 0.0;
    std::size_t tokens = 0;
    for (std::size_t a = 0; a < accum; ++a) {
      Batch batch = batcher.next();
      // One dropout stream per micro-batch, derived from (seed, position in
      // the global stream) so resumed runs replay it exactly.
      Rng drop_rng(Rng::mix(cfg.seed ^ 0xd1090u,
                            state.steps_done * accum + a));
      Dropout dropout{state.params.config.dropout_rate, &drop_rng};
      tensor::Tape tape;
      tensor::Recording rec(tape);
      BatchLoss bl =
          batch_loss(state.params, batch, cfg.label_smoothing, dropout);
      if (!bl.loss_sum.all_finite()) {
        if (save) save(state, "diagnostic");
        throw TrainingError("non-finite training loss at step " +
                            std::to_string(step));
      }
      tape.backward(bl.loss_sum);
      loss_sum += bl.loss_sum.item();
      tokens += bl.tokens;
    }

    // Mean-over-effective-batch normalization: grads were accumulated from
    // sum losses, so one global rescale makes accumulation equivalent to a
    // single large batch.
    const double inv_tokens = 1.0 / static_cast<double>(tokens);
    for (auto& np : state.params.named()) {
      if (!np.tensor.has_grad()) continue;
      for (double& g : np.tensor.data()->grad) g *= inv_tokens;
    }
    adam_step(state.params, state.opt, lr, cfg);
    state.steps_done = step;

    LossPoint pt{step, loss_sum * inv_tokens, 0.0, false, lr};
    result.final_train_loss = pt.train_loss;
    if (cfg.eval_every > 0 && step % cfg.eval_every == 0 && !dev_data.empty()) {
      pt.dev_loss = evaluate_loss(state.params, dev_data, cfg);
      pt.has_dev = true;
      if (pt.dev_loss < best_dev) {
        best_dev = pt.dev_loss;
        strikes = 0;
      } else if (++strikes >= cfg.patience) {
        result.history.push_back(pt);
        result.early_stopped = true;
        break;
      }
    }
    result.history.push_back(pt);
    if (save && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      save(state, "periodic");
    }
  }
  result.steps_done = state.steps_done;
  return result;
}

void write_history(const std::string& path,
                   const std::vector<LossPoint>& history) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "step,train_loss,dev_loss,lr\n";
  out.precision(17);
  for (const auto& pt : history) {
    out << pt.step << ',' << pt.train_loss << ',';
    if (pt.has_dev) out << pt.dev_loss;
    out << ',' << pt.lr << '\n';
  }
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace nmt::train
