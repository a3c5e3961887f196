#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nmt/model/transformer.hpp"
#include "nmt/vocab.hpp"

namespace nmt::train {

struct TrainConfig {
  std::size_t micro_batch_size = 64;
  std::size_t effective_batch_size = 384;  // 6 accumulations of 64
  std::size_t max_steps = 70000;
  double lr_scale = 1.0;
  std::size_t warmup_steps = 4000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-9;
  double label_smoothing = 0.0;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  // steps; 0 disables
  std::size_t eval_every = 500;      // dev evaluations
  std::size_t patience = 5;          // dev evaluations without improvement

  void validate() const;
  std::size_t accumulation_steps() const {
    return effective_batch_size / micro_batch_size;
  }
};

// One sentence pair as model-ready id sequences (BOS ... EOS, unpadded).
struct TokenizedPair {
  tok::TokenSeq src;
  tok::TokenSeq tgt;
};

// A micro-batch padded to its own max source/target lengths.
struct Batch {
  std::vector<tok::TokenSeq> src;  // [B][max_src]
  std::vector<tok::TokenSeq> tgt;  // [B][max_tgt], full BOS..EOS rows
};

// Deterministic epoch stream: pairs are reshuffled per epoch from
// (seed, epoch) and each pair appears exactly once per epoch.
class Batcher {
 public:
  Batcher(std::vector<TokenizedPair> data, std::size_t micro_batch_size,
          std::uint64_t seed);

  Batch next();
  void skip(std::size_t micro_batches);  // fast-forward (resume)
  std::size_t batches_per_epoch() const { return batches_per_epoch_; }

 private:
  void start_epoch();

  std::vector<TokenizedPair> data_;
  std::vector<std::size_t> order_;
  std::size_t micro_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;  // batch index within the epoch
  std::size_t batches_per_epoch_;
};

// All batches of one epoch, in stream order.
std::vector<Batch> make_batches(const std::vector<TokenizedPair>& data,
                                std::size_t micro_batch_size,
                                std::uint64_t seed, std::size_t epoch = 0);

// Noam schedule: lr = scale * d_model^-1/2 * min(step^-1/2, step*warmup^-3/2).
struct LrSchedule {
  double scale = 1.0;
  std::size_t warmup_steps = 4000;
  std::size_t d_model = 512;
};
double lr_at(std::size_t step, const LrSchedule& schedule);

// Adam first/second moment slots, parallel to TransformerParams::named().
struct OptimizerState {
  struct Slot {
    std::vector<double> m, v;
  };
  std::vector<Slot> slots;
  std::size_t step = 0;  // updates performed

  static OptimizerState for_params(const model::TransformerParams& params);
};

// Dense Adam update with bias correction over one flat parameter.
void adam_update_dense(std::vector<double>& param,
                       const std::vector<double>& grad,
                       OptimizerState::Slot& slot, std::size_t step, double lr,
                       double beta1, double beta2, double eps);

// Row-sparse variant for embedding tables: rows whose gradient is entirely
// zero are skipped (moments untouched).
void adam_update_lazy_rows(std::vector<double>& param,
                           const std::vector<double>& grad,
                           OptimizerState::Slot& slot, std::size_t rows,
                           std::size_t cols, std::size_t step, double lr,
                           double beta1, double beta2, double eps);

// One optimizer step over all parameters from their accumulated gradients.
// Throws TrainingError naming the parameter on non-finite gradients.
void adam_step(model::TransformerParams& params, OptimizerState& state,
               double lr, const TrainConfig& cfg);

struct LossPoint {
  std::size_t step;
  double train_loss;
  double dev_loss;  // meaningful only when has_dev
  bool has_dev;
  double lr;
};

// CSV `step,train_loss,dev_loss,lr`; dev_loss column empty off-evaluation.
void write_history(const std::string& path,
                   const std::vector<LossPoint>& history);

struct TrainState {
  model::TransformerParams params;
  OptimizerState opt;
  std::size_t steps_done = 0;
};

struct TrainResult {
  std::vector<LossPoint> history;
  std::size_t steps_done = 0;
  bool early_stopped = false;
  double final_train_loss = 0.0;
};

// Gradient-accumulation training loop. Continues from state.steps_done to
// cfg.max_steps or dev-loss early stop. `save` (optional) is invoked with a
// tag of "periodic" every checkpoint_every steps and "diagnostic" before a
// non-finite-loss abort.
using SaveHook = std::function<void(const TrainState&, const std::string&)>;
TrainResult train(TrainState& state,
                  const std::vector<TokenizedPair>& train_data,
                  const std::vector<TokenizedPair>& dev_data,
                  const TrainConfig& cfg, const SaveHook& save = {});

// Mean cross-entropy over a dataset (no gradients, dropout off).
double evaluate_loss(const model::TransformerParams& params,
                     const std::vector<TokenizedPair>& data,
                     const TrainConfig& cfg);

}  // namespace nmt::train
