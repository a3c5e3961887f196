#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nmt/vocab.hpp"

namespace nmt::tensor {

// Global value precision. f64 is the default and what every gradient test
// runs at; f32 rounds each op result through single precision.
enum class Precision { f32, f64 };
Precision precision();
void set_precision(Precision p);

// Rounds through single precision when the global precision is f32.
double round_to_precision(double v);

using Shape = std::vector<std::size_t>;
std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated lazily, same length as values
  bool requires_grad = false;
  int node_id = -1;  // creation index within the recording tape
};

// Shared handle to an n-dimensional array. Copying a Tensor aliases its
// storage; ops never mutate their inputs and always allocate fresh output
// storage.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);
  explicit Tensor(double scalar);  // rank-0

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  std::size_t numel() const { return d_->values.size(); }
  bool is_scalar() const { return d_->shape.empty(); }

  std::vector<double>& values() { return d_->values; }
  const std::vector<double>& values() const { return d_->values; }
  double item() const;  // scalar value; throws unless rank-0

  // Lazily allocated zero-filled gradient slot.
  std::vector<double>& grad();
  bool has_grad() const { return !d_->grad.empty(); }
  void zero_grad();

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool v);

  bool all_finite() const;

  int node_id() const { return d_->node_id; }
  const std::shared_ptr<TensorData>& data() const { return d_; }

 private:
  std::shared_ptr<TensorData> d_;
};

// Append-only computation record. Ops executed while a Recording scope is
// active append one node each; backward replays them in exact reverse
// order. A tape and its tensors belong to one thread at a time.
class Tape {
 public:
  struct Node {
    const char* op;
    std::vector<int> inputs;  // node ids of recorded inputs, -1 for leaves
    std::shared_ptr<TensorData> output;
    std::function<void()> backward_fn;
  };

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  void clear();

  // Seeds d loss/d loss = 1 and accumulates gradients into every recorded
  // tensor that requires them. Intermediate (node output) gradients are
  // reset at the start of each pass, so leaves accumulate exactly one
  // gradient per call. Throws DimensionError if loss is not scalar.
  void backward(const Tensor& loss);

  int record(const char* op, std::vector<int> inputs,
             std::shared_ptr<TensorData> output, std::function<void()> fn);

 private:
  std::vector<Node> nodes_;
  int next_id_ = 0;
};

// RAII scope making `tape` the active recording target for this thread.
class Recording {
 public:
  explicit Recording(Tape& tape);
  ~Recording();
  Recording(const Recording&) = delete;
  Recording& operator=(const Recording&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// ---- operations ------------------------------------------------------
// All ops validate shapes (DimensionError names both) and record
// themselves on the active tape when an input requires gradients.

// Batched matrix product over the trailing two axes. `b` is either
// [k, n] (shared across a's batch) or carries a's full batch prefix.
Tensor matmul(const Tensor& a, const Tensor& b);

// Pointwise with trailing-dimension broadcast of `b` onto `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);  // subgradient at 0 is 0

// Softmax along the last axis; -inf inputs get probability exactly 0.
// Throws DataError on an all--inf slice.
Tensor softmax(const Tensor& x);

// Per-last-axis standardization then affine gain/bias (both shaped like
// the last axis).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-6);

// Row i of the result is table row ids[i]. Backward accumulates into only
// the touched rows.
Tensor embedding_lookup(const Tensor& table, const tok::TokenSeq& ids);

// Mean over non-ignored positions of -log softmax(logits)[target].
// logits: [n, V] (or [..., V] flattened), targets length n.
Tensor cross_entropy(const Tensor& logits, const tok::TokenSeq& targets,
                     tok::TokenId ignore_id = tok::kPad);
// Sum-reduction variant; `count_out` receives the number of scored
// positions. Used by gradient accumulation across micro-batches. A nonzero
// label_smoothing spreads that fraction of target mass uniformly over the
// vocabulary.
Tensor cross_entropy_sum(const Tensor& logits, const tok::TokenSeq& targets,
                         tok::TokenId ignore_id, std::size_t* count_out,
                         double label_smoothing = 0.0);

Tensor reshape(const Tensor& t, Shape new_shape);
Tensor transpose(const Tensor& t, std::size_t axis_a, std::size_t axis_b);
Tensor sum(const Tensor& t);  // scalar

}  // namespace nmt::tensor
