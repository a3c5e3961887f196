#include "nmt/tensor/tensor.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include "nmt/error.hpp"
#include "nmt/tensor/kernels.hpp"

namespace nmt::tensor {

namespace {

std::atomic<Precision> g_precision{Precision::f64};
thread_local Tape* g_active_tape = nullptr;

void quantize(std::vector<double>& values) {
  if (precision() == Precision::f64) return;
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace

double round_to_precision(double v) {
  return precision() == Precision::f64
             ? v
             : static_cast<double>(static_cast<float>(v));
}

Precision precision() { return g_precision.load(std::memory_order_relaxed); }
void set_precision(Precision p) {
  g_precision.store(p, std::memory_order_relaxed);
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : d_(std::make_shared<TensorData>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  d_->shape = std::move(shape);
  d_->values = std::move(values);
}

Tensor::Tensor(double scalar) : Tensor(Shape{}, {scalar}) {}

Tensor Tensor::zeros(Shape shape) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

double Tensor::item() const {
  if (!is_scalar()) {
    throw DimensionError("item() requires a scalar tensor, shape is " +
                         shape_str(shape()));
  }
  return d_->values[0];
}

std::vector<double>& Tensor::grad() {
  if (d_->grad.empty()) d_->grad.assign(d_->values.size(), 0.0);
  return d_->grad;
}

void Tensor::zero_grad() { d_->grad.clear(); }

Tensor& Tensor::set_requires_grad(bool v) {
  d_->requires_grad = v;
  return *this;
}

bool Tensor::all_finite() const {
  for (double v : d_->values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---- tape ------------------------------------------------------------

void Tape::clear() {
  nodes_.clear();
  next_id_ = 0;
}

int Tape::record(const char* op, std::vector<int> inputs,
                 std::shared_ptr<TensorData> output,
                 std::function<void()> fn) {
  nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(fn)});
  return next_id_++;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar()) {
    throw DimensionError("backward requires a scalar loss tensor");
  }
  // Intermediate gradients are per-pass scratch; leaves keep theirs so
  // repeated passes accumulate.
  for (auto& node : nodes_) {
    node.output->grad.assign(node.output->values.size(), 0.0);
  }
  loss.data()->grad.assign(1, 0.0);
  loss.data()->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->backward_fn) it->backward_fn();
  }
}

Recording::Recording(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

Recording::~Recording() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

// ---- op plumbing -----------------------------------------------------

namespace {

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Records the op when a tape is active and some input needs gradients.
void record_op(const char* name, std::initializer_list<const Tensor*> inputs,
               Tensor& out, std::function<void()> fn) {
  Tape* tape = active_tape();
  if (!tape || !any_requires_grad(inputs)) return;
  out.set_requires_grad(true);
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (const Tensor* t : inputs) ids.push_back(t->node_id());
  out.data()->node_id =
      tape->record(name, std::move(ids), out.data(), std::move(fn));
}

// Accumulates src (scaled) into the grad of `t` if it participates in the
// graph.
void accumulate_grad(const std::shared_ptr<TensorData>& t,
                     const std::vector<double>& contribution) {
  if (!t->requires_grad) return;
  if (t->grad.empty()) t->grad.assign(t->values.size(), 0.0);
  for (std::size_t i = 0; i < contribution.size(); ++i) {
    t->grad[i] += contribution[i];
  }
}

std::vector<double>& grad_of(const std::shared_ptr<TensorData>& t) {
  if (t->grad.empty()) t->grad.assign(t->values.size(), 0.0);
  return t->grad;
}

}  // namespace

// ---- matmul ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " +
                         shape_str(sa) + " x " + shape_str(sb));
  }
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa[sa.size() - 1];
  const std::size_t kb = sb[sb.size() - 2];
  const std::size_t n = sb[sb.size() - 1];
  if (k != kb) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_str(sa) +
                         " x " + shape_str(sb));
  }
  const bool b_shared = sb.size() == 2;
  Shape batch_shape(sa.begin(), sa.end() - 2);
  if (!b_shared) {
    Shape b_batch(sb.begin(), sb.end() - 2);
    if (b_batch != batch_shape) {
      throw DimensionError("matmul batch dimensions disagree: " +
                           shape_str(sa) + " x " + shape_str(sb));
    }
  }
  const std::size_t batch = shape_numel(batch_shape);

  Shape out_shape = batch_shape;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out = Tensor::zeros(std::move(out_shape));

  if (b_shared) {
    // Flatten the batch into rows: [batch*m, k] x [k, n].
    kernels::matmul(1, batch * m, k, n, a.values().data(), false,
                    b.values().data(), false, out.values().data(), false);
  } else {
    kernels::matmul(batch, m, k, n, a.values().data(), false,
                    b.values().data(), false, out.values().data(), false);
  }
  quantize(out.values());

  record_op("matmul", {&a, &b}, out,
            [ad = a.data(), bd = b.data(), od = out.data(), batch, m, k, n,
             b_shared]() {
              const double* g = od->grad.data();
              if (ad->requires_grad) {
                double* da = grad_of(ad).data();
                if (b_shared) {
                  // dA = dC @ B^T over flattened rows
                  kernels::matmul(1, batch * m, n, k, g, false,
                                  bd->values.data(), true, da, true);
                } else {
                  kernels::matmul(batch, m, n, k, g, false, bd->values.data(),
                                  true, da, true);
                }
              }
              if (bd->requires_grad) {
                double* db = grad_of(bd).data();
                if (b_shared) {
                  // dB = A^T @ dC with the batch folded into the reduction
                  kernels::matmul(1, k, batch * m, n, ad->values.data(), true,
                                  g, false, db, true);
                } else {
                  kernels::matmul(batch, k, m, n, ad->values.data(), true, g,
                                  false, db, true);
                }
              }
            });
  return out;
}

// ---- elementwise -----------------------------------------------------

namespace {

// b broadcasts onto a when its shape is a trailing suffix of a's.
void check_broadcast(const Shape& sa, const Shape& sb, const char* op) {
  if (sb.size() > sa.size() ||
      !std::equal(sb.begin(), sb.end(), sa.end() - sb.size())) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(sb) +
                         " does not trail-broadcast onto " + shape_str(sa));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_broadcast(a.shape(), b.shape(), "add");
  const std::size_t bn = b.numel();
  Tensor out = Tensor::zeros(a.shape());
  auto& ov = out.values();
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i % bn];
  quantize(ov);

  record_op("add", {&a, &b}, out,
            [ad = a.data(), bd = b.data(), od = out.data(), bn]() {
              const auto& g = od->grad;
              if (ad->requires_grad) {
                auto& da = grad_of(ad);
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
              }
              if (bd->requires_grad) {
                auto& db = grad_of(bd);
                for (std::size_t i = 0; i < g.size(); ++i) db[i % bn] += g[i];
              }
            });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_broadcast(a.shape(), b.shape(), "mul");
  const std::size_t bn = b.numel();
  Tensor out = Tensor::zeros(a.shape());
  auto& ov = out.values();
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] * bv[i % bn];
  quantize(ov);

  record_op("mul", {&a, &b}, out,
            [ad = a.data(), bd = b.data(), od = out.data(), bn]() {
              const auto& g = od->grad;
              if (ad->requires_grad) {
                auto& da = grad_of(ad);
                for (std::size_t i = 0; i < g.size(); ++i) {
                  da[i] += g[i] * bd->values[i % bn];
                }
              }
              if (bd->requires_grad) {
                auto& db = grad_of(bd);
                for (std::size_t i = 0; i < g.size(); ++i) {
                  db[i % bn] += g[i] * ad->values[i];
                }
              }
            });
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  auto& ov = out.values();
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] * s;
  quantize(ov);

  record_op("scale", {&a}, out, [ad = a.data(), od = out.data(), s]() {
    if (!ad->requires_grad) return;
    auto& da = grad_of(ad);
    for (std::size_t i = 0; i < od->grad.size(); ++i) {
      da[i] += od->grad[i] * s;
    }
  });
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  auto& ov = out.values();
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] > 0.0 ? av[i] : 0.0;
  quantize(ov);

  record_op("relu", {&a}, out, [ad = a.data(), od = out.data()]() {
    if (!ad->requires_grad) return;
    auto& da = grad_of(ad);
    for (std::size_t i = 0; i < od->grad.size(); ++i) {
      if (ad->values[i] > 0.0) da[i] += od->grad[i];
    }
  });
  return out;
}

// ---- softmax ---------------------------------------------------------

Tensor softmax(const Tensor& x) {
  if (x.shape().empty()) {
    throw DimensionError("softmax requires rank >= 1, got a scalar");
  }
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.numel() / cols;
  Tensor out = Tensor::zeros(x.shape());
  std::ptrdiff_t bad =
      kernels::softmax_rows(rows, cols, x.values().data(), out.values().data());
  if (bad >= 0) {
    throw DataError("softmax has no valid distribution: slice " +
                    std::to_string(bad) + " is entirely -inf");
  }
  quantize(out.values());

  record_op("softmax", {&x}, out,
            [xd = x.data(), od = out.data(), rows, cols]() {
              if (!xd->requires_grad) return;
              auto& dx = grad_of(xd);
              const auto& y = od->values;
              const auto& g = od->grad;
              for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t base = r * cols;
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) {
                  dot += g[base + j] * y[base + j];
                }
                for (std::size_t j = 0; j < cols; ++j) {
                  dx[base + j] += y[base + j] * (g[base + j] - dot);
                }
              }
            });
  return out;
}

// ---- layer norm ------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  if (x.shape().empty()) {
    throw DimensionError("layer_norm requires rank >= 1 input");
  }
  const std::size_t cols = x.shape().back();
  if (gain.shape() != Shape{cols} || bias.shape() != Shape{cols}) {
    throw DimensionError("layer_norm gain/bias must be shaped [" +
                         std::to_string(cols) + "], got " +
                         shape_str(gain.shape()) + " and " +
                         shape_str(bias.shape()));
  }
  const std::size_t rows = x.numel() / cols;
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> mean(rows), rstd(rows);
  kernels::layer_norm_rows(rows, cols, x.values().data(), gain.values().data(),
                           bias.values().data(), eps, out.values().data(),
                           mean.data(), rstd.data());
  quantize(out.values());

  record_op(
      "layer_norm", {&x, &gain, &bias}, out,
      [xd = x.data(), gd = gain.data(), bd = bias.data(), od = out.data(),
       mean = std::move(mean), rstd = std::move(rstd), rows, cols]() {
        const auto& g = od->grad;
        const auto& xv = xd->values;
        const auto& gainv = gd->values;
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t base = r * cols;
          const double mu = mean[r];
          const double rs = rstd[r];
          // dyh = upstream * gain; means taken within the row
          double mean_dyh = 0.0, mean_dyh_xhat = 0.0;
          for (std::size_t j = 0; j < cols; ++j) {
            const double xhat = (xv[base + j] - mu) * rs;
            const double dyh = g[base + j] * gainv[j];
            mean_dyh += dyh;
            mean_dyh_xhat += dyh * xhat;
          }
          mean_dyh /= static_cast<double>(cols);
          mean_dyh_xhat /= static_cast<double>(cols);
          if (xd->requires_grad) {
            auto& dx = grad_of(xd);
            for (std::size_t j = 0; j < cols; ++j) {
              const double xhat = (xv[base + j] - mu) * rs;
              const double dyh = g[base + j] * gainv[j];
              dx[base + j] += rs * (dyh - mean_dyh - xhat * mean_dyh_xhat);
            }
          }
          if (gd->requires_grad) {
            auto& dgain = grad_of(gd);
            for (std::size_t j = 0; j < cols; ++j) {
              const double xhat = (xv[base + j] - mu) * rs;
              dgain[j] += g[base + j] * xhat;
            }
          }
          if (bd->requires_grad) {
            auto& dbias = grad_of(bd);
            for (std::size_t j = 0; j < cols; ++j) dbias[j] += g[base + j];
          }
        }
      });
  return out;
}

// ---- embedding -------------------------------------------------------

Tensor embedding_lookup(const Tensor& table, const tok::TokenSeq& ids) {
  if (table.shape().size() != 2) {
    throw DimensionError("embedding table must be [V, d], got " +
                         shape_str(table.shape()));
  }
  const std::size_t v = table.shape()[0];
  const std::size_t d = table.shape()[1];
  for (tok::TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw DataError("embedding id " + std::to_string(id) +
                      " out of range for table of " + std::to_string(v) +
                      " rows");
    }
  }
  Tensor out = Tensor::zeros({ids.size(), d});
  auto& ov = out.values();
  const auto& tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t row = static_cast<std::size_t>(ids[i]);
    std::copy(tv.begin() + row * d, tv.begin() + (row + 1) * d,
              ov.begin() + i * d);
  }
  quantize(ov);

  record_op("embedding_lookup", {&table}, out,
            [td = table.data(), od = out.data(), ids, d]() {
              if (!td->requires_grad) return;
              auto& dt = grad_of(td);
              const auto& g = od->grad;
              for (std::size_t i = 0; i < ids.size(); ++i) {
                const std::size_t row = static_cast<std::size_t>(ids[i]);
                for (std::size_t j = 0; j < d; ++j) {
                  dt[row * d + j] += g[i * d + j];
                }
              }
            });
  return out;
}

// ---- cross entropy ---------------------------------------------------

namespace {

Tensor cross_entropy_impl(const Tensor& logits, const tok::TokenSeq& targets,
                          tok::TokenId ignore_id, bool mean,
                          std::size_t* count_out, double smoothing) {
  if (logits.shape().size() < 2) {
    throw DimensionError("cross_entropy logits must be [..., V], got " +
                         shape_str(logits.shape()));
  }
  const std::size_t vocab = logits.shape().back();
  const std::size_t rows = logits.numel() / vocab;
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy got " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(rows) + " positions");
  }
  for (tok::TokenId t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw DataError("cross_entropy target " + std::to_string(t) +
                      " out of range for vocab " + std::to_string(vocab));
    }
  }

  const auto& lv = logits.values();
  std::vector<double> probs(rows * vocab);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * vocab;
    double mx = lv[base];
    for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, lv[base + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      probs[base + j] = std::exp(lv[base + j] - mx);
      sum += probs[base + j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < vocab; ++j) probs[base + j] *= inv;
    if (targets[r] == ignore_id) continue;
    const double log_z = std::log(sum) + mx;
    double nll = log_z - lv[base + static_cast<std::size_t>(targets[r])];
    if (smoothing > 0.0) {
      double logit_mean = 0.0;
      for (std::size_t j = 0; j < vocab; ++j) logit_mean += lv[base + j];
      logit_mean /= static_cast<double>(vocab);
      nll = (1.0 - smoothing) * nll + smoothing * (log_z - logit_mean);
    }
    total += nll;
    ++count;
  }
  if (count == 0) {
    throw DataError("cross_entropy: every position carries the ignored id");
  }
  if (count_out) *count_out = count;

  Tensor out(mean ? total / static_cast<double>(count) : total);
  quantize(out.values());

  record_op("cross_entropy", {&logits}, out,
            [ld = logits.data(), od = out.data(), probs = std::move(probs),
             targets, ignore_id, vocab, rows, count, mean, smoothing]() {
              if (!ld->requires_grad) return;
              const double upstream = od->grad[0];
              const double scalefac =
                  mean ? upstream / static_cast<double>(count) : upstream;
              const double off_mass = smoothing / static_cast<double>(vocab);
              auto& dl = grad_of(ld);
              for (std::size_t r = 0; r < rows; ++r) {
                if (targets[r] == ignore_id) continue;
                const std::size_t base = r * vocab;
                for (std::size_t j = 0; j < vocab; ++j) {
                  double p = probs[base + j] - off_mass;
                  if (j == static_cast<std::size_t>(targets[r])) {
                    p -= 1.0 - smoothing;
                  }
                  dl[base + j] += scalefac * p;
                }
              }
            });
  return out;
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, const tok::TokenSeq& targets,
                     tok::TokenId ignore_id) {
  return cross_entropy_impl(logits, targets, ignore_id, true, nullptr, 0.0);
}

Tensor cross_entropy_sum(const Tensor& logits, const tok::TokenSeq& targets,
                         tok::TokenId ignore_id, std::size_t* count_out,
                         double label_smoothing) {
  return cross_entropy_impl(logits, targets, ignore_id, false, count_out,
                            label_smoothing);
}

// ---- shape ops -------------------------------------------------------

Tensor reshape(const Tensor& t, Shape new_shape) {
  if (shape_numel(new_shape) != t.numel()) {
    throw DimensionError("reshape " + shape_str(t.shape()) + " -> " +
                         shape_str(new_shape) + " changes element count");
  }
  Tensor out(std::move(new_shape), t.values());

  record_op("reshape", {&t}, out, [td = t.data(), od = out.data()]() {
    if (!td->requires_grad) return;
    auto& dt = grad_of(td);
    for (std::size_t i = 0; i < od->grad.size(); ++i) dt[i] += od->grad[i];
  });
  return out;
}

namespace {

// out[..., j, ..., i, ...] = in[..., i, ..., j, ...] with axes a<b swapped.
void swap_axes_copy(const std::vector<double>& in, const Shape& in_shape,
                    std::size_t ax_a, std::size_t ax_b,
                    std::vector<double>& out) {
  Shape out_shape = in_shape;
  std::swap(out_shape[ax_a], out_shape[ax_b]);
  std::vector<std::size_t> in_strides(in_shape.size(), 1);
  for (std::size_t i = in_shape.size() - 1; i > 0; --i) {
    in_strides[i - 1] = in_strides[i] * in_shape[i];
  }
  const std::size_t n = in.size();
  std::vector<std::size_t> idx(out_shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    // decompose flat into out coordinates
    std::size_t rem = flat;
    for (std::size_t d = out_shape.size(); d > 0; --d) {
      idx[d - 1] = rem % out_shape[d - 1];
      rem /= out_shape[d - 1];
    }
    std::swap(idx[ax_a], idx[ax_b]);  // now input coordinates
    std::size_t src = 0;
    for (std::size_t d = 0; d < in_shape.size(); ++d) {
      src += idx[d] * in_strides[d];
    }
    out[flat] = in[src];
  }
}

}  // namespace

Tensor transpose(const Tensor& t, std::size_t axis_a, std::size_t axis_b) {
  const Shape& s = t.shape();
  if (axis_a >= s.size() || axis_b >= s.size()) {
    throw DimensionError("transpose axes (" + std::to_string(axis_a) + "," +
                         std::to_string(axis_b) + ") out of range for " +
                         shape_str(s));
  }
  Shape out_shape = s;
  std::swap(out_shape[axis_a], out_shape[axis_b]);
  Tensor out = Tensor::zeros(out_shape);
  swap_axes_copy(t.values(), s, axis_a, axis_b, out.values());

  record_op("transpose", {&t}, out,
            [td = t.data(), od = out.data(), axis_a, axis_b]() {
              if (!td->requires_grad) return;
              // The inverse of an axis swap is the same swap.
              std::vector<double> back(od->grad.size());
              swap_axes_copy(od->grad, od->shape, axis_a, axis_b, back);
              accumulate_grad(td, back);
            });
  return out;
}

Tensor sum(const Tensor& t) {
  double total = 0.0;
  for (double v : t.values()) total += v;
  Tensor out(total);
  quantize(out.values());

  record_op("sum", {&t}, out, [td = t.data(), od = out.data()]() {
    if (!td->requires_grad) return;
    auto& dt = grad_of(td);
    const double g = od->grad[0];
    for (double& v : dt) v += g;
  });
  return out;
}

}  // namespace nmt::tensor
