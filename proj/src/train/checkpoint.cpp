#include "nmt/train/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "nmt/error.hpp"

namespace nmt::train {

namespace {

constexpr char kMagic[8] = {'N', 'M', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
  void raw(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> buf, const std::string& path)
      : buf_(std::move(buf)), path_(path) {}

  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    check(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const std::uint64_t n = u64();
    check(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), buf_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  void raw(void* p, std::size_t n) {
    check(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t position() const { return pos_; }

 private:
  void check(std::size_t n) const {
    if (pos_ + n > buf_.size()) {
      throw DataError("checkpoint " + path_ + " is truncated");
    }
  }
  std::vector<char> buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

std::uint64_t config_fingerprint(const model::ModelConfig& c) {
  Writer w;
  w.u64(c.num_layers);
  w.u64(c.d_model);
  w.u64(c.num_heads);
  w.u64(c.d_ff);
  w.u64(c.src_vocab_size);
  w.u64(c.tgt_vocab_size);
  w.u64(c.max_len);
  w.f64(c.dropout_rate);
  return fnv1a(w.buffer().data(), w.buffer().size());
}

void save_checkpoint(const std::string& path, const TrainState& state,
                     const CheckpointMeta& meta) {
  const auto& c = state.params.config;
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u64(c.num_layers);
  w.u64(c.d_model);
  w.u64(c.num_heads);
  w.u64(c.d_ff);
  w.u64(c.src_vocab_size);
  w.u64(c.tgt_vocab_size);
  w.u64(c.max_len);
  w.f64(c.dropout_rate);
  w.u64(meta.config_fingerprint ? meta.config_fingerprint
                                : config_fingerprint(c));
  w.u64(meta.src_vocab_hash);
  w.u64(meta.tgt_vocab_hash);
  w.u64(meta.src_merges_hash);
  w.u64(meta.tgt_merges_hash);
  w.u64(meta.seed);
  w.u64(state.steps_done);
  w.u64(state.opt.step);

  auto named = state.params.named();
  if (state.opt.slots.size() != named.size()) {
    throw DataError("optimizer state does not match the parameter set");
  }
  w.u64(named.size());
  for (std::size_t i = 0; i < named.size(); ++i) {
    w.str(named[i].name);
    w.doubles(named[i].tensor.values());
    w.doubles(state.opt.slots[i].m);
    w.doubles(state.opt.slots[i].v);
  }
  const std::uint64_t checksum = fnv1a(w.buffer().data(), w.buffer().size());
  w.u64(checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(w.buffer().data(),
            static_cast<std::streamsize>(w.buffer().size()));
  out.flush();
  if (!out) throw IoError("write failure on " + path);
}

TrainState load_checkpoint(const std::string& path, CheckpointMeta* meta_out,
                           const model::ModelConfig* expect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path);
  if (buf.size() < sizeof kMagic + sizeof(std::uint64_t)) {
    throw DataError("checkpoint " + path + " is truncated");
  }
  std::uint64_t stored_checksum;
  std::memcpy(&stored_checksum, buf.data() + buf.size() - sizeof stored_checksum,
              sizeof stored_checksum);
  const std::uint64_t computed =
      fnv1a(buf.data(), buf.size() - sizeof stored_checksum);
  if (stored_checksum != computed) {
    throw DataError("checkpoint " + path + " failed its integrity check");
  }

  Reader r(std::move(buf), path);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw DataError(path + " is not a checkpoint file");
  }
  if (r.u32() != kVersion) {
    throw DataError("checkpoint " + path + " has an unsupported version");
  }
  model::ModelConfig c;
  c.num_layers = r.u64();
  c.d_model = r.u64();
  c.num_heads = r.u64();
  c.d_ff = r.u64();
  c.src_vocab_size = r.u64();
  c.tgt_vocab_size = r.u64();
  c.max_len = r.u64();
  c.dropout_rate = r.f64();

  CheckpointMeta meta;
  meta.config_fingerprint = r.u64();
  meta.src_vocab_hash = r.u64();
  meta.tgt_vocab_hash = r.u64();
  meta.src_merges_hash = r.u64();
  meta.tgt_merges_hash = r.u64();
  meta.seed = r.u64();
  if (expect && config_fingerprint(*expect) != meta.config_fingerprint) {
    throw DataError("checkpoint " + path +
                    " was trained under a different configuration "
                    "(fingerprint mismatch)");
  }

  TrainState state;
  state.params = model::init_params(c, 0);
  state.steps_done = r.u64();
  state.opt.step = r.u64();

  auto named = state.params.named();
  const std::uint64_t count = r.u64();
  if (count != named.size()) {
    throw DataError("checkpoint " + path + " holds " + std::to_string(count) +
                    " tensors, expected " + std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    const std::string name = r.str();
    if (name != named[i].name) {
      throw DataError("checkpoint " + path + " tensor order mismatch: got '" +
                      name + "', expected '" + named[i].name + "'");
    }
    auto values = r.doubles();
    if (values.size() != named[i].tensor.numel()) {
      throw DataError("checkpoint " + path + " tensor '" + name +
                      "' has wrong size");
    }
    named[i].tensor.values() = std::move(values);
    state.opt.slots.push_back({r.doubles(), r.doubles()});
    if (state.opt.slots.back().m.size() != named[i].tensor.numel() ||
        state.opt.slots.back().v.size() != named[i].tensor.numel()) {
      throw DataError("checkpoint " + path + " moment tensors for '" + name +
                      "' have wrong size");
    }
  }
  if (meta_out) *meta_out = meta;
  return state;
}

}  // namespace nmt::train
