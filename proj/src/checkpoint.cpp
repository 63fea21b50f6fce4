#include "checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "error.hpp"

namespace srforge::io {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'S', 'R', 'F', 'G'};
constexpr const char* kLeakyRecord = "config.leaky_slope";

class Writer {
 public:
  void u16(std::uint16_t v) { bytes(v, 2); }
  void u32(std::uint32_t v) { bytes(v, 4); }
  void u64(std::uint64_t v) { bytes(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void bytes(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint16_t u16() { return static_cast<std::uint16_t>(bytes(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(bytes(4)); }
  std::uint64_t u64() { return bytes(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > b_.size() - pos_) fail(ErrorCode::Io, "checkpoint truncated");
  }
  std::uint64_t bytes(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{b_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

Record make_record(std::string name, const Tensor& t) {
  const Shape s = t.shape();
  Record r{std::move(name), {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                             static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)},
           {}};
  r.data.assign(t.raw(), t.raw() + t.size());
  return r;
}

Tensor record_tensor(const Record& r) {
  if (r.dims.empty() || r.dims.size() > 4) fail(ErrorCode::Io, "record " + r.name + " has unsupported rank");
  std::array<std::size_t, 4> d{1, 1, 1, 1};
  // Lower ranks fill the trailing axes.
  const std::size_t off = 4 - r.dims.size();
  for (std::size_t i = 0; i < r.dims.size(); ++i) d[off + i] = r.dims[i];
  Tensor t({d[0], d[1], d[2], d[3]});
  std::copy(r.data.begin(), r.data.end(), t.raw());
  return t;
}

std::uint16_t kind_tag(ModelKind k) { return static_cast<std::uint16_t>(k); }

}  // namespace

const Record* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const Record& Checkpoint::get(const std::string& name) const {
  const Record* r = find(name);
  if (!r) fail(ErrorCode::Io, "checkpoint lacks record " + name);
  return *r;
}

std::vector<std::uint8_t> encode(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, 4);
  w.u16(kCheckpointVersion);
  w.u16(kind_tag(ckpt.kind));
  for (const auto v : ckpt.arch) w.u32(v);
  w.u32(ckpt.flags);
  w.u32(ckpt.epoch);
  w.u64(ckpt.step);
  w.u32(static_cast<std::uint32_t>(ckpt.records.size()));
  for (const auto& r : ckpt.records) {
    std::size_t count = 1;
    for (const auto d : r.dims) count *= d;
    if (count != r.data.size()) fail(ErrorCode::Internal, "record " + r.name + " size does not match its dims");
    w.u32(static_cast<std::uint32_t>(r.name.size()));
    w.raw(r.name.data(), r.name.size());
    w.u32(static_cast<std::uint32_t>(r.dims.size()));
    for (const auto d : r.dims) w.u32(d);
    for (const float v : r.data) w.f32(v);
  }
  return w.take();
}

Checkpoint decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) fail(ErrorCode::Io, "not a checkpoint (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    fail(ErrorCode::Io, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  const std::uint16_t kind = r.u16();
  if (kind < 1 || kind > 4) fail(ErrorCode::Io, "unknown model kind " + std::to_string(kind));
  c.kind = static_cast<ModelKind>(kind);
  for (auto& v : c.arch) v = r.u32();
  c.flags = r.u32();
  c.epoch = r.u32();
  c.step = r.u64();
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    Record rec;
    rec.name = r.str(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > 8) fail(ErrorCode::Io, "record " + rec.name + " has implausible rank");
    std::uint64_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      rec.dims.push_back(r.u32());
      count *= rec.dims.back();
    }
    if (count * 4 > r.remaining()) fail(ErrorCode::Io, "checkpoint truncated in record " + rec.name);
    rec.data.resize(count);
    for (auto& v : rec.data) v = r.f32();
    c.records.push_back(std::move(rec));
  }
  if (!r.done()) fail(ErrorCode::Io, "trailing bytes after checkpoint records");
  return c;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode(ckpt);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode(bytes);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

void append_parameters(Checkpoint& ckpt, const std::string& prefix, nn::Sequential<float>& net) {
  for (const auto& p : net.parameters()) ckpt.records.push_back(make_record(prefix + p.name, p.param->value));
}

void restore_parameters(const Checkpoint& ckpt, const std::string& prefix, nn::Sequential<float>& net) {
  for (const auto& p : net.parameters()) {
    const Record& r = ckpt.get(prefix + p.name);
    Tensor t = record_tensor(r);
    if (t.shape() != p.param->value.shape())
      fail(ErrorCode::Io, "record " + r.name + " has shape " + to_string(t.shape()) + ", model expects " +
                              to_string(p.param->value.shape()));
    p.param->value = std::move(t);
  }
}

void append_state(Checkpoint& ckpt, const std::string& prefix, const std::map<std::string, Tensor>& state) {
  for (const auto& [name, t] : state) ckpt.records.push_back(make_record(prefix + name, t));
}

std::map<std::string, Tensor> restore_state(const Checkpoint& ckpt, const std::string& prefix) {
  std::map<std::string, Tensor> out;
  for (const auto& r : ckpt.records) {
    if (r.name.compare(0, prefix.size(), prefix) == 0) out.emplace(r.name.substr(prefix.size()), record_tensor(r));
  }
  return out;
}

Checkpoint sr_checkpoint(const models::ModelConfig& cfg, nn::Sequential<float>& net) {
  Checkpoint c;
  c.kind = ModelKind::VdsrResNeXt;
  c.arch = {cfg.depth_middle, cfg.block_width, cfg.cardinality, cfg.base_channels, cfg.kernel};
  c.flags = cfg.with_bias ? kFlagBias : 0;
  append_parameters(c, "model.", net);
  return c;
}

models::ModelConfig sr_config(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::VdsrResNeXt && ckpt.kind != ModelKind::VdsrBaseline)
    fail(ErrorCode::Usage, "checkpoint does not hold a super-resolution model");
  models::ModelConfig cfg;
  cfg.depth_middle = ckpt.arch[0];
  cfg.block_width = ckpt.arch[1];
  cfg.cardinality = ckpt.arch[2];
  cfg.base_channels = ckpt.arch[3];
  cfg.kernel = ckpt.arch[4];
  cfg.with_bias = (ckpt.flags & kFlagBias) != 0;
  return cfg;
}

nn::Sequential<float> load_sr_model(const Checkpoint& ckpt) {
  const models::ModelConfig cfg = sr_config(ckpt);
  nn::Sequential<float> net = ckpt.kind == ModelKind::VdsrBaseline
                                  ? models::build_vdsr_baseline<float>(cfg.depth_middle, cfg.base_channels, cfg.with_bias)
                                  : (cfg.validate(), models::build_vdsr_resnext<float>(cfg));
  restore_parameters(ckpt, "model.", net);
  return net;
}

Checkpoint gan_checkpoint(srcgan::GanPair& pair) {
  const auto& g = pair.config;
  Checkpoint c;
  c.kind = ModelKind::Gan;
  c.arch = {static_cast<std::uint32_t>(g.g_width), static_cast<std::uint32_t>(g.g_width_out),
            static_cast<std::uint32_t>(g.d_width1), static_cast<std::uint32_t>(g.d_width2),
            static_cast<std::uint32_t>(g.scale)};
  c.flags = (g.conditioned ? kFlagConditioned : 0) | (g.saturating ? kFlagSaturating : 0) | kFlagBias;
  c.records.push_back({kLeakyRecord, {1}, {static_cast<float>(g.leaky_slope)}});
  append_parameters(c, "generator.", pair.generator);
  append_parameters(c, "discriminator.", pair.discriminator);
  return c;
}

srcgan::GanConfig gan_config(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::Gan) fail(ErrorCode::Usage, "checkpoint does not hold a GAN");
  srcgan::GanConfig g;
  g.g_width = ckpt.arch[0];
  g.g_width_out = ckpt.arch[1];
  g.d_width1 = ckpt.arch[2];
  g.d_width2 = ckpt.arch[3];
  g.scale = ckpt.arch[4];
  g.conditioned = (ckpt.flags & kFlagConditioned) != 0;
  g.saturating = (ckpt.flags & kFlagSaturating) != 0;
  const Record& leaky = ckpt.get(kLeakyRecord);
  if (leaky.data.size() != 1) fail(ErrorCode::Io, "malformed leaky slope record");
  g.leaky_slope = leaky.data[0];
  return g;
}

srcgan::GanPair load_gan(const Checkpoint& ckpt) {
  const srcgan::GanConfig cfg = gan_config(ckpt);
  srcgan::GanPair pair{cfg, srcgan::build_generator(cfg), srcgan::build_discriminator(cfg)};
  restore_parameters(ckpt, "generator.", pair.generator);
  restore_parameters(ckpt, "discriminator.", pair.discriminator);
  return pair;
}

Checkpoint classifier_checkpoint(nn::Sequential<float>& net) {
  Checkpoint c;
  c.kind = ModelKind::Classifier;
  c.flags = kFlagBias;
  append_parameters(c, "classifier.", net);
  return c;
}

nn::Sequential<float> load_classifier(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::Classifier) fail(ErrorCode::Usage, "checkpoint does not hold a classifier");
  auto net = srcgan::build_classifier();
  restore_parameters(ckpt, "classifier.", net);
  return net;
}

}  // namespace srforge::io
