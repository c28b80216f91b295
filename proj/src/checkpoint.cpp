#include "flowlut/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "flowlut/errors.hpp"

namespace flowlut {
namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class T>
  void le(T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
    }
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const Tensor& t) {
    le(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) le(static_cast<std::uint64_t>(d));
    for (float v : t.data()) f32(v);
  }
  void section(const char tag[4], const Writer& payload) {
    bytes(tag, 4);
    le(static_cast<std::uint64_t>(payload.out_.size()));
    bytes(payload.out_.data(), payload.out_.size());
  }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> data, std::size_t base, std::string section)
      : data_(data), base_(base), section_(std::move(section)) {}

  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw LoadError("checkpoint truncated in section " + section_ + " at byte " +
                          std::to_string(base_ + pos_),
                      section_);
    }
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <class T>
  T le() {
    auto b = take(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return static_cast<T>(v);
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  std::string str() {
    const auto n = le<std::uint32_t>();
    auto b = take(n);
    return std::string(b.begin(), b.end());
  }
  Tensor tensor() {
    const auto rank = le<std::uint32_t>();
    if (rank > 8) fail("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(le<std::uint64_t>());
      if (d && n > (data_.size() - pos_) / d) fail("tensor extent exceeds section size");
      n *= d;
    }
    need(n * 4);
    std::vector<float> v(n);
    for (auto& x : v) x = f32();
    return Tensor(std::move(shape), std::move(v));
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw LoadError("checkpoint section " + section_ + ": " + msg, section_);
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t base_;
  std::string section_;
  std::size_t pos_ = 0;
};

void write_tensor_list(Writer& w, const std::vector<NamedTensor>& ts) {
  w.le(static_cast<std::uint32_t>(ts.size()));
  for (const auto& t : ts) w.tensor(*t.tensor);
}

void read_tensor_list(Reader& r, const std::vector<NamedTensor>& dst) {
  const auto n = r.le<std::uint32_t>();
  if (n != dst.size()) {
    r.fail("expected " + std::to_string(dst.size()) + " tensors, found " + std::to_string(n));
  }
  for (const auto& t : dst) {
    Tensor v = r.tensor();
    if (v.shape() != t.tensor->shape()) {
      r.fail(t.name + " has shape " + shape_str(v.shape()) + ", config implies " +
             shape_str(t.tensor->shape()));
    }
    *t.tensor = std::move(v);
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const FlowLutModel& model,
                                               const OptimizerState& state) {
  auto& m = const_cast<FlowLutModel&>(model);
  Writer out;
  out.bytes(kCheckpointMagic, 4);
  out.le(kCheckpointVersion);

  Writer conf;
  const auto cfg = model.config.to_map();
  conf.le(static_cast<std::uint32_t>(cfg.size()));
  for (const auto& [k, v] : cfg) {
    conf.str(k);
    conf.str(v);
  }
  out.section("CONF", conf);

  Writer luts;
  luts.le(static_cast<std::uint32_t>(model.bank.count()));
  for (std::size_t i = 0; i < model.bank.count(); ++i) {
    const Lut3D& l = model.bank.luts[i];
    luts.str(i < model.bank.names.size() ? model.bank.names[i] : std::string("lut"));
    luts.le(static_cast<std::uint32_t>(l.size));
    luts.le(static_cast<std::uint8_t>(l.trainable ? 1 : 0));
    for (float v : l.table.data()) luts.f32(v);
  }
  out.section("LUTS", luts);

  Writer wgen;
  write_tensor_list(wgen, m.weightgen.tensors());
  out.section("WGEN", wgen);

  Writer fnet;
  write_tensor_list(fnet, m.flownet.tensors());
  out.section("FNET", fnet);

  Writer optm;
  optm.le(static_cast<std::uint64_t>(state.step));
  optm.le(static_cast<std::uint32_t>(state.m.size()));
  for (std::size_t i = 0; i < state.m.size(); ++i) {
    optm.tensor(state.m[i]);
    optm.tensor(state.v[i]);
  }
  out.section("OPTM", optm);
  return std::move(out.data());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5) throw LoadError("checkpoint truncated in header", "header");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw LoadError("bad checkpoint magic (expected FLUT)", "header");
  }
  if (bytes[4] != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(bytes[4]) +
                        " (expected " + std::to_string(kCheckpointVersion) + ")",
                    "header");
  }
  std::size_t pos = 5;

  auto next_section = [&](const char* tag) {
    const std::string name(tag, 4);
    if (bytes.size() - pos < 12) {
      throw LoadError("checkpoint truncated before section " + name, name);
    }
    if (std::memcmp(bytes.data() + pos, tag, 4) != 0) {
      throw LoadError("expected section " + name + " at byte " + std::to_string(pos), name);
    }
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[pos + 4 + i]) << (8 * i);
    pos += 12;
    if (bytes.size() - pos < len) {
      throw LoadError("checkpoint truncated in section " + name + ": payload needs " +
                          std::to_string(len) + " bytes, " + std::to_string(bytes.size() - pos) +
                          " remain",
                      name);
    }
    Reader r(bytes.subspan(pos, len), pos, name);
    pos += len;
    return r;
  };
  auto finish = [](const Reader& r) {
    if (!r.done()) r.fail("trailing bytes in section");
  };

  Reader conf = next_section("CONF");
  PipelineConfig cfg;
  const auto nkeys = conf.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < nkeys; ++i) {
    const std::string k = conf.str();
    const std::string v = conf.str();
    try {
      cfg.set(k, v);
    } catch (const Error& e) {
      conf.fail(e.what());
    }
  }
  finish(conf);
  try {
    cfg.validate();
  } catch (const Error& e) {
    conf.fail(e.what());
  }

  Checkpoint ck{FlowLutModel::zeroed(cfg), {}};

  Reader luts = next_section("LUTS");
  const auto nluts = luts.le<std::uint32_t>();
  if (nluts != cfg.num_luts) {
    luts.fail("holds " + std::to_string(nluts) + " LUTs, config says " +
              std::to_string(cfg.num_luts));
  }
  for (std::uint32_t i = 0; i < nluts; ++i) {
    ck.model.bank.names[i] = luts.str();
    const auto d = luts.le<std::uint32_t>();
    if (d != cfg.lattice_size) luts.fail("LUT " + std::to_string(i) + " has lattice size " + std::to_string(d));
    Lut3D& l = ck.model.bank.luts[i];
    l.trainable = luts.le<std::uint8_t>() != 0;
    luts.need(l.table.numel() * 4);
    for (float& v : l.table.data()) v = luts.f32();
  }
  finish(luts);

  Reader wgen = next_section("WGEN");
  read_tensor_list(wgen, ck.model.weightgen.tensors());
  finish(wgen);

  Reader fnet = next_section("FNET");
  read_tensor_list(fnet, ck.model.flownet.tensors());
  finish(fnet);

  Reader optm = next_section("OPTM");
  ck.optimizer.step = optm.le<std::uint64_t>();
  const auto nopt = optm.le<std::uint32_t>();
  auto params = ck.model.parameters();
  if (nopt != 0 && nopt != params.size()) {
    optm.fail("holds moments for " + std::to_string(nopt) + " parameters, model has " +
              std::to_string(params.size()));
  }
  for (std::uint32_t i = 0; i < nopt; ++i) {
    Tensor m = optm.tensor();
    Tensor v = optm.tensor();
    if (m.shape() != params[i].tensor->shape() || v.shape() != m.shape()) {
      optm.fail("moment shape mismatch for " + params[i].name);
    }
    ck.optimizer.m.push_back(std::move(m));
    ck.optimizer.v.push_back(std::move(v));
  }
  finish(optm);
  if (pos != bytes.size()) throw LoadError("trailing bytes after last section", "OPTM");
  return ck;
}

void save_checkpoint(const FlowLutModel& model, const OptimizerState& state,
                     const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model, state);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace flowlut
