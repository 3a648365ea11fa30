// SPDX-License-Identifier: Apache-2.0
#include "slu/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "slu/config.hpp"
#include "slu/error.hpp"

namespace slu {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'T', 'F'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view in, const std::string& source) : in_(in), source_(source) {}

  void need(std::size_t n, const char* what) {
    if (in_.size() - at_ < n) fail(std::string("truncated while reading ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(in_[at_++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[at_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in_[at_++])) << (8 * i);
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(in_.substr(at_, n));
    at_ += n;
    return s;
  }
  bool done() const { return at_ == in_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw_error(ErrorKind::kParse, "checkpoint '" + source_ + "': " + what);
  }

 private:
  std::string_view in_;
  std::size_t at_ = 0;
  std::string source_;
};

void write_tensor(Writer& w, const std::string& name, const Tensor& t, Precision precision) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(t.shape().size()));
  for (auto d : t.shape()) w.u64(d);
  w.u8(static_cast<std::uint8_t>(precision));
  for (double x : t.data()) {
    if (precision == Precision::kF64) {
      w.u64(std::bit_cast<std::uint64_t>(x));
    } else {
      w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
  }
}

void write_vocab(Writer& w, const Vocabulary& v) {
  w.u32(static_cast<std::uint32_t>(v.reserved()));
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (const auto& e : v.entries()) w.str(e);
}

Vocabulary read_vocab(Reader& r) {
  const std::uint32_t reserved = r.u32("vocabulary");
  const std::uint32_t n = r.u32("vocabulary");
  std::vector<std::string> entries;
  for (std::uint32_t i = 0; i < n; ++i) entries.push_back(r.str("vocabulary entry"));
  try {
    return Vocabulary(std::move(entries), reserved);
  } catch (const Error& e) {
    r.fail(e.what());
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt, Precision precision) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.params.size() + ckpt.adam.m.size() + ckpt.adam.v.size()));
  for (const auto& [name, t] : ckpt.params) write_tensor(w, "param/" + name, t, precision);
  for (const auto& [name, t] : ckpt.adam.m) write_tensor(w, "adam.m/" + name, t, precision);
  for (const auto& [name, t] : ckpt.adam.v) write_tensor(w, "adam.v/" + name, t, precision);
  w.str(model_config_text(ckpt.model));
  write_vocab(w, ckpt.vocab.tokens);
  write_vocab(w, ckpt.vocab.slots);
  write_vocab(w, ckpt.vocab.intents);
  w.u64(ckpt.step);
  return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes, const std::string& source) {
  Reader r(bytes, source);
  r.need(4, "magic");
  if (bytes.substr(0, 4) != std::string_view(kMagic, 4)) r.fail("not a checkpoint (bad magic bytes)");
  for (int i = 0; i < 4; ++i) r.u8("magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw_error(ErrorKind::kUnsupported, "checkpoint '" + source + "' has format version " + std::to_string(version) +
                                             ", expected " + std::to_string(kCheckpointVersion));
  }

  Checkpoint ckpt;
  const std::uint32_t entries = r.u32("entry count");
  for (std::uint32_t e = 0; e < entries; ++e) {
    const std::string name = r.str("entry name");
    const std::uint32_t ndim = r.u32("rank");
    if (ndim == 0 || ndim > 8) r.fail("entry '" + name + "' has rank " + std::to_string(ndim));
    std::vector<std::size_t> shape;
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const std::uint64_t dim = r.u64("dimension");
      if (dim == 0 || dim > (std::uint64_t{1} << 32)) r.fail("entry '" + name + "' has bad dimension");
      shape.push_back(static_cast<std::size_t>(dim));
      count *= static_cast<std::size_t>(dim);
    }
    const std::uint8_t precision = r.u8("precision");
    if (precision > 1) r.fail("entry '" + name + "' has unknown precision tag " + std::to_string(precision));
    r.need(count * (precision == 1 ? 8 : 4), "tensor data");
    std::vector<double> data(count);
    for (auto& x : data) {
      x = precision == 1 ? std::bit_cast<double>(r.u64("tensor data"))
                         : static_cast<double>(std::bit_cast<float>(r.u32("tensor data")));
    }
    const auto slash = name.find('/');
    const std::string kind = name.substr(0, slash);
    const std::string key = slash == std::string::npos ? "" : name.substr(slash + 1);
    if (key.empty()) r.fail("malformed entry name '" + name + "'");
    if (kind == "param") {
      Tensor& t = ckpt.params.add(key, shape);
      std::copy(data.begin(), data.end(), t.data().begin());
    } else if (kind == "adam.m") {
      ckpt.adam.m.emplace(key, Tensor(shape, std::move(data)));
    } else if (kind == "adam.v") {
      ckpt.adam.v.emplace(key, Tensor(shape, std::move(data)));
    } else {
      r.fail("unknown entry kind '" + kind + "'");
    }
  }
  try {
    ckpt.model = parse_model_config_text(r.str("config"), source);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kConfig) throw;
    r.fail(e.what());
  }
  ckpt.vocab.tokens = read_vocab(r);
  ckpt.vocab.slots = read_vocab(r);
  ckpt.vocab.intents = read_vocab(r);
  ckpt.step = r.u64("step");
  ckpt.adam.t = ckpt.step;
  if (!r.done()) r.fail("trailing bytes after the step counter");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt, Precision precision) {
  const std::string bytes = serialize_checkpoint(ckpt, precision);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(ErrorKind::kIo, "cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_error(ErrorKind::kIo, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorKind::kIo, "cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes, path);
}

}  // namespace slu
