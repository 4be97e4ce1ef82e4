#include "lf/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <set>

namespace lf {

namespace {

constexpr char kMagic[4] = {'L', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put(std::vector<std::uint8_t>& buf, U value) {
  // Fields are little-endian on disk; this host is little-endian.
  const std::size_t at = buf.size();
  buf.resize(at + sizeof(U));
  std::memcpy(buf.data() + at, &value, sizeof(U));
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename U>
  U get() {
    if (pos_ + sizeof(U) > size_) throw DataError("checkpoint: truncated file");
    U value;
    std::memcpy(&value, data_ + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }

  void get_bytes(void* out, std::size_t count) {
    if (pos_ + count > size_) throw DataError("checkpoint: truncated file");
    std::memcpy(out, data_ + pos_, count);
    pos_ += count;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t payload_crc(const std::uint8_t* data, std::size_t size) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(size)));
}

std::size_t dtype_size(Dtype d) { return d == Dtype::f32 ? 4 : 8; }

}  // namespace

void save_checkpoint_file(const std::string& path, const std::vector<RawTensor>& tensors) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put<std::uint32_t>(buf, kVersion);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xffff) throw UsageError("checkpoint: tensor name too long");
    if (t.bytes.size() != t.numel() * dtype_size(t.dtype))
      throw UsageError("checkpoint: tensor '" + t.name + "' byte size does not match dims");
    put<std::uint16_t>(buf, static_cast<std::uint16_t>(t.name.size()));
    buf.insert(buf.end(), t.name.begin(), t.name.end());
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(t.dtype));
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(t.dims.size()));
    for (std::uint64_t d : t.dims) put<std::uint64_t>(buf, d);
    buf.insert(buf.end(), t.bytes.begin(), t.bytes.end());
  }
  put<std::uint32_t>(buf, payload_crc(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("checkpoint: write failed: " + path);
}

std::vector<RawTensor> load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (buf.size() < 16) throw DataError("checkpoint: " + path + " is too short");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw DataError("checkpoint: bad magic in " + path);

  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  if (payload_crc(buf.data(), buf.size() - 4) != stored_crc)
    throw DataError("checkpoint: CRC mismatch in " + path + " (corrupt file)");

  Reader r(buf.data() + 4, buf.size() - 8);
  const std::uint32_t version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t count = r.get<std::uint32_t>();
  std::vector<RawTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    RawTensor t;
    const std::uint16_t name_len = r.get<std::uint16_t>();
    t.name.resize(name_len);
    r.get_bytes(t.name.data(), name_len);
    const std::uint8_t dt = r.get<std::uint8_t>();
    if (dt > 1) throw DataError("checkpoint: unknown dtype tag in '" + t.name + "'");
    t.dtype = static_cast<Dtype>(dt);
    const std::uint8_t rank = r.get<std::uint8_t>();
    t.dims.resize(rank);
    for (std::uint8_t d = 0; d < rank; ++d) t.dims[d] = r.get<std::uint64_t>();
    const std::size_t nbytes = t.numel() * dtype_size(t.dtype);
    t.bytes.resize(nbytes);
    r.get_bytes(t.bytes.data(), nbytes);
    tensors.push_back(std::move(t));
  }
  return tensors;
}

const RawTensor* find_tensor(const std::vector<RawTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

namespace {

RawTensor meta_tensor(const std::string& name, const std::vector<double>& values) {
  RawTensor t;
  t.name = name;
  t.dtype = Dtype::f64;
  t.dims = {static_cast<std::uint64_t>(values.size())};
  t.bytes.resize(values.size() * 8);
  std::memcpy(t.bytes.data(), values.data(), t.bytes.size());
  return t;
}

std::vector<double> meta_values(const std::vector<RawTensor>& tensors, const std::string& name) {
  const RawTensor* t = find_tensor(tensors, name);
  if (!t) throw DataError("checkpoint: missing meta tensor '" + name + "'");
  if (t->dtype != Dtype::f64) throw DataError("checkpoint: meta tensor '" + name + "' not f64");
  std::vector<double> out(t->numel());
  std::memcpy(out.data(), t->bytes.data(), t->bytes.size());
  return out;
}

double meta_scalar(const std::vector<RawTensor>& tensors, const std::string& name) {
  const auto v = meta_values(tensors, name);
  if (v.size() != 1) throw DataError("checkpoint: meta tensor '" + name + "' not scalar");
  return v[0];
}

template <typename T>
RawTensor param_tensor(const std::string& name, const Tensor<T>& p) {
  RawTensor t;
  t.name = name;
  t.dtype = dtype_of<T>();
  for (std::size_t d : p.shape()) t.dims.push_back(d);
  t.bytes.resize(p.size() * sizeof(T));
  std::memcpy(t.bytes.data(), p.data(), t.bytes.size());
  return t;
}

const std::set<std::string> kMetaNames = {
    "meta.arch",          "meta.dtype",         "meta.layers",
    "meta.heads",         "meta.dmodel",        "meta.vocab",
    "meta.max_positions", "meta.dec_layers",    "meta.dropout",
    "meta.kernel",        "meta.relative_bias", "meta.half_windows",
    "meta.dilations",     "meta.dilated_heads", "meta.enc_globals",
    "meta.freeze_mode",   "meta.freeze_original_positions"};

}  // namespace

template <typename T>
std::vector<RawTensor> model_to_raw(const Model<T>& m,
                                    const std::optional<FreezePolicy>& freeze) {
  const ModelConfig& c = m.cfg;
  std::vector<RawTensor> out;
  out.push_back(meta_tensor("meta.arch", {static_cast<double>(static_cast<int>(c.arch))}));
  out.push_back(meta_tensor("meta.dtype", {static_cast<double>(static_cast<int>(dtype_of<T>()))}));
  out.push_back(meta_tensor("meta.layers", {static_cast<double>(c.layers)}));
  out.push_back(meta_tensor("meta.heads", {static_cast<double>(c.heads)}));
  out.push_back(meta_tensor("meta.dmodel", {static_cast<double>(c.dmodel)}));
  out.push_back(meta_tensor("meta.vocab", {static_cast<double>(c.vocab)}));
  out.push_back(meta_tensor("meta.max_positions", {static_cast<double>(c.max_positions)}));
  out.push_back(meta_tensor("meta.dec_layers", {static_cast<double>(c.dec_layers)}));
  out.push_back(meta_tensor("meta.dropout", {c.dropout}));
  out.push_back(meta_tensor("meta.kernel", {static_cast<double>(static_cast<int>(c.kernel))}));
  out.push_back(meta_tensor("meta.relative_bias", {c.relative_bias ? 1.0 : 0.0}));
  std::vector<double> hw, dil, dheads;
  for (const auto& p : c.pattern) {
    hw.push_back(static_cast<double>(p.half_window));
    dil.push_back(static_cast<double>(p.dilation));
    dheads.push_back(static_cast<double>(p.dilated_heads));
  }
  out.push_back(meta_tensor("meta.half_windows", hw));
  out.push_back(meta_tensor("meta.dilations", dil));
  out.push_back(meta_tensor("meta.dilated_heads", dheads));
  std::vector<double> globals;
  for (std::size_t g : c.enc_globals) globals.push_back(static_cast<double>(g));
  out.push_back(meta_tensor("meta.enc_globals", globals));
  if (freeze) {
    out.push_back(meta_tensor("meta.freeze_mode",
                              {static_cast<double>(static_cast<int>(freeze->mode))}));
    out.push_back(meta_tensor("meta.freeze_original_positions",
                              {static_cast<double>(freeze->original_positions)}));
  }
  for (const auto& [name, p] : m.named_params()) out.push_back(param_tensor(name, p));
  return out;
}

Dtype checkpoint_dtype(const std::vector<RawTensor>& tensors) {
  const int tag = static_cast<int>(meta_scalar(tensors, "meta.dtype"));
  if (tag != 0 && tag != 1) throw DataError("checkpoint: invalid dtype tag");
  return static_cast<Dtype>(tag);
}

ModelConfig config_from_raw(const std::vector<RawTensor>& tensors) {
  ModelConfig c;
  c.arch = static_cast<Arch>(static_cast<int>(meta_scalar(tensors, "meta.arch")));
  c.dtype = checkpoint_dtype(tensors);
  c.layers = static_cast<std::size_t>(meta_scalar(tensors, "meta.layers"));
  c.heads = static_cast<std::size_t>(meta_scalar(tensors, "meta.heads"));
  c.dmodel = static_cast<std::size_t>(meta_scalar(tensors, "meta.dmodel"));
  c.vocab = static_cast<std::size_t>(meta_scalar(tensors, "meta.vocab"));
  c.max_positions = static_cast<std::size_t>(meta_scalar(tensors, "meta.max_positions"));
  c.dec_layers = static_cast<std::size_t>(meta_scalar(tensors, "meta.dec_layers"));
  c.dropout = meta_scalar(tensors, "meta.dropout");
  c.kernel = static_cast<BandImpl>(static_cast<int>(meta_scalar(tensors, "meta.kernel")));
  c.relative_bias = meta_scalar(tensors, "meta.relative_bias") != 0.0;
  const auto hw = meta_values(tensors, "meta.half_windows");
  const auto dil = meta_values(tensors, "meta.dilations");
  const auto dheads = meta_values(tensors, "meta.dilated_heads");
  if (hw.size() != c.layers || dil.size() != c.layers || dheads.size() != c.layers)
    throw DataError("checkpoint: pattern meta does not match layer count");
  c.pattern.resize(c.layers);
  for (std::size_t l = 0; l < c.layers; ++l) {
    c.pattern[l].half_window = static_cast<long>(hw[l]);
    c.pattern[l].dilation = static_cast<long>(dil[l]);
    c.pattern[l].dilated_heads = static_cast<long>(dheads[l]);
  }
  c.enc_globals.clear();
  for (double g : meta_values(tensors, "meta.enc_globals"))
    c.enc_globals.push_back(static_cast<std::size_t>(g));
  return c;
}

std::optional<FreezePolicy> freeze_from_raw(const std::vector<RawTensor>& tensors) {
  if (!find_tensor(tensors, "meta.freeze_mode")) return std::nullopt;
  FreezePolicy p;
  p.mode = static_cast<FreezeMode>(static_cast<int>(meta_scalar(tensors, "meta.freeze_mode")));
  p.original_positions =
      static_cast<std::size_t>(meta_scalar(tensors, "meta.freeze_original_positions"));
  return p;
}

template <typename T>
Model<T> model_from_raw(const std::vector<RawTensor>& tensors) {
  const ModelConfig cfg = config_from_raw(tensors);
  if (cfg.dtype != dtype_of<T>())
    throw DataError("checkpoint: stored dtype is " + std::string(dtype_name(cfg.dtype)) +
                    ", requested " + dtype_name(dtype_of<T>()));
  Model<T> m = Model<T>::init(cfg, 0);
  std::set<std::string> expected;
  for (auto& [name, p] : m.named_params()) {
    expected.insert(name);
    const RawTensor* t = find_tensor(tensors, name);
    if (!t) throw DataError("checkpoint: missing tensor '" + name + "'");
    if (t->dtype != dtype_of<T>())
      throw DataError("checkpoint: tensor '" + name + "' has mismatched dtype");
    if (t->numel() != p.size())
      throw DataError("checkpoint: tensor '" + name + "' has " + std::to_string(t->numel()) +
                      " values, expected " + std::to_string(p.size()));
    std::memcpy(p.data(), t->bytes.data(), t->bytes.size());
  }
  std::string unknown;
  for (const auto& t : tensors) {
    if (expected.count(t.name) || kMetaNames.count(t.name)) continue;
    unknown += (unknown.empty() ? "" : ", ") + t.name;
  }
  if (!unknown.empty())
    throw DataError("checkpoint: unknown tensor names: " + unknown);
  return m;
}

template <typename T>
void save_model(const Model<T>& m, const std::string& path,
                const std::optional<FreezePolicy>& freeze) {
  save_checkpoint_file(path, model_to_raw(m, freeze));
}

#define LF_INSTANTIATE_CKPT(T)                                                        \
  template std::vector<RawTensor> model_to_raw<T>(const Model<T>&,                    \
                                                  const std::optional<FreezePolicy>&); \
  template Model<T> model_from_raw<T>(const std::vector<RawTensor>&);                 \
  template void save_model<T>(const Model<T>&, const std::string&,                    \
                              const std::optional<FreezePolicy>&);

LF_INSTANTIATE_CKPT(float)
LF_INSTANTIATE_CKPT(double)

#undef LF_INSTANTIATE_CKPT

}  // namespace lf
