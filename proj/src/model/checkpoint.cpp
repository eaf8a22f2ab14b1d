#include "deffx/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "../autodiff/ops_util.hpp"

namespace deffx::model {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[4] = {'D', 'F', 'X', 'C'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

class Writer {
 public:
  template <typename U>
  void pod(const U& v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(U));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    buf_ += s;
  }
  void tensors(const std::vector<NamedTensor>& ts) {
    pod<std::uint64_t>(ts.size());
    for (const auto& t : ts) {
      if (numel(t.shape) != t.data.size()) throw InvalidArgument("tensor '" + t.name + "' shape/data mismatch");
      str(t.name);
      pod<std::uint64_t>(t.shape.size());
      for (auto d : t.shape) pod<std::uint64_t>(d);
      buf_.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
    }
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : buf_(bytes), end_(end) {}
  template <typename U>
  U pod() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<NamedTensor> tensors() {
    const auto count = pod<std::uint64_t>();
    std::vector<NamedTensor> out;
    for (std::uint64_t i = 0; i < count; ++i) {
      NamedTensor t;
      t.name = str();
      const auto rank = pod<std::uint64_t>();
      if (rank > 8) throw IoError("checkpoint tensor '" + t.name + "' has rank " + std::to_string(rank));
      for (std::uint64_t r = 0; r < rank; ++r) t.shape.push_back(pod<std::uint64_t>());
      const std::size_t n = numel(t.shape);
      need(n * sizeof(double));
      t.data.resize(n);
      std::memcpy(t.data.data(), buf_.data() + pos_, n * sizeof(double));
      pos_ += n * sizeof(double);
      out.push_back(std::move(t));
    }
    return out;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw IoError("checkpoint truncated");
  }
  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = sizeof(kMagic) + sizeof(std::uint32_t);
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.bytes().append(kMagic, sizeof(kMagic));
  w.pod(kVersion);
  w.str(ckpt.spec_json);
  w.str(ckpt.extra_json);
  w.pod(ckpt.step);
  w.tensors(ckpt.model);
  w.tensors(ckpt.optimizer);
  const std::uint64_t sum = fnv1a(w.bytes());
  w.pod(sum);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t header = sizeof(kMagic) + sizeof(std::uint32_t);
  if (bytes.size() < header + sizeof(std::uint64_t) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path.string() + " is not a checkpoint");
  }
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (fnv1a(bytes.substr(0, body)) != stored) throw IoError("checkpoint checksum mismatch in " + path.string());
  Reader r(bytes, body);
  Checkpoint c;
  c.spec_json = r.str();
  c.extra_json = r.str();
  c.step = r.pod<std::uint64_t>();
  c.model = r.tensors();
  c.optimizer = r.tensors();
  if (!r.done()) throw IoError("trailing bytes in checkpoint " + path.string());
  return c;
}

template <typename T>
NamedTensor to_named(const Parameter<T>& p) {
  NamedTensor t{p.name, p.value.shape(), {}};
  t.data.assign(p.value.storage().begin(), p.value.storage().end());
  return t;
}

template <typename T>
void assign(Parameter<T>& p, const NamedTensor& t) {
  if (t.shape != p.value.shape()) {
    throw InvalidArgument("tensor '" + p.name + "' has shape " + to_string(t.shape) + ", expected " +
                          to_string(p.value.shape()));
  }
  for (std::size_t i = 0; i < t.data.size(); ++i) p.value[i] = static_cast<T>(t.data[i]);
}

template <typename T>
std::vector<NamedTensor> snapshot(Model<T>& model) {
  nn::ParamRefs<T> refs;
  model.collect(refs);
  model.collect_buffers(refs);
  std::vector<NamedTensor> out;
  for (auto* p : refs) out.push_back(to_named(*p));
  return out;
}

template <typename T>
void restore(Model<T>& model, const Checkpoint& ckpt) {
  // The initialization seed does not change the architecture.
  auto mine = to_json(model.spec());
  mine.erase("seed");
  nlohmann::json theirs;
  try {
    theirs = nlohmann::json::parse(ckpt.spec_json);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("checkpoint spec is not valid JSON: ") + e.what());
  }
  if (theirs.is_object()) theirs.erase("seed");
  if (mine != theirs) throw InvalidArgument("checkpoint was written for a different model spec");
  nn::ParamRefs<T> refs;
  model.collect(refs);
  model.collect_buffers(refs);
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : ckpt.model) by_name[t.name] = &t;
  for (auto* p : refs) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw InvalidArgument("checkpoint lacks tensor '" + p->name + "'");
    assign(*p, *it->second);
  }
}

#define DEFFX_INSTANTIATE(T)                                            \
  template NamedTensor to_named<T>(const Parameter<T>&);                \
  template void assign<T>(Parameter<T>&, const NamedTensor&);           \
  template std::vector<NamedTensor> snapshot<T>(Model<T>&);             \
  template void restore<T>(Model<T>&, const Checkpoint&);

DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_INSTANTIATE)

}  // namespace deffx::model
