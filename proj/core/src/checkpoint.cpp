#include "wldm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "wldm/common.hpp"

namespace wldm::ckpt {

namespace {

// The on-disk format is little-endian; on a little-endian host plain memcpy
// is the codec.
static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization needs a little-endian host");
static_assert(sizeof(float) == 4, "float must be 32-bit");

template <typename T>
void append(std::vector<char>& b, T v) {
  char c[sizeof(T)];
  std::memcpy(c, &v, sizeof(T));
  b.insert(b.end(), c, c + sizeof(T));
}

template <typename T>
T take(const std::vector<char>& b, size_t& off, const std::string& what) {
  WLDM_CHECK(off + sizeof(T) <= b.size(), "checkpoint truncated while reading " + what);
  T v;
  std::memcpy(&v, b.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

uint64_t fnv1a(const char* data, size_t n) {
  uint64_t h = 1469598103934665603ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

void Checkpoint::add(const std::string& name, std::vector<int64_t> dims,
                     std::vector<float> data) {
  WLDM_CHECK(!name.empty(), "checkpoint entry name must not be empty");
  WLDM_CHECK(!contains(name), "duplicate checkpoint entry '" + name + "'");
  int64_t n = 1;
  for (int64_t d : dims) {
    WLDM_CHECK(d > 0, "non-positive dim in checkpoint entry '" + name + "'");
    n *= d;
  }
  WLDM_CHECK(static_cast<int64_t>(data.size()) == n,
             "payload of '" + name + "' has " + std::to_string(data.size()) +
                 " floats but dims say " + std::to_string(n));
  entries.push_back({name, std::move(dims), std::move(data)});
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return true;
  }
  return false;
}

const Entry& Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  WLDM_CHECK(false, "checkpoint has no entry '" + name + "'");
}

void Checkpoint::add_u64(const std::string& name, uint64_t v) {
  std::vector<float> pieces(4);
  for (int i = 0; i < 4; ++i) {
    pieces[static_cast<size_t>(i)] = static_cast<float>((v >> (16 * i)) & 0xffffULL);
  }
  add(name, {4}, std::move(pieces));
}

uint64_t Checkpoint::get_u64(const std::string& name) const {
  const Entry& e = find(name);
  WLDM_CHECK(e.data.size() == 4, "entry '" + name + "' is not a u64 record");
  uint64_t v = 0;
  for (int i = 0; i < 4; ++i) {
    float p = e.data[static_cast<size_t>(i)];
    WLDM_CHECK(p >= 0.0f && p <= 65535.0f && p == static_cast<float>(static_cast<uint64_t>(p)),
               "entry '" + name + "' holds a non-u64 payload");
    v |= static_cast<uint64_t>(p) << (16 * i);
  }
  return v;
}

void Checkpoint::save(const std::string& path) const {
  std::vector<char> b;
  b.insert(b.end(), {'W', 'L', 'D', 'M'});
  append<uint32_t>(b, version);
  append<uint64_t>(b, static_cast<uint64_t>(entries.size()));
  for (const auto& e : entries) {
    append<uint32_t>(b, static_cast<uint32_t>(e.name.size()));
    b.insert(b.end(), e.name.begin(), e.name.end());
    append<uint32_t>(b, static_cast<uint32_t>(e.dims.size()));
    for (int64_t d : e.dims) append<uint64_t>(b, static_cast<uint64_t>(d));
    size_t bytes = e.data.size() * 4;
    size_t at = b.size();
    b.resize(at + bytes);
    std::memcpy(b.data() + at, e.data.data(), bytes);
  }
  append<uint64_t>(b, fnv1a(b.data(), b.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  WLDM_CHECK(out.good(), "cannot open checkpoint for writing: " + path);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  WLDM_CHECK(out.good(), "failed writing checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  WLDM_CHECK(in.good(), "cannot open checkpoint: " + path);
  std::vector<char> b((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  WLDM_CHECK(b.size() >= 4 + 4 + 8 + 8, "checkpoint too short: " + path);
  WLDM_CHECK(std::memcmp(b.data(), "WLDM", 4) == 0,
             "bad checkpoint magic in " + path);

  uint64_t stored = 0;
  std::memcpy(&stored, b.data() + b.size() - 8, 8);
  uint64_t computed = fnv1a(b.data(), b.size() - 8);
  WLDM_CHECK(stored == computed, "checkpoint checksum mismatch in " + path +
                                     " (file is corrupt or truncated)");

  Checkpoint c;
  size_t off = 4;
  c.version = take<uint32_t>(b, off, "version");
  WLDM_CHECK(c.version == kVersion,
             "unsupported checkpoint version " + std::to_string(c.version));
  uint64_t count = take<uint64_t>(b, off, "entry count");
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = take<uint32_t>(b, off, "entry name length");
    WLDM_CHECK(off + name_len <= b.size() - 8, "checkpoint truncated in entry name");
    std::string name(b.data() + off, name_len);
    off += name_len;
    uint32_t rank = take<uint32_t>(b, off, "entry rank");
    std::vector<int64_t> dims(rank);
    int64_t n = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      dims[d] = static_cast<int64_t>(take<uint64_t>(b, off, "entry dims"));
      WLDM_CHECK(dims[d] > 0, "non-positive dim in entry '" + name + "'");
      n *= dims[d];
    }
    size_t bytes = static_cast<size_t>(n) * 4;
    WLDM_CHECK(off + bytes <= b.size() - 8, "checkpoint truncated in entry payload");
    std::vector<float> data(static_cast<size_t>(n));
    std::memcpy(data.data(), b.data() + off, bytes);
    off += bytes;
    c.add(name, std::move(dims), std::move(data));
  }
  WLDM_CHECK(off == b.size() - 8, "checkpoint has trailing garbage");
  return c;
}

void put_params(Checkpoint& c, const nn::ParamStore& ps) {
  for (const auto& [name, t] : ps.items()) {
    c.add(name, t.shape(), t.data());
  }
}

void get_params(const Checkpoint& c, const nn::ParamStore& ps) {
  for (const auto& [name, t] : ps.items()) {
    const Entry& e = c.find(name);
    WLDM_CHECK(e.dims == t.shape(), "shape mismatch for '" + name + "': checkpoint " +
                                        shape_str(e.dims) + " vs model " +
                                        shape_str(t.shape()));
    Tensor dst = t;
    dst.data() = e.data;
  }
}

void put_optimizer(Checkpoint& c, const std::string& prefix, const optim::Adam& opt) {
  c.add_u64(prefix + ".step", static_cast<uint64_t>(opt.step_count()));
  for (size_t p = 0; p < opt.m().size(); ++p) {
    std::string idx = std::to_string(p);
    c.add(prefix + ".m." + idx, {static_cast<int64_t>(opt.m()[p].size())}, opt.m()[p]);
    c.add(prefix + ".v." + idx, {static_cast<int64_t>(opt.v()[p].size())}, opt.v()[p]);
  }
}

void get_optimizer(const Checkpoint& c, const std::string& prefix, optim::Adam& opt) {
  opt.set_step_count(static_cast<int64_t>(c.get_u64(prefix + ".step")));
  for (size_t p = 0; p < opt.m().size(); ++p) {
    std::string idx = std::to_string(p);
    const Entry& em = c.find(prefix + ".m." + idx);
    const Entry& ev = c.find(prefix + ".v." + idx);
    WLDM_CHECK(em.data.size() == opt.m()[p].size() && ev.data.size() == opt.v()[p].size(),
               "optimizer state size mismatch at parameter " + idx);
    opt.m()[p] = em.data;
    opt.v()[p] = ev.data;
  }
}

void put_rng(Checkpoint& c, const std::string& prefix, const Pcg32& rng) {
  c.add_u64(prefix + ".state", rng.state());
  c.add_u64(prefix + ".inc", rng.inc());
}

void get_rng(const Checkpoint& c, const std::string& prefix, Pcg32& rng) {
  rng.set_state(c.get_u64(prefix + ".state"), c.get_u64(prefix + ".inc"));
}

}  // namespace wldm::ckpt
