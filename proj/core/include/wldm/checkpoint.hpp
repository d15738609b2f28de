#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wldm/nn.hpp"
#include "wldm/optim.hpp"
#include "wldm/rng.hpp"

namespace wldm::ckpt {

/// One named tensor in a checkpoint.
struct Entry {
  std::string name;            ///< utf-8, unique within the file
  std::vector<int64_t> dims;   ///< rank = dims.size(); scalars use rank 0
  std::vector<float> data;     ///< row-major, length = product(dims)
};

/// Binary container: magic "WLDM", a format version, named f32 entries, and a
/// trailing integrity checksum (FNV-1a 64-bit over every preceding byte). All
/// integers and floats are little-endian on disk.
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  uint32_t version = kVersion;
  std::vector<Entry> entries;  ///< file order = insertion order

  void add(const std::string& name, std::vector<int64_t> dims, std::vector<float> data);
  bool contains(const std::string& name) const;
  const Entry& find(const std::string& name) const;

  /// Unsigned 64-bit scalars (step counters, RNG words) ride as rank-1
  /// entries of four floats, each holding one 16-bit piece, low first —
  /// exactly representable, so the round trip is lossless.
  void add_u64(const std::string& name, uint64_t v);
  uint64_t get_u64(const std::string& name) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

/// Copies every parameter of the store into the checkpoint under its
/// registered name.
void put_params(Checkpoint& c, const nn::ParamStore& ps);

/// Loads every parameter of the store from same-named entries, checking
/// shapes. Missing entries or shape mismatches are errors.
void get_params(const Checkpoint& c, const nn::ParamStore& ps);

/// Optimizer state: first/second moments per parameter (named "<prefix>.m.N"
/// / "<prefix>.v.N" by parameter index) plus the step counter.
void put_optimizer(Checkpoint& c, const std::string& prefix, const optim::Adam& opt);
void get_optimizer(const Checkpoint& c, const std::string& prefix, optim::Adam& opt);

/// RNG state as two u64 words under "<prefix>.state" / "<prefix>.inc".
void put_rng(Checkpoint& c, const std::string& prefix, const Pcg32& rng);
void get_rng(const Checkpoint& c, const std::string& prefix, Pcg32& rng);

}  // namespace wldm::ckpt
