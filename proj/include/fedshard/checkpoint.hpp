#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fedshard/data.hpp"  // little-endian static_assert
#include "fedshard/net.hpp"
#include "fedshard/params.hpp"

namespace fedshard {

// Checkpoint file layout (little-endian):
//   bytes 0..4   magic "FSHD1"
//   u32          length of the network spec JSON
//   ...          canonical network spec JSON (UTF-8)
//   u32          entry count
//   per entry:   u32 layer index, u8 role (0=weight 1=bias), u8 ndim,
//                u32 dims[ndim], f32 data[product(dims)]

inline constexpr char kCheckpointMagic[5] = {'F', 'S', 'H', 'D', '1'};

struct Checkpoint {
  NetworkSpec spec;
  ParamSet<float> params;
};

namespace detail {

struct ByteWriter {
  std::vector<char> bytes;

  void raw(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    bytes.insert(bytes.end(), c, c + n);
  }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u8(std::uint8_t v) { raw(&v, 1); }
};

struct ByteReader {
  const std::vector<char>& bytes;
  std::size_t at = 0;
  std::string name;

  void need(std::size_t n, const char* what) {
    if (at + n > bytes.size()) {
      throw ConfigError(name + ": truncated " + what + " at byte offset " + std::to_string(at));
    }
  }
  void raw(void* p, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, bytes.data() + at, n);
    at += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    raw(&v, 4, what);
    return v;
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t v;
    raw(&v, 1, what);
    return v;
  }
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                            const ParamSet<float>& params) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 5);
  const std::string spec_json = to_json(spec).dump();
  require(spec_json.size() <= UINT32_MAX, "save_checkpoint: spec json too large");
  w.u32(static_cast<std::uint32_t>(spec_json.size()));
  w.raw(spec_json.data(), spec_json.size());
  w.u32(static_cast<std::uint32_t>(params.entries.size()));
  for (const auto& e : params.entries) {
    require(e.layer_index >= 0, "save_checkpoint: negative layer index");
    w.u32(static_cast<std::uint32_t>(e.layer_index));
    w.u8(e.role == ParamRole::weight ? 0 : 1);
    w.u8(static_cast<std::uint8_t>(e.tensor.shape.size()));
    for (int d : e.tensor.shape) {
      require(d >= 0, "save_checkpoint: negative dim");
      w.u32(static_cast<std::uint32_t>(d));
    }
    w.raw(e.tensor.data.data(), e.tensor.data.size() * sizeof(float));
  }

  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path);
  out.write(w.bytes.data(), static_cast<std::streamsize>(w.bytes.size()));
  require(static_cast<bool>(out), "write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  detail::ByteReader r{bytes, 0, path};

  char magic[5];
  r.raw(magic, 5, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 5) != 0) {
    throw ConfigError(path + ": bad magic at byte offset 0 (not a checkpoint file)");
  }

  const std::uint32_t spec_len = r.u32("spec length");
  r.need(spec_len, "spec json");
  std::string spec_json(bytes.data() + r.at, spec_len);
  r.at += spec_len;

  Checkpoint ck;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(spec_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": bad spec json at byte offset 9: " + e.what());
  }
  ck.spec = network_spec_from_json(j);

  const std::uint32_t entries = r.u32("entry count");
  for (std::uint32_t i = 0; i < entries; ++i) {
    ParamEntry<float> e;
    e.layer_index = static_cast<int>(r.u32("entry layer index"));
    const std::uint8_t role = r.u8("entry role");
    if (role > 1) {
      throw ConfigError(path + ": invalid role " + std::to_string(role) + " at byte offset " +
                        std::to_string(r.at - 1));
    }
    e.role = role == 0 ? ParamRole::weight : ParamRole::bias;
    const std::uint8_t ndim = r.u8("entry ndim");
    std::vector<int> shape(ndim);
    std::int64_t count = 1;
    for (int d = 0; d < ndim; ++d) {
      shape[d] = static_cast<int>(r.u32("entry dim"));
      count *= shape[d];
    }
    e.tensor = Tensor<float>(shape);
    r.raw(e.tensor.data.data(), static_cast<std::size_t>(count) * sizeof(float),
          "entry data");
    ck.params.entries.push_back(std::move(e));
  }
  if (r.at != bytes.size()) {
    throw ConfigError(path + ": trailing bytes at byte offset " + std::to_string(r.at));
  }

  check_congruent(ck.spec, ck.params);
  return ck;
}

}  // namespace fedshard
