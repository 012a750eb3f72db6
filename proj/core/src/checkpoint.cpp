#include "craft/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "craft/errors.hpp"

namespace craft {

namespace {

constexpr char kMagic[4] = {'C', 'R', 'F', 'T'};

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ofstream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError("checkpoint truncated");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw FormatError("checkpoint truncated");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::ifstream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

EpsMlp Checkpoint::to_model() const {
  EpsMlp m(arch);
  m.set_params(params);
  return m;
}

Checkpoint Checkpoint::from_model(const EpsMlp& m, std::uint64_t config_hash,
                                  std::int64_t step,
                                  std::optional<OptimizerState> opt) {
  Checkpoint c;
  c.arch = m.arch();
  c.params.assign(m.params().begin(), m.params().end());
  c.config_hash = config_hash;
  c.step = step;
  c.opt = std::move(opt);
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  if (c.params.size() != c.arch.param_count()) {
    throw ContractError("write_checkpoint: parameter count mismatch");
  }
  if (c.opt && (c.opt->m.size() != c.params.size() ||
                c.opt->v.size() != c.params.size())) {
    throw ContractError("write_checkpoint: optimizer state shape mismatch");
  }
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(c.arch.data_dim));
  put_u32(out, static_cast<std::uint32_t>(c.arch.time_dim));
  put_u32(out, static_cast<std::uint32_t>(c.arch.cond_dim));
  put_u32(out, static_cast<std::uint32_t>(c.arch.hidden1));
  put_u32(out, static_cast<std::uint32_t>(c.arch.hidden2));
  put_u64(out, c.config_hash);
  put_u64(out, static_cast<std::uint64_t>(c.step));
  put_u32(out, c.opt ? 1u : 0u);
  put_u64(out, c.params.size());
  for (double v : c.params) put_f64(out, v);
  if (c.opt) {
    put_u64(out, static_cast<std::uint64_t>(c.opt->step));
    for (double v : c.opt->m) put_f64(out, v);
    for (double v : c.opt->v) put_f64(out, v);
  }
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint not found: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("checkpoint " + path.string() + ": bad magic");
  }
  const std::uint32_t version = get_u32(in);
  if (version > kCheckpointVersion) {
    throw FormatError("checkpoint " + path.string() + ": format version " +
                      std::to_string(version) +
                      " is newer than supported version " +
                      std::to_string(kCheckpointVersion));
  }
  Checkpoint c;
  c.arch.data_dim = static_cast<int>(get_u32(in));
  c.arch.time_dim = static_cast<int>(get_u32(in));
  c.arch.cond_dim = static_cast<int>(get_u32(in));
  c.arch.hidden1 = static_cast<int>(get_u32(in));
  c.arch.hidden2 = static_cast<int>(get_u32(in));
  c.config_hash = get_u64(in);
  c.step = static_cast<std::int64_t>(get_u64(in));
  const std::uint32_t flags = get_u32(in);
  const std::uint64_t count = get_u64(in);
  if (count != c.arch.param_count()) {
    throw FormatError("checkpoint " + path.string() +
                      ": parameter count does not match architecture");
  }
  c.params.resize(count);
  for (double& v : c.params) v = get_f64(in);
  if (flags & 1u) {
    OptimizerState st;
    st.step = static_cast<std::int64_t>(get_u64(in));
    st.m.resize(count);
    st.v.resize(count);
    for (double& v : st.m) v = get_f64(in);
    for (double& v : st.v) v = get_f64(in);
    c.opt = std::move(st);
  }
  return c;
}

}  // namespace craft
