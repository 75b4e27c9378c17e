#include "condgen/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace condgen::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'G', 'C', 'K', 'P', 'T', '\0', '\1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw CheckpointError("cannot write '" + path.string() + "'");
  }
  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void put_doubles(const Matrix& m) {
    out_.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw CheckpointError("checkpoint write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw CheckpointError("cannot open '" + path.string() + "'");
  }
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw CheckpointError("truncated checkpoint");
    return v;
  }
  void get_doubles(Matrix& m) {
    in_.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in_) throw CheckpointError("truncated checkpoint");
  }
  void raw(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError("truncated checkpoint");
  }

 private:
  std::ifstream in_;
};

CheckpointHeader read_header(Reader& r) {
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw CheckpointError("not a checkpoint file");
  if (r.get<std::uint32_t>() != kVersion) throw CheckpointError("unsupported checkpoint version");
  CheckpointHeader h;
  const auto n = r.get<std::uint32_t>();
  if (n > 1024) throw CheckpointError("corrupt checkpoint header");
  for (std::uint32_t i = 0; i < n; ++i) h.config.push_back(r.get<std::int64_t>());
  h.dataset_hash = r.get<std::uint64_t>();
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const ParameterSet& params,
                     const std::optional<std::uint64_t>& adam_steps) {
  Writer w(path);
  w.raw(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(header.config.size()));
  for (auto v : header.config) w.put<std::int64_t>(v);
  w.put<std::uint64_t>(header.dataset_hash);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put<std::uint64_t>(p.value.rows());
    w.put<std::uint64_t>(p.value.cols());
  }
  for (const auto& p : params) w.put_doubles(p.value);
  w.put<std::uint8_t>(adam_steps ? 1 : 0);
  if (adam_steps) {
    w.put<std::uint64_t>(*adam_steps);
    for (const auto& p : params) w.put_doubles(p.adam_m);
    for (const auto& p : params) w.put_doubles(p.adam_v);
  }
  w.finish();
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  Reader r(path);
  return read_header(r);
}

std::optional<std::uint64_t> load_checkpoint(const std::filesystem::path& path, ParameterSet& params,
                                             CheckpointHeader* header) {
  Reader r(path);
  CheckpointHeader h = read_header(r);
  const auto n = r.get<std::uint32_t>();
  if (n != params.size()) throw CheckpointError("checkpoint parameter count does not match the model");
  for (const auto& p : params) {
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows != p.value.rows() || cols != p.value.cols())
      throw CheckpointError("checkpoint shape mismatch for parameter '" + p.name + "'");
  }
  for (auto& p : params) r.get_doubles(p.value);
  std::optional<std::uint64_t> steps;
  if (r.get<std::uint8_t>() != 0) {
    steps = r.get<std::uint64_t>();
    for (auto& p : params) r.get_doubles(p.adam_m);
    for (auto& p : params) r.get_doubles(p.adam_v);
  }
  if (header) *header = std::move(h);
  return steps;
}

}  // namespace condgen::nn
