#include "rrk/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rrk/binary_io.hpp"
#include "rrk/trec.hpp"

namespace rrk {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::map<std::string, std::string> config_entries(const ModelConfig& c) {
  return {
      {"model.n_layers", std::to_string(c.n_layers)},
      {"model.d_model", std::to_string(c.d_model)},
      {"model.n_heads", std::to_string(c.n_heads)},
      {"model.d_ff", std::to_string(c.d_ff)},
      {"model.max_seq_len", std::to_string(c.max_seq_len)},
      {"model.vocab_size", std::to_string(c.vocab_size)},
      {"model.l_memory", std::to_string(c.l_memory)},
      {"model.query_budget", std::to_string(c.query_budget)},
      {"model.lora_rank", std::to_string(c.lora_rank)},
      {"model.lora_alpha", format_score(c.lora_alpha)},
      {"model.seed", std::to_string(c.seed)},
  };
}

ModelConfig config_from_entries(const std::map<std::string, std::string>& e) {
  ModelConfig c;
  auto get = [&](const char* key) -> const std::string* {
    auto it = e.find(key);
    return it == e.end() ? nullptr : &it->second;
  };
  auto as_int = [&](const char* key, int& dst) {
    if (auto* v = get(key)) dst = std::stoi(*v);
  };
  as_int("model.n_layers", c.n_layers);
  as_int("model.d_model", c.d_model);
  as_int("model.n_heads", c.n_heads);
  as_int("model.d_ff", c.d_ff);
  as_int("model.max_seq_len", c.max_seq_len);
  as_int("model.vocab_size", c.vocab_size);
  as_int("model.l_memory", c.l_memory);
  as_int("model.query_budget", c.query_budget);
  as_int("model.lora_rank", c.lora_rank);
  if (auto* v = get("model.lora_alpha")) c.lora_alpha = std::stod(*v);
  if (auto* v = get("model.seed")) c.seed = std::stoull(*v);
  return c;
}

namespace {

constexpr std::uint8_t kDtypeF64 = 1;

std::string text_block(const Checkpoint& ckpt) {
  std::string text;
  for (const auto& [k, v] : config_entries(ckpt.config)) text += k + "=" + v + "\n";
  for (const auto& [k, v] : ckpt.metadata) text += "meta." + k + "=" + v + "\n";
  return text;
}

}  // namespace

std::string checkpoint_hash(const Checkpoint& ckpt) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [k, v] : config_entries(ckpt.config)) {
    const std::string line = k + "=" + v + "\n";
    h = fnv1a(line.data(), line.size(), h);
  }
  for (const auto& [name, m] : ckpt.params) {
    h = fnv1a(name.data(), name.size(), h);
    h = fnv1a(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
  }
  return hex64(h);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  binio::write_string(out, text_block(ckpt));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, m] : ckpt.params) {
    binio::write_string(out, name);
    binio::write_le<std::uint8_t>(out, kDtypeF64);
    binio::write_le<std::uint32_t>(out, 2);
    binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) binio::write_le<double>(out, m.data()[i]);
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error(path.string() + ": not an RRKCKPT1 checkpoint");
  }
  Checkpoint ckpt;
  std::map<std::string, std::string> entries;
  std::istringstream text(binio::read_string(in));
  std::string line;
  while (std::getline(text, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key.starts_with("meta.")) {
      ckpt.metadata[key.substr(5)] = value;
    } else {
      entries[key] = value;
    }
  }
  ckpt.config = config_from_entries(entries);
  const auto n = binio::read_le<std::uint32_t>(in);
  for (std::uint32_t t = 0; t < n; ++t) {
    std::string name = binio::read_string(in, 4096);
    const auto dtype = binio::read_le<std::uint8_t>(in);
    const auto ndim = binio::read_le<std::uint32_t>(in);
    if (dtype != kDtypeF64 || ndim != 2) {
      throw std::runtime_error(path.string() + ": unsupported tensor encoding for " + name);
    }
    const auto rows = binio::read_le<std::uint64_t>(in);
    const auto cols = binio::read_le<std::uint64_t>(in);
    if (rows * cols > (1ull << 32)) throw std::runtime_error("tensor " + name + " too large");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = binio::read_le<double>(in);
    ckpt.params.emplace(std::move(name), std::move(m));
  }
  return ckpt;
}

}  // namespace rrk
