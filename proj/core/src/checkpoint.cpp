#include "dualnlu/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "dualnlu/types.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian only");

namespace dualnlu::ckpt {

namespace {

constexpr char kMagic[4] = {'D', 'N', 'L', 'U'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& in, const std::string& path) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw DataError("truncated checkpoint: " + path);
  return v;
}

nlohmann::json meta_to_json(const Metadata& m) {
  return {{"component", m.component}, {"mode", m.mode},
          {"hidden", m.hidden},       {"emb_dim", m.emb_dim},
          {"vocab_hash", m.vocab_hash}, {"epoch", m.epoch},
          {"intent_acc", m.intent_acc}, {"slot_f1", m.slot_f1},
          {"avg", m.avg}};
}

Metadata meta_from_json(const nlohmann::json& j) {
  Metadata m;
  m.component = j.at("component").get<std::string>();
  m.mode = j.at("mode").get<std::string>();
  m.hidden = j.at("hidden").get<int>();
  m.emb_dim = j.at("emb_dim").get<int>();
  m.vocab_hash = j.at("vocab_hash").get<uint64_t>();
  m.epoch = j.at("epoch").get<int>();
  m.intent_acc = j.at("intent_acc").get<double>();
  m.slot_f1 = j.at("slot_f1").get<double>();
  m.avg = j.at("avg").get<double>();
  return m;
}

Metadata read_header(std::istream& in, const std::string& path) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4))
    throw DataError("not a checkpoint file: " + path);
  uint32_t version = read_u32(in, path);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  uint32_t meta_len = read_u32(in, path);
  std::string meta_str(meta_len, '\0');
  if (!in.read(meta_str.data(), meta_len)) throw DataError("truncated checkpoint: " + path);
  try {
    return meta_from_json(nlohmann::json::parse(meta_str));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint metadata in " + path + ": " + e.what());
  }
}

}  // namespace

void save(const std::string& path, const ad::ParamStore& params, const Metadata& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);

  out.write(kMagic, 4);
  write_u32(out, kVersion);
  std::string meta_str = meta_to_json(meta).dump();
  write_u32(out, static_cast<uint32_t>(meta_str.size()));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  auto tensors = params.all();
  write_u32(out, static_cast<uint32_t>(tensors.size()));
  std::vector<float> buf;
  for (const auto* t : tensors) {
    write_u32(out, static_cast<uint32_t>(t->name.size()));
    out.write(t->name.data(), static_cast<std::streamsize>(t->name.size()));
    write_u32(out, static_cast<uint32_t>(t->value.rows()));
    write_u32(out, static_cast<uint32_t>(t->value.cols()));
    buf.resize(static_cast<size_t>(t->value.size()));
    size_t k = 0;
    for (int i = 0; i < t->value.rows(); ++i)
      for (int j = 0; j < t->value.cols(); ++j) buf[k++] = static_cast<float>(t->value(i, j));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw DataError("write failed: " + path);
}

Metadata peek(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return read_header(in, path);
}

Metadata load(const std::string& path, ad::ParamStore& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  Metadata meta = read_header(in, path);

  uint32_t n = read_u32(in, path);
  size_t filled = 0;
  std::vector<float> buf;
  for (uint32_t k = 0; k < n; ++k) {
    uint32_t name_len = read_u32(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("truncated checkpoint: " + path);
    uint32_t rows = read_u32(in, path);
    uint32_t cols = read_u32(in, path);
    buf.resize(static_cast<size_t>(rows) * cols);
    if (!in.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float))))
      throw DataError("truncated checkpoint: " + path);

    if (!params.has(name)) throw DataError("unexpected tensor '" + name + "' in " + path);
    ad::Tensor& t = params.at(name);
    if (t.value.rows() != static_cast<int>(rows) || t.value.cols() != static_cast<int>(cols))
      throw DataError("shape mismatch for tensor '" + name + "' in " + path);
    size_t i = 0;
    for (uint32_t r = 0; r < rows; ++r)
      for (uint32_t c = 0; c < cols; ++c) t.value(r, c) = static_cast<double>(buf[i++]);
    ++filled;
  }
  if (filled != params.size())
    throw DataError("checkpoint " + path + " fills " + std::to_string(filled) + " of " +
                    std::to_string(params.size()) + " tensors");
  return meta;
}

}  // namespace dualnlu::ckpt
