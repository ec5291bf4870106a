#include "kft/lm/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "kft/common/error.hpp"
#include "kft/common/hash.hpp"

namespace kft::lm {

using nlohmann::json;

namespace {

constexpr int kVersion = 1;

void append_f32_le(std::string& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float read_f32_le(const char* p) {
  uint32_t bits = static_cast<uint32_t>(static_cast<unsigned char>(p[0])) |
                  (static_cast<uint32_t>(static_cast<unsigned char>(p[1])) << 8) |
                  (static_cast<uint32_t>(static_cast<unsigned char>(p[2])) << 16) |
                  (static_cast<uint32_t>(static_cast<unsigned char>(p[3])) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_checkpoint(const ModelState& model, const std::string& stage_tag,
                     const std::filesystem::path& path) {
  auto& mut = const_cast<ModelState&>(model);
  auto refs = named_params(mut, true);

  std::string payload;
  json manifest = json::array();
  size_t offset = 0;
  for (const auto& ref : refs) {
    json entry;
    entry["name"] = ref.name;
    entry["shape"] = ref.shape;
    entry["offset"] = offset;
    entry["size"] = ref.data->size();
    manifest.push_back(entry);
    for (double v : *ref.data) append_f32_le(payload, static_cast<float>(v));
    offset += ref.data->size();
  }

  json header;
  header["format"] = "kft-checkpoint";
  header["version"] = kVersion;
  header["stage_tag"] = stage_tag;
  header["config"] = {{"vocab_size", model.config.vocab_size},
                      {"d_model", model.config.d_model},
                      {"n_heads", model.config.n_heads},
                      {"n_layers", model.config.n_layers},
                      {"d_ff", model.config.d_ff},
                      {"max_seq", model.config.max_seq},
                      {"seed", model.config.seed}};
  if (model.lora.has_value()) {
    header["lora"] = {{"rank", model.lora->rank}, {"scaling", model.lora->scaling}};
  } else {
    header["lora"] = nullptr;
  }
  header["checksum"] = hex64(fnv1a64(payload.data(), payload.size()));
  header["params"] = std::move(manifest);

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot open checkpoint for writing: " + path.string());
  out << header.dump() << "\n";
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) fail(Errc::Io, "failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open checkpoint: " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line)) {
    fail(Errc::Io, "checkpoint is empty: " + path.string());
  }
  json header = json::parse(header_line, nullptr, false);
  if (header.is_discarded() || !header.is_object() ||
      header.value("format", "") != "kft-checkpoint") {
    fail(Errc::VersionMismatch, "not a recognized checkpoint header");
  }
  if (header.value("version", -1) != kVersion) {
    fail(Errc::VersionMismatch,
         "unsupported checkpoint version " + std::to_string(header.value("version", -1)));
  }

  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

  ModelConfig cfg;
  const auto& jc = header.at("config");
  cfg.vocab_size = jc.at("vocab_size").get<int>();
  cfg.d_model = jc.at("d_model").get<int>();
  cfg.n_heads = jc.at("n_heads").get<int>();
  cfg.n_layers = jc.at("n_layers").get<int>();
  cfg.d_ff = jc.at("d_ff").get<int>();
  cfg.max_seq = jc.at("max_seq").get<int>();
  cfg.seed = jc.at("seed").get<uint64_t>();
  validate_config(cfg);

  Checkpoint ckpt;
  ckpt.stage_tag = header.value("stage_tag", "");
  ckpt.model = init_model(cfg);
  if (!header.at("lora").is_null()) {
    int rank = header.at("lora").at("rank").get<int>();
    double scaling = header.at("lora").at("scaling").get<double>();
    ckpt.model = attach_lora(ckpt.model, rank, scaling);
  }

  auto refs = named_params(ckpt.model, true);
  size_t expected = 0;
  for (const auto& ref : refs) expected += ref.data->size();
  if (payload.size() != expected * 4) {
    fail(Errc::ChecksumMismatch,
         "checkpoint payload is " + std::to_string(payload.size()) +
             " bytes, expected " + std::to_string(expected * 4));
  }
  std::string checksum = hex64(fnv1a64(payload.data(), payload.size()));
  if (checksum != header.value("checksum", "")) {
    fail(Errc::ChecksumMismatch, "checkpoint payload checksum does not match header");
  }

  const auto& manifest = header.at("params");
  if (!manifest.is_array() || manifest.size() != refs.size()) {
    fail(Errc::VersionMismatch, "checkpoint manifest does not match model layout");
  }
  for (size_t i = 0; i < refs.size(); ++i) {
    const auto& entry = manifest[i];
    if (entry.at("name").get<std::string>() != refs[i].name ||
        entry.at("size").get<size_t>() != refs[i].data->size()) {
      fail(Errc::VersionMismatch, "checkpoint manifest entry mismatch at index " +
                                      std::to_string(i));
    }
    size_t offset = entry.at("offset").get<size_t>();
    const char* src = payload.data() + offset * 4;
    for (size_t k = 0; k < refs[i].data->size(); ++k) {
      (*refs[i].data)[k] = static_cast<double>(read_f32_le(src + k * 4));
    }
  }
  return ckpt;
}

}  // namespace kft::lm
