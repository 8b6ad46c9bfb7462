#include "ctxempath/checkpoint.hpp"

#include <openssl/evp.h>

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace ctxempath {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts are unsupported");

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kFormatTag = "ctxempath.ckpt.v1";

[[noreturn]] void fail(const std::string& msg) { throw CorpusError(msg); }

const ordered_json& j_at(const ordered_json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) fail(where + ": missing key \"" + key + "\"");
  return *it;
}

ordered_json encoder_to_json(const EncoderConfig& c) {
  ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["d_model"] = c.d_model;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["d_ff"] = c.d_ff;
  j["max_len"] = c.max_len;
  j["dropout"] = c.dropout;
  j["init_seed"] = c.init_seed;
  j["pool_cls_slot"] = c.pool_cls_slot;
  return j;
}

EncoderConfig encoder_from_json(const ordered_json& j, const std::string& where) {
  EncoderConfig c;
  c.vocab_size = j_at(j, "vocab_size", where).get<int>();
  c.d_model = j_at(j, "d_model", where).get<int>();
  c.n_layers = j_at(j, "n_layers", where).get<int>();
  c.n_heads = j_at(j, "n_heads", where).get<int>();
  c.d_ff = j_at(j, "d_ff", where).get<int>();
  c.max_len = j_at(j, "max_len", where).get<int>();
  c.dropout = j_at(j, "dropout", where).get<double>();
  c.init_seed = j_at(j, "init_seed", where).get<uint64_t>();
  c.pool_cls_slot = j_at(j, "pool_cls_slot", where).get<bool>();
  return c;
}

}  // namespace

std::string sha256_hex(const void* data, size_t n) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, n, md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out(static_cast<size_t>(len) * 2, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = hex[md[i] >> 4];
    out[2 * i + 1] = hex[md[i] & 0xF];
  }
  return out;
}

std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

void save_checkpoint(const TrainedModel& tm, const std::string& path) {
  auto params = tm.model.named_params();

  std::string blob;
  ordered_json ptable = ordered_json::array();
  for (const auto& p : params) {
    ordered_json e;
    e["name"] = p.name;
    e["shape"] = p.tensor->shape;
    e["offset"] = blob.size();
    ptable.push_back(std::move(e));
    const size_t bytes = p.tensor->values.size() * sizeof(float);
    const size_t at = blob.size();
    blob.resize(at + bytes);
    std::memcpy(blob.data() + at, p.tensor->values.data(), bytes);
  }

  ordered_json manifest;
  manifest["format"] = kFormatTag;
  manifest["trait"] = trait_name(tm.trait);
  manifest["profile"] = profile_name(tm.profile);
  manifest["encoder"] = encoder_to_json(tm.model.cfg);
  {
    ordered_json a;
    a["context_turns"] = tm.assembly.context_turns;
    a["max_len"] = tm.assembly.max_len;
    a["speaker_prefix"] = tm.assembly.speaker_prefix;
    manifest["assembly"] = std::move(a);
  }
  manifest["best_epoch"] = tm.best_epoch;
  manifest["val_mse"] = tm.val_mse;
  manifest["vocab_sha256"] = tm.vocab_sha256;
  manifest["params_sha256"] = sha256_hex(blob);
  manifest["params"] = std::move(ptable);

  const std::string mtext = manifest.dump();
  const uint64_t mlen = mtext.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write checkpoint file: " + path);
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) fail("failed while writing checkpoint file: " + path);
}

TrainedModel load_checkpoint(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open checkpoint file: " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path + ": checkpoint manifest";

  if (data.size() < sizeof(uint64_t)) fail(path + ": truncated checkpoint (no length prefix)");
  uint64_t mlen = 0;
  std::memcpy(&mlen, data.data(), sizeof(mlen));
  if (sizeof(uint64_t) + mlen > data.size()) {
    fail(path + ": truncated checkpoint (manifest length " + std::to_string(mlen) +
         " exceeds file)");
  }

  ordered_json manifest;
  try {
    manifest = ordered_json::parse(data.substr(sizeof(uint64_t), mlen));
  } catch (const ordered_json::parse_error& e) {
    fail(where + " is not valid JSON: " + e.what());
  }
  if (j_at(manifest, "format", where).get<std::string>() != kFormatTag) {
    fail(where + ": unknown format tag");
  }

  TrainedModel tm;
  {
    auto t = trait_from_name(j_at(manifest, "trait", where).get<std::string>());
    if (!t) fail(where + ": unknown trait");
    tm.trait = *t;
    auto p = profile_from_name(j_at(manifest, "profile", where).get<std::string>());
    if (!p) fail(where + ": unknown profile");
    tm.profile = *p;
  }
  EncoderConfig enc = encoder_from_json(j_at(manifest, "encoder", where), where);
  {
    const auto& a = j_at(manifest, "assembly", where);
    tm.assembly.context_turns = j_at(a, "context_turns", where).get<int>();
    tm.assembly.max_len = j_at(a, "max_len", where).get<int>();
    tm.assembly.speaker_prefix = j_at(a, "speaker_prefix", where).get<bool>();
  }
  tm.best_epoch = j_at(manifest, "best_epoch", where).get<int>();
  tm.val_mse = j_at(manifest, "val_mse", where).get<double>();
  tm.vocab_sha256 = j_at(manifest, "vocab_sha256", where).get<std::string>();

  const std::string vocab_digest = sha256_hex(vocab.serialize());
  if (vocab_digest != tm.vocab_sha256) {
    fail(path + ": vocabulary digest mismatch (checkpoint was built with a different vocabulary)");
  }

  const char* blob = data.data() + sizeof(uint64_t) + mlen;
  const size_t blob_size = data.size() - sizeof(uint64_t) - mlen;
  if (sha256_hex(blob, blob_size) != j_at(manifest, "params_sha256", where).get<std::string>()) {
    fail(path + ": parameter blob digest mismatch (corrupt checkpoint)");
  }

  tm.model = init_encoder<float>(enc);
  auto params = tm.model.named_params();
  const auto& ptable = j_at(manifest, "params", where);
  if (!ptable.is_array() || ptable.size() != params.size()) {
    fail(where + ": parameter table does not match the model layout");
  }
  size_t expected_offset = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& e = ptable[i];
    if (j_at(e, "name", where).get<std::string>() != params[i].name) {
      fail(where + ": parameter " + std::to_string(i) + " is \"" +
           e["name"].get<std::string>() + "\", expected \"" + params[i].name + "\"");
    }
    if (j_at(e, "shape", where).get<std::vector<int>>() != params[i].tensor->shape) {
      fail(where + ": shape mismatch for \"" + params[i].name + "\"");
    }
    const size_t offset = j_at(e, "offset", where).get<size_t>();
    if (offset != expected_offset) {
      fail(where + ": offset mismatch for \"" + params[i].name + "\"");
    }
    const size_t bytes = params[i].tensor->values.size() * sizeof(float);
    if (offset + bytes > blob_size) fail(path + ": parameter blob is too small");
    std::memcpy(params[i].tensor->values.data(), blob + offset, bytes);
    expected_offset = offset + bytes;
  }
  if (expected_offset != blob_size) fail(path + ": parameter blob has trailing bytes");
  return tm;
}

}  // namespace ctxempath
