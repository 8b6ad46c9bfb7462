#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ctxempath/assembly.hpp"
#include "ctxempath/checkpoint.hpp"
#include "ctxempath/corpus.hpp"
#include "ctxempath/tokenizer.hpp"
#include "ctxempath/trainer.hpp"

using namespace ctxempath;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

struct CkptParts {
  std::string mtext;
  std::string blob;
};

CkptParts split_file(const std::string& bytes) {
  REQUIRE(bytes.size() >= sizeof(uint64_t));
  uint64_t mlen = 0;
  std::memcpy(&mlen, bytes.data(), sizeof(mlen));
  CkptParts p;
  p.mtext = bytes.substr(sizeof(uint64_t), mlen);
  p.blob = bytes.substr(sizeof(uint64_t) + mlen);
  return p;
}

std::string join_file(const std::string& mtext, const std::string& blob) {
  uint64_t mlen = mtext.size();
  std::string out(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out += mtext;
  out += blob;
  return out;
}

std::string load_error(const std::string& path, const Vocabulary& vocab) {
  try {
    (void)load_checkpoint(path, vocab);
  } catch (const CorpusError& e) {
    return e.what();
  }
  return "";
}

struct Fixture {
  std::vector<Conversation> corpus;
  Vocabulary vocab;
  TrainedModel tm;
  std::string path;

  Fixture() {
    corpus = generate_synthetic(6, 3, 21);
    vocab = build_vocab(corpus, 512, 1);
    EncoderConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 24;
    cfg.max_len = 48;
    cfg.dropout = 0.05;
    cfg.init_seed = 31;
    tm.model = init_encoder<float>(cfg);
    tm.assembly.context_turns = 2;
    tm.assembly.max_len = 48;
    tm.assembly.speaker_prefix = false;
    tm.trait = Trait::Empathy;
    tm.profile = Profile::PaperFaithful;
    tm.best_epoch = 7;
    tm.val_mse = 0.1875;
    tm.vocab_sha256 = sha256_hex(vocab.serialize());
    path = "ckpt_test.bin";
    save_checkpoint(tm, path);
  }
};

}  // namespace

TEST_CASE("sha256 matches the published test vectors") {
  CHECK(sha256_hex(std::string()) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const std::string two_blocks =
      "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq";
  CHECK(sha256_hex(two_blocks) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("a checkpoint survives a save/load round trip bit for bit") {
  Fixture f;
  auto loaded = load_checkpoint(f.path, f.vocab);

  CHECK(loaded.trait == Trait::Empathy);
  CHECK(loaded.profile == Profile::PaperFaithful);
  CHECK(loaded.best_epoch == 7);
  CHECK(loaded.val_mse == 0.1875);
  CHECK(loaded.vocab_sha256 == f.tm.vocab_sha256);
  CHECK(loaded.assembly.context_turns == 2);
  CHECK(loaded.assembly.max_len == 48);
  CHECK(loaded.assembly.speaker_prefix == false);

  const auto& c0 = f.tm.model.cfg;
  const auto& c1 = loaded.model.cfg;
  CHECK(c1.vocab_size == c0.vocab_size);
  CHECK(c1.d_model == c0.d_model);
  CHECK(c1.n_layers == c0.n_layers);
  CHECK(c1.n_heads == c0.n_heads);
  CHECK(c1.d_ff == c0.d_ff);
  CHECK(c1.max_len == c0.max_len);
  CHECK(c1.dropout == c0.dropout);
  CHECK(c1.init_seed == c0.init_seed);
  CHECK(c1.pool_cls_slot == c0.pool_cls_slot);

  auto p0 = f.tm.model.named_params();
  auto p1 = loaded.model.named_params();
  REQUIRE(p0.size() == p1.size());
  for (size_t i = 0; i < p0.size(); ++i) {
    CHECK(p0[i].name == p1[i].name);
    REQUIRE(p0[i].tensor->values.size() == p1[i].tensor->values.size());
    CHECK(std::memcmp(p0[i].tensor->values.data(), p1[i].tensor->values.data(),
                      p0[i].tensor->values.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("a loaded model predicts exactly what the saved model predicted") {
  Fixture f;
  auto loaded = load_checkpoint(f.path, f.vocab);
  auto examples =
      build_trait_examples(f.corpus, Trait::Empathy, f.tm.assembly, f.vocab);
  REQUIRE(!examples.empty());
  auto a = predict_examples(f.tm.model, examples, 4);
  auto b = predict_examples(loaded.model, examples, 4);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("saving the same model twice produces identical bytes") {
  Fixture f;
  save_checkpoint(f.tm, "ckpt_test_2.bin");
  CHECK(slurp(f.path) == slurp("ckpt_test_2.bin"));
}

TEST_CASE("a flipped blob byte is rejected by the digest") {
  Fixture f;
  std::string bytes = slurp(f.path);
  bytes.back() = static_cast<char>(bytes.back() ^ 0x40);
  spit("ckpt_corrupt.bin", bytes);
  auto msg = load_error("ckpt_corrupt.bin", f.vocab);
  CHECK(msg.find("parameter blob digest mismatch") != std::string::npos);
}

TEST_CASE("a checkpoint refuses to load against a different vocabulary") {
  Fixture f;
  auto other_corpus = generate_synthetic(6, 3, 22);
  auto other_vocab = build_vocab(other_corpus, 256, 1);
  auto msg = load_error(f.path, other_vocab);
  CHECK(msg.find("vocabulary digest mismatch") != std::string::npos);
}

TEST_CASE("truncated files are reported at the failing layer") {
  Fixture f;
  std::string bytes = slurp(f.path);

  spit("ckpt_trunc_a.bin", bytes.substr(0, 4));
  CHECK(load_error("ckpt_trunc_a.bin", f.vocab).find("no length prefix") != std::string::npos);

  spit("ckpt_trunc_b.bin", bytes.substr(0, 20));
  CHECK(load_error("ckpt_trunc_b.bin", f.vocab).find("exceeds file") != std::string::npos);

  spit("ckpt_trunc_c.bin", bytes.substr(0, bytes.size() - 64));
  CHECK(load_error("ckpt_trunc_c.bin", f.vocab).find("digest mismatch") != std::string::npos);
}

TEST_CASE("extra bytes after the blob are rejected") {
  Fixture f;
  std::string bytes = slurp(f.path);
  // Keep the recorded digest valid by re-signing the padded blob.
  auto parts = split_file(bytes);
  std::string blob = parts.blob + std::string(8, '\0');
  auto manifest = nlohmann::ordered_json::parse(parts.mtext);
  manifest["params_sha256"] = sha256_hex(blob);
  spit("ckpt_trailing.bin", join_file(manifest.dump(), blob));
  CHECK(load_error("ckpt_trailing.bin", f.vocab).find("trailing bytes") != std::string::npos);
}

TEST_CASE("an unknown format tag is rejected") {
  Fixture f;
  auto parts = split_file(slurp(f.path));
  auto manifest = nlohmann::ordered_json::parse(parts.mtext);
  manifest["format"] = "somebody.elses.format";
  spit("ckpt_badtag.bin", join_file(manifest.dump(), parts.blob));
  CHECK(load_error("ckpt_badtag.bin", f.vocab).find("unknown format tag") != std::string::npos);
}

TEST_CASE("a garbled manifest is rejected as invalid JSON") {
  Fixture f;
  auto parts = split_file(slurp(f.path));
  spit("ckpt_garbage.bin", join_file("ha! not json {", parts.blob));
  CHECK(load_error("ckpt_garbage.bin", f.vocab).find("not valid JSON") != std::string::npos);
}

TEST_CASE("manifest surgery on the parameter table is caught") {
  Fixture f;
  auto parts = split_file(slurp(f.path));

  auto renamed = nlohmann::ordered_json::parse(parts.mtext);
  renamed["params"][0]["name"] = "not_a_real_param";
  spit("ckpt_rename.bin", join_file(renamed.dump(), parts.blob));
  CHECK(load_error("ckpt_rename.bin", f.vocab).find("expected") != std::string::npos);

  auto reshaped = nlohmann::ordered_json::parse(parts.mtext);
  reshaped["params"][1]["shape"] = std::vector<int>{1, 1};
  spit("ckpt_reshape.bin", join_file(reshaped.dump(), parts.blob));
  CHECK(load_error("ckpt_reshape.bin", f.vocab).find("shape mismatch") != std::string::npos);

  auto shifted = nlohmann::ordered_json::parse(parts.mtext);
  shifted["params"][2]["offset"] = 3;
  spit("ckpt_shift.bin", join_file(shifted.dump(), parts.blob));
  CHECK(load_error("ckpt_shift.bin", f.vocab).find("offset mismatch") != std::string::npos);
}

TEST_CASE("a missing checkpoint file names its path") {
  Fixture f;
  auto msg = load_error("no_such_checkpoint.bin", f.vocab);
  CHECK(msg.find("cannot open") != std::string::npos);
  CHECK(msg.find("no_such_checkpoint.bin") != std::string::npos);
}

TEST_CASE("a checkpoint from a real training run round trips") {
  auto corpus = generate_synthetic(16, 4, 9);
  auto split = split_corpus(corpus, 0.75, 3);
  auto vocab = build_vocab(split.train, 1024, 1);
  EncoderConfig enc;
  enc.vocab_size = vocab.size();
  enc.d_model = 16;
  enc.n_layers = 1;
  enc.n_heads = 2;
  enc.d_ff = 32;
  enc.max_len = 64;
  enc.init_seed = 5;
  TrainConfig cfg;
  cfg.assembly.context_turns = 1;
  cfg.assembly.max_len = 64;
  cfg.max_epochs = 2;
  cfg.patience = 1;
  cfg.batch_size = 4;
  auto result = train_model(split, vocab, enc, cfg);

  save_checkpoint(result.best, "ckpt_trained.bin");
  auto loaded = load_checkpoint("ckpt_trained.bin", vocab);
  CHECK(loaded.best_epoch == result.best.best_epoch);
  CHECK(loaded.val_mse == result.best.val_mse);

  auto val_ex = build_trait_examples(split.validation, cfg.trait, cfg.assembly, vocab);
  auto r0 = evaluate_model(result.best.model, val_ex, 4);
  auto r1 = evaluate_model(loaded.model, val_ex, 4);
  CHECK(r0.mse == r1.mse);
  CHECK(r0.pearson_r == r1.pearson_r);
}
