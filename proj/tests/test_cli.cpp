#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "support.hpp"

using styletts::testing::TempDir;

namespace {

struct Run {
  int code = 0;
  std::string output;
};

Run styletts_cli(const std::string& args) {
  const std::string cmd = std::string(STYLETTS_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.output += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("bad arguments exit nonzero") {
    CHECK(styletts_cli("--no-such-flag").code != 0);
    CHECK(styletts_cli("").code != 0);
    CHECK(styletts_cli("gen-synthetic --n 2").code != 0);  // no --out
    const auto help = styletts_cli("--help");
    CHECK(help.code == 0);
    CHECK(help.output.find("label-corpus") != std::string::npos);
  }

  TEST_CASE("generate, train, label and synthesize") {
    TempDir dir("cli");
    const auto corpus_dir = (dir / "corpus").string();
    auto gen = styletts_cli("gen-synthetic --n 2 --seed 3 --train-fraction 0.5 --dev-fraction 0.5 --out " + corpus_dir);
    REQUIRE_MESSAGE(gen.code == 0, gen.output);
    const auto manifest = dir / "corpus" / "manifest.jsonl";
    REQUIRE(std::filesystem::exists(manifest));
    CHECK(count_lines(manifest) == 12);
    CHECK(std::filesystem::exists(dir / "corpus" / "run_gen-synthetic.json"));

    // Same seed, same bytes.
    styletts_cli("gen-synthetic --n 2 --seed 3 --train-fraction 0.5 --dev-fraction 0.5 --out " + (dir / "again").string());
    CHECK(slurp(manifest) == slurp(dir / "again" / "manifest.jsonl"));

    const auto clf = (dir / "clf").string();
    auto train = styletts_cli("train-classifier --epochs 2 --audio-hidden 8 --text-hidden 8 --manifest " +
                              manifest.string() + " --out " + clf);
    REQUIRE_MESSAGE(train.code == 0, train.output);
    CHECK(std::filesystem::exists(dir / "clf" / "classifier.ckpt"));
    CHECK(std::filesystem::exists(dir / "clf" / "history.csv"));

    const auto labels = (dir / "labels.jsonl").string();
    auto lab = styletts_cli("label-corpus --model " + clf + "/classifier.ckpt --manifest " + manifest.string() +
                            " --out " + labels);
    REQUIRE_MESSAGE(lab.code == 0, lab.output);
    CHECK(count_lines(labels) == 12);

    auto tts = styletts_cli("train-tts --epochs 2 --prosody-hidden 8 --acoustic-hidden 8 --manifest " +
                            manifest.string() + " --embeddings " + labels + " --out " + (dir / "models").string());
    REQUIRE_MESSAGE(tts.code == 0, tts.output);

    const auto wav = (dir / "out.wav").string();
    auto syn = styletts_cli("synthesize --models " + (dir / "models").string() +
                            " --text \"a cat sat\" --style happy --out " + wav);
    REQUIRE_MESSAGE(syn.code == 0, syn.output);
    const auto bytes = slurp(wav);
    CHECK(bytes.rfind("RIFF", 0) == 0);
    styletts_cli("synthesize --models " + (dir / "models").string() + " --text \"a cat sat\" --style happy --out " +
                 (dir / "out2.wav").string());
    CHECK(bytes == slurp(dir / "out2.wav"));

    auto voc = styletts_cli("train-vocoder --epochs 1 --hidden 8 --manifest " + manifest.string() + " --out " +
                            (dir / "models").string());
    REQUIRE_MESSAGE(voc.code == 0, voc.output);
    auto neural = styletts_cli("synthesize --vocoder neural --models " + (dir / "models").string() +
                               " --text \"a cat\" --style sad --out " + (dir / "neural.wav").string());
    CHECK_MESSAGE(neural.code == 0, neural.output);
    CHECK(slurp(dir / "neural.wav").rfind("RIFF", 0) == 0);

    auto bad = styletts_cli("synthesize --models " + (dir / "models").string() +
                            " --text hi --embedding 0.5,0.1,0,0,0,0 --out " + wav);
    CHECK(bad.code != 0);
  }
}
