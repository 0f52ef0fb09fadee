#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kpaction/keypoints_io.hpp"
#include "kpaction/synthgen.hpp"
#include "support.hpp"

using namespace kpaction;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args, const fs::path& scratch, const std::string& stdin_text = "") {
  const auto in = scratch / "stdin.txt", out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  std::ofstream(in, std::ios::binary) << stdin_text;
  const std::string cmd = std::string(KPACTION_CLI_PATH) + " " + args + " < '" + in.string() + "' > '" + out.string() +
                          "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new kpaction::testing::TempDir("cli");
    const auto d = dir_->path().string();
    auto r = run("synth --n-per-class 12 --seed 42 '" + d + "/data'", dir_->path());
    ASSERT_EQ(r.code, 0) << r.err;
    r = run("train '" + d + "/data' '" + d + "/model.kmodel' --epochs 20 --recurrent-units 16 --hidden-units 8", dir_->path());
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static fs::path path(const std::string& name) { return dir_->path() / name; }
  static std::string q(const std::string& name) { return "'" + path(name).string() + "'"; }
  static RunResult cli(const std::string& args, const std::string& stdin_text = "") { return run(args, dir_->path(), stdin_text); }

  static kpaction::testing::TempDir* dir_;
};

kpaction::testing::TempDir* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, SynthWritesFilesAndManifest) {
  auto r = cli("synth --n-per-class 100 --out " + q("big"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("payment: 100"), std::string::npos);
  EXPECT_NE(r.out.find("evasion: 100"), std::string::npos);
  std::size_t kseq = 0;
  for (const auto& e : fs::directory_iterator(path("big"))) kseq += e.path().extension() == ".kseq";
  EXPECT_EQ(kseq, 200u);
  const auto manifest = nlohmann::json::parse(slurp(path("big") / "manifest.json"));
  EXPECT_EQ(manifest["classes"], nlohmann::json({"payment", "evasion"}));
  EXPECT_EQ(manifest["files"].size(), 200u);
}

TEST_F(Cli, SynthRerunIsByteIdentical) {
  ASSERT_EQ(cli("synth --n-per-class 4 --seed 9 " + q("a")).code, 0);
  ASSERT_EQ(cli("synth --n-per-class 4 --seed 9 " + q("b")).code, 0);
  for (const auto& e : fs::directory_iterator(path("a"))) {
    EXPECT_EQ(slurp(e.path()), slurp(path("b") / e.path().filename())) << e.path();
  }
}

TEST_F(Cli, SynthRejectsNegativeNoise) {
  const auto r = cli("synth --noise-sigma -1 " + q("neg"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("noise_sigma"), std::string::npos) << r.err;
}

TEST_F(Cli, SynthUnwritablePathIsIoError) {
  EXPECT_EQ(cli("synth --n-per-class 1 /proc/kpaction_no_such_dir").code, 2);
}

TEST_F(Cli, ConfigFileAndFlagPrecedence) {
  std::ofstream(path("synth.json")) << R"({"n_per_class": 3, "seed": 5, "dataset": "order_probe"})";
  auto r = cli("synth --config " + q("synth.json") + " --n-per-class 2 " + q("cfg"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ds = load_dataset(path("cfg"));
  EXPECT_EQ(ds.size(), 4u);
  EXPECT_EQ(ds.classes, synth::order_probe_classes());

  std::ofstream(path("bad.json")) << R"({"n_per_class": 3, "colour": "blue"})";
  r = cli("synth --config " + q("bad.json") + " " + q("bad"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST_F(Cli, TrainWritesModelAndMetrics) {
  const auto csv = slurp(path("metrics.csv"));
  EXPECT_EQ(line_count(csv), 21u);  // header + 20 epochs
  EXPECT_TRUE(fs::exists(path("model.kmodel")));
  const auto r = cli("train " + q("data") + " " + q("mlp.kmodel") + " --arch mlp --epochs 2 --metrics " + q("mlp.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("final test accuracy"), std::string::npos);
  EXPECT_NE(slurp(path("mlp.kmodel")).find("mlp_baseline"), std::string::npos);
  EXPECT_EQ(line_count(slurp(path("mlp.csv"))), 3u);
}

TEST_F(Cli, TrainRejectsZeroEpochs) {
  EXPECT_EQ(cli("train " + q("data") + " " + q("zero.kmodel") + " --epochs 0").code, 1);
  EXPECT_FALSE(fs::exists(path("zero.kmodel")));
}

TEST_F(Cli, TrainMissingManifestIsIoError) {
  fs::create_directories(path("empty"));
  EXPECT_EQ(cli("train " + q("empty") + " " + q("x.kmodel")).code, 2);
}

TEST_F(Cli, TrainSweepPrintsOneReportPerGridPoint) {
  std::ofstream(path("grid.json")) << R"([{"name": "a", "epochs": 1}, {"name": "b", "epochs": 1, "hidden_activation": "tanh"}])";
  const auto r = cli("train " + q("data") + " --sweep " + q("grid.json") + " --recurrent-units 8 --hidden-units 8");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[1]["name"], "b");
  EXPECT_EQ(j[1]["config"]["seed"], 43);
}

TEST_F(Cli, EvalReportsTestSplit) {
  const auto r = cli("eval " + q("model.kmodel") + " " + q("data") + " --split test");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  std::uint64_t sum = 0;
  for (const auto& row : j["confusion"]) {
    for (const auto& v : row) sum += v.get<std::uint64_t>();
  }
  EXPECT_EQ(sum, 8u);  // 12 per class, 8 train + 4 test each
  EXPECT_EQ(j["total"], 8);
}

TEST_F(Cli, EvalCsvFormat) {
  const auto r = cli("eval " + q("model.kmodel") + " " + q("data") + " --format csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "truth\\predicted,payment,evasion");
  EXPECT_EQ(line_count(r.out), 3u);
}

TEST_F(Cli, EvalDimensionMismatchNamesBothDims) {
  ASSERT_EQ(cli("synth --n-per-class 1 --layout holistic_full " + q("wide")).code, 0);
  const auto r = cli("eval " + q("model.kmodel") + " " + q("wide"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("132"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("1662"), std::string::npos) << r.err;
}

TEST_F(Cli, PredictPaymentStreamMostlyPayment) {
  synth::SynthConfig c;
  c.seed = 77;
  KeypointSequence stream = synth::generate_payment_sequence(c, 0);
  stream.frames.clear();
  for (std::uint64_t i = 0; i < 4; ++i) {
    for (auto f : synth::generate_payment_sequence(c, i).frames) {
      f.timestamp_s = 0.1 * static_cast<double>(stream.frames.size());
      stream.frames.push_back(std::move(f));
    }
  }
  save_sequence(path("pay.kseq"), stream);
  const auto r = cli("predict " + q("model.kmodel") + " " + q("pay.kseq") + " --threshold 0");
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t total = 0, payment = 0;
  std::istringstream lines(r.out);
  for (std::string line; std::getline(lines, line);) {
    const auto j = nlohmann::json::parse(line);
    ++total;
    payment += j["label"] == "payment";
  }
  EXPECT_EQ(total, stream.frames.size() - 29);
  EXPECT_GT(payment * 10, total * 8);

  // Same frames on stdin, with the header line, give the same events.
  const auto piped = cli("predict " + q("model.kmodel") + " --threshold 0", write_sequence_file(stream));
  EXPECT_EQ(piped.out, r.out);
  const auto changes = cli("predict " + q("model.kmodel") + " " + q("pay.kseq") + " --threshold 0 --changes-only");
  EXPECT_LT(line_count(changes.out), total);
}

TEST_F(Cli, PredictRejectsThresholdAboveOne) {
  EXPECT_EQ(cli("predict " + q("model.kmodel") + " --threshold 1.1").code, 1);
}

TEST_F(Cli, PredictEmptyStreamPrintsNothing) {
  const auto r = cli("predict " + q("model.kmodel") + " -");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, PredictBadFrameLineIsIoError) {
  const auto r = cli("predict " + q("model.kmodel"), "[0,1,2]\n");
  EXPECT_EQ(r.code, 1);  // wrong width is a shape error
  const auto p = cli("predict " + q("model.kmodel"), "[0,1,2\n");
  EXPECT_EQ(p.code, 2);
  EXPECT_NE(p.err.find("line 1"), std::string::npos);
}

TEST_F(Cli, GradcheckDefaultPasses) {
  const auto r = cli("gradcheck");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  const auto again = cli("gradcheck");
  EXPECT_EQ(again.out, r.out);
  EXPECT_EQ(cli("gradcheck --arch mlp").code, 0);
}

TEST_F(Cli, GradcheckTightToleranceFails) {
  const auto r = cli("gradcheck --tolerance 1e-12");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, UnknownSubcommandOrFlagIsConfigError) {
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("gradcheck --no-such-flag 1").code, 1);
}
