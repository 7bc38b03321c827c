#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "bridge/data_io.hpp"
#include "cli.hpp"
#include "synthetic.hpp"

using namespace bridge;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("bridge_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Synthetic digits in the IDX layout the loader expects.
fs::path fixture_data() {
  static const fs::path dir = [] {
    const auto d = scratch("data");
    const auto train = testing::synthetic_digits(120, 1), test = testing::synthetic_digits(40, 2);
    save_idx(train, d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte");
    save_idx(test, d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte");
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  const auto b = read_file(p);
  return {b.begin(), b.end()};
}

std::size_t count_lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"bogus"}).code == cli::kUsage);
  CHECK(run({"train", "--data", "x", "--out", "y", "--no-such-flag"}).code == cli::kUsage);
  CHECK(run({"train", "--out", "y"}).code == cli::kUsage);
  CHECK(run({"train", "--data", "x", "--out", "y", "--algebra", "hrr"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("config errors are reported before data is read") {
  const auto out = scratch("cfgerr");
  const auto r = run({"train", "--data", "/nonexistent", "--out", out.string(), "--extractor", "magic"});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("extractor") != std::string::npos);
  const auto d = run({"continual", "--data", "/nonexistent", "--out", out.string(), "--scenario",
                      "distilled", "--algebra", "control"});
  CHECK(d.code == cli::kUsage);
  CHECK(run({"train", "--data", "/nonexistent", "--out", out.string()}).code == cli::kDataError);
}

TEST_CASE("vsa-bench reports the 2-bundle constant") {
  const auto out = scratch("bench");
  const auto r = run({"vsa-bench", "--dim", "1024", "--pairs", "200", "--out", out.string()});
  REQUIRE(r.code == cli::kOk);
  const auto csv = slurp(out / "vsa_bench.csv");
  const auto pos = csv.find("bundle2_member_similarity,");
  REQUIRE(pos != std::string::npos);
  const double v = std::stod(csv.substr(pos + 26, csv.find(',', pos + 26) - pos - 26));
  CHECK(v >= 0.60);
  CHECK(v <= 0.67);
}

TEST_CASE("train is deterministic and echoes the resolved config") {
  const auto data = fixture_data().string();
  const auto a = scratch("train_a"), b = scratch("train_b");
  const std::vector<std::string> common{"--data", data, "--dim", "32", "--epochs", "2", "--seed", "1"};
  auto args_a = std::vector<std::string>{"train", "--out", a.string()};
  args_a.insert(args_a.end(), common.begin(), common.end());
  auto args_b = std::vector<std::string>{"train", "--out", b.string()};
  args_b.insert(args_b.end(), common.begin(), common.end());
  REQUIRE(run(args_a).code == cli::kOk);
  REQUIRE(run(args_b).code == cli::kOk);
  CHECK(slurp(a / "train.csv") == slurp(b / "train.csv"));
  for (const auto& e : fs::directory_iterator(a / "checkpoint"))
    CHECK(read_file(e.path()) == read_file(b / "checkpoint" / e.path().filename()));
  const auto csv = slurp(a / "train.csv");
  CHECK(csv.rfind("epoch,channel,fwd_loss,rev_loss,test_acc\n", 0) == 0);
  CHECK(count_lines(csv) == 1 + 2 * 2);
  CHECK(fs::exists(a / "config.ini"));

  SUBCASE("eval, generate and distill consume the checkpoint") {
    const auto ck = (a / "checkpoint").string();
    const auto before = read_file(a / "checkpoint" / "manifest.txt");
    const auto e = run({"eval", "--checkpoint", ck, ck});
    CHECK(e.code == cli::kOk);
    CHECK(e.out.find("+- 0.000000 (n=2)") != std::string::npos);

    const auto g = scratch("gen");
    REQUIRE(run({"generate", "--checkpoint", ck, "--per-class", "2", "--out", g.string()}).code == cli::kOk);
    CHECK(fs::exists(g / "class0_0.pgm"));
    CHECK(fs::exists(g / "class9_1.pgm"));

    const auto d = scratch("dist");
    REQUIRE(run({"distill", "--checkpoint", ck, "--count", "16", "--steps", "5", "--out", d.string()}).code ==
            cli::kOk);
    const auto s = scratch("student");
    const auto st = run({"distill-train", "--checkpoint", ck, "--distilled", d.string(), "--epochs", "2",
                         "--out", s.string()});
    CHECK(st.code == cli::kOk);
    CHECK(st.out.find("student accuracy") != std::string::npos);
    CHECK(read_file(a / "checkpoint" / "manifest.txt") == before);
  }
}

TEST_CASE("flags override the config file, which overrides defaults") {
  const auto data = fixture_data().string();
  const auto dir = scratch("precedence");
  write_text(dir / "run.ini", "[train]\ndim=48\nepochs=1\nbatch=16\n");
  const auto out = dir / "out";
  REQUIRE(run({"--config", (dir / "run.ini").string(), "train", "--data", data, "--out", out.string(),
               "--dim", "40"})
              .code == cli::kOk);
  const auto cfg = slurp(out / "config.ini");
  CHECK(cfg.find("dim=40") != std::string::npos);
  CHECK(cfg.find("epochs=1") != std::string::npos);
  CHECK(cfg.find("batch=16") != std::string::npos);
  CHECK(cfg.find("lr=0.001") != std::string::npos);
  CHECK(cfg.rfind("[train]\n", 0) == 0);
  CHECK(count_lines(slurp(out / "train.csv")) == 1 + 2);

  const auto again = dir / "again";
  REQUIRE(run({"--config", (out / "config.ini").string(), "train", "--out", again.string()}).code == cli::kOk);
  CHECK(slurp(again / "train.csv") == slurp(out / "train.csv"));
}

TEST_CASE("sweep and continual outputs") {
  const auto data = fixture_data().string();
  const auto s = scratch("sweep");
  REQUIRE(run({"sweep", "--data", data, "--out", s.string(), "--dims", "16,32", "--seeds", "1,2", "--epochs",
               "1"})
              .code == cli::kOk);
  const auto csv = slurp(s / "sweep.csv");
  CHECK(csv.rfind("dim,algebra,seed,accuracy\n", 0) == 0);
  CHECK(count_lines(csv) == 1 + 2 * 2 * 2);

  const auto c = scratch("continual");
  REQUIRE(run({"continual", "--data", data, "--out", c.string(), "--dim", "32", "--scenario", "stored-raw",
               "--epochs-per-task", "1"})
              .code == cli::kOk);
  const auto cc = slurp(c / "continual.csv");
  CHECK(cc.rfind("stage,task,accuracy\n", 0) == 0);
  CHECK(count_lines(cc) == 1 + 15);
  CHECK(fs::exists(c / "forgetting.txt"));
}
