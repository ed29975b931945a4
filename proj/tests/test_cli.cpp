#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "tfmt/cli.hpp"

using namespace tfmt;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "tfmt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(int(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

constexpr const char* kSmallConfig =
    "# tiny corpus and model\n"
    "num_source = 12\n"
    "num_dev = 6\n"
    "num_target = 12\n"
    "num_test = 6\n"
    "max_len = 10\n"
    "d = 8\n"
    "vocab_buckets = 256\n"
    "max_n = 10\n"
    "epochs = 2\n"
    "eta = 0.5\n";

// Corpus plus config in a fresh directory.
fs::path small_setup(const std::string& name) {
  const fs::path dir = test::scratch_dir(name);
  std::ofstream(dir / "small.cfg") << kSmallConfig;
  const Run r = run({"synth", "--config", (dir / "small.cfg").string(), "--out", (dir / "data").string()});
  REQUIRE(r.code == 0);
  return dir;
}

std::vector<std::string> csv_row(const std::string& text, std::size_t row) {
  std::istringstream is(text);
  std::string line;
  for (std::size_t i = 0; i <= row; ++i) std::getline(is, line);
  std::vector<std::string> cells;
  std::istringstream ls(line);
  for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
  return cells;
}

std::size_t line_count(const std::string& text) {
  return std::size_t(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("config text") {
  const auto kv = parse_config_text("alpha = 0.5  # weight\n\n  mode=aope\r\n# only a comment\n");
  CHECK(kv == std::vector<std::pair<std::string, std::string>>{{"alpha", "0.5"}, {"mode", "aope"}});
  CHECK_THROWS_AS(parse_config_text("alpha 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("= 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(read_config_file("/nonexistent/tfmt.cfg"), ConfigError);
}

TEST_CASE("list and row parsers") {
  CHECK(parse_seed_list("1,2, 3") == std::vector<std::uint64_t>{1, 2, 3});
  CHECK_THROWS_AS(parse_seed_list("1,,2"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("-1"), ConfigError);
  CHECK(parse_grid("0,0.5,1") == std::vector<double>{0.0, 0.5, 1.0});
  CHECK_THROWS_AS(parse_grid("0.5,-1"), ConfigError);
  CHECK_THROWS_AS(parse_grid("x"), ConfigError);
  CHECK(parse_ablation_row("full") == Ablations{});
  CHECK(parse_ablation_row("no_uns+no_mmd") == Ablations{false, true, true});
  CHECK_THROWS_AS(parse_ablation_row("no_teacher"), ConfigError);

  SynthConfig sc;
  set_synth_value(sc, "num_source", "5");
  set_synth_value(sc, "cue_rate", "0.25");
  CHECK(sc.num_source == 5);
  CHECK(sc.cue_rate == 0.25);
  CHECK(is_synth_key("synth_seed"));
  CHECK_FALSE(is_synth_key("alpha"));
  CHECK_THROWS_AS(set_synth_value(sc, "num_source", "five"), ConfigError);
}

TEST_CASE("seed statistics") {
  const SeedStats one = seed_stats({0.4});
  CHECK(one.mean == 0.4);
  CHECK(one.stddev == 0.0);
  const SeedStats s = seed_stats({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("usage errors exit 1") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"bogus"}).code == kExitUsage);
  CHECK(run({"synth"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
  const fs::path dir = small_setup("cli_usage");
  const Run bad = run({"train", "--data", (dir / "data").string(), "--out", (dir / "o").string(),
                       "--lambda", "1.5"});
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("lambda") != std::string::npos);
  CHECK(run({"train", "--data", (dir / "data").string(), "--out", (dir / "o").string(), "--config",
             (dir / "missing.cfg").string()})
            .code == kExitUsage);
}

TEST_CASE("synth writes identical files for the same seed") {
  const fs::path dir = test::scratch_dir("cli_synth");
  std::ofstream(dir / "small.cfg") << kSmallConfig;
  for (const char* sub : {"a", "b"}) {
    CHECK(run({"synth", "--config", (dir / "small.cfg").string(), "--seed", "7", "--out",
               (dir / sub).string()})
              .code == 0);
  }
  for (const char* f : {kSourceTrainFile, kSourceDevFile, kTargetUnlabeledFile, kTargetTestFile}) {
    CHECK(test::slurp(dir / "a" / f) == test::slurp(dir / "b" / f));
  }
  const Datasets d = load_datasets(dir / "a");
  CHECK(d.source_train.size() == 12);
  CHECK(d.source_dev.size() == 6);
  CHECK(d.target_unlabeled.size() == 12);
  CHECK(d.target_test.size() == 6);
  for (const auto& ls : d.target_unlabeled) CHECK(ls.triplets.empty());
  CHECK(run({"synth", "--config", (dir / "small.cfg").string(), "--seed", "8", "--out",
             (dir / "c").string()})
            .code == 0);
  CHECK(test::slurp(dir / "a" / kSourceTrainFile) != test::slurp(dir / "c" / kSourceTrainFile));
}

TEST_CASE("train writes one log per seed and a summary of their mean") {
  const fs::path dir = small_setup("cli_train");
  const std::vector<std::string> args{"train", "--config", (dir / "small.cfg").string(), "--data",
                                      (dir / "data").string(), "--out", (dir / "out").string(),
                                      "--seeds", "1,2"};
  const Run r = run(args);
  REQUIRE(r.code == 0);
  for (const char* seed : {"1", "2"}) {
    const std::string log = test::slurp(dir / "out" / ("metrics_seed" + std::string(seed) + ".csv"));
    CHECK(log.rfind("epoch,step,l_rpn,l_rpc,l_sup,l_uns,l_mmd,total,dev_f1,test_f1\n", 0) == 0);
    CHECK(line_count(log) == 3);
    CHECK(fs::exists(dir / "out" / ("checkpoint_seed" + std::string(seed) + ".ckpt")));
  }
  const std::string runs = test::slurp(dir / "out" / "runs.csv");
  const std::string summary = test::slurp(dir / "out" / "summary.csv");
  CHECK(csv_row(summary, 0) == std::vector<std::string>{"variant", "mode", "ablate", "seeds",
                                                        "dev_f1_mean", "dev_f1_std",
                                                        "test_f1_mean", "test_f1_std"});
  const auto row = csv_row(summary, 1);
  CHECK(row[0] == "tfmt");
  CHECK(row[3] == "1 2");
  const double t1 = std::stod(csv_row(runs, 1)[3]), t2 = std::stod(csv_row(runs, 2)[3]);
  CHECK(std::stod(row[6]) == doctest::Approx((t1 + t2) / 2.0).epsilon(1e-6));
  // The selected epoch's test F1 appears in that seed's log.
  const auto best = csv_row(runs, 1);
  const auto logged = csv_row(test::slurp(dir / "out" / "metrics_seed1.csv"), std::stoul(best[1]));
  CHECK(logged[9] == best[3]);

  const Run again = run(args);
  CHECK(again.code == kExitUsage);
  CHECK(again.err.find("--force") != std::string::npos);
  const std::string before = test::slurp(dir / "out" / "metrics_seed1.csv");
  auto forced = args;
  forced.push_back("--force");
  CHECK(run(forced).code == 0);
  CHECK(test::slurp(dir / "out" / "metrics_seed1.csv") == before);

  auto src = args;
  src[6] = (dir / "src").string();
  src.insert(src.end(), {"--variant", "source_only"});
  REQUIRE(run(src).code == 0);
  CHECK(csv_row(test::slurp(dir / "src" / "summary.csv"), 0) == csv_row(summary, 0));
  CHECK(csv_row(test::slurp(dir / "src" / "summary.csv"), 1)[0] == "source_only");
}

TEST_CASE("eval") {
  const fs::path dir = small_setup("cli_eval");
  REQUIRE(run({"train", "--config", (dir / "small.cfg").string(), "--data", (dir / "data").string(),
               "--out", (dir / "out").string()})
              .code == 0);
  const std::string ckpt = (dir / "out" / "checkpoint_seed1.ckpt").string();
  const std::string test_file = (dir / "data" / kTargetTestFile).string();
  const Run a = run({"eval", "--checkpoint", ckpt, "--input", test_file, "--out", (dir / "ea").string()});
  const Run b = run({"eval", "--checkpoint", ckpt, "--input", test_file, "--out", (dir / "eb").string()});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(test::slurp(dir / "ea" / "report_aste.csv") == test::slurp(dir / "eb" / "report_aste.csv"));
  CHECK(run({"eval", "--checkpoint", ckpt, "--input", test_file, "--mode", "aope", "--out",
             (dir / "ea").string()})
            .code == 0);
  CHECK(fs::exists(dir / "ea" / "report_aope.csv"));

  std::ofstream(dir / "empty.txt").close();
  const Run empty = run({"eval", "--checkpoint", ckpt, "--input", (dir / "empty.txt").string()});
  CHECK(empty.code == kExitFailure);
  CHECK(run({"eval", "--checkpoint", test_file, "--input", test_file}).code == kExitFailure);

  REQUIRE(run({"train", "--config", (dir / "small.cfg").string(), "--data", (dir / "data").string(),
               "--out", (dir / "pairs").string(), "--mode", "aope"})
              .code == 0);
  CHECK(run({"eval", "--checkpoint", (dir / "pairs" / "checkpoint_seed1.ckpt").string(), "--input",
             test_file, "--mode", "aste"})
            .code == kExitFailure);
}

TEST_CASE("a model evaluated on its own training data after overfitting") {
  const fs::path dir = test::scratch_dir("cli_overfit");
  std::ofstream(dir / "fit.cfg") << "num_source = 8\nnum_dev = 4\nnum_target = 4\nnum_test = 4\n"
                                    "max_len = 10\nmax_n = 10\nvariant = source_only\n"
                                    "epochs = 60\n";
  const std::string cfg = (dir / "fit.cfg").string();
  REQUIRE(run({"synth", "--config", cfg, "--out", (dir / "data").string()}).code == 0);
  // Selection would stop at the best source-dev epoch; train and select on
  // the same sentences so the kept model is the overfit one.
  fs::copy_file(dir / "data" / kSourceTrainFile, dir / "data" / kSourceDevFile,
                fs::copy_options::overwrite_existing);
  REQUIRE(run({"train", "--config", cfg, "--data", (dir / "data").string(), "--out",
               (dir / "out").string()})
              .code == 0);
  REQUIRE(run({"eval", "--checkpoint", (dir / "out" / "checkpoint_seed1.ckpt").string(), "--input",
               (dir / "data" / kSourceTrainFile).string(), "--out", (dir / "out").string()})
              .code == 0);
  const auto row = csv_row(test::slurp(dir / "out" / "report_aste.csv"), 1);
  CHECK(std::stod(row[3]) >= 0.95);
}

TEST_CASE("audit") {
  const fs::path dir = small_setup("cli_audit");
  REQUIRE(run({"train", "--config", (dir / "small.cfg").string(), "--data", (dir / "data").string(),
               "--out", (dir / "out").string()})
              .code == 0);
  const std::string ckpt = (dir / "out" / "checkpoint_seed1.ckpt").string();
  const std::string test_file = (dir / "data" / kTargetTestFile).string();
  const Run none = run({"audit", "--checkpoint", ckpt, "--input", test_file, "--eta", "1.0",
                        "--out", (dir / "a1").string()});
  REQUIRE(none.code == 0);
  CHECK(test::slurp(dir / "a1" / "audit.csv") ==
        "category,count\nCORRECT,0\nSENTIMENT_ERROR,0\nWORDS_MIS_LOCALIZED,0\nERROR,0\n");
  const Run some = run({"audit", "--checkpoint", ckpt, "--input", test_file, "--eta", "0.2"});
  REQUIRE(some.code == 0);
  std::size_t total = 0;
  for (std::size_t row = 1; row <= 4; ++row) total += std::stoul(csv_row(some.out, row)[1]);
  CHECK(total > 0);
  CHECK(run({"audit", "--checkpoint", ckpt, "--input", test_file, "--eta", "0.2"}).out == some.out);
  CHECK(run({"audit", "--checkpoint", ckpt, "--input",
             (dir / "data" / kTargetUnlabeledFile).string()})
            .code == kExitFailure);
  CHECK(run({"audit", "--checkpoint", ckpt, "--input", test_file, "--eta", "2"}).code == kExitUsage);
}

TEST_CASE("gradcheck subcommand") {
  const fs::path dir = test::scratch_dir("cli_gradcheck");
  const Run r = run({"gradcheck", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(test::slurp(dir / "gradcheck.csv") == r.out);
}

TEST_CASE("ablate emits exactly the requested rows") {
  const fs::path dir = small_setup("cli_ablate");
  const std::string cfg = (dir / "small.cfg").string(), data = (dir / "data").string();
  const Run r = run({"ablate", "--config", cfg, "--data", data, "--out", (dir / "ab").string(),
                     "--ablate", "full,no_uns,no_uns+no_mmd", "--alpha-grid", "0,1", "--seeds", "1,2"});
  REQUIRE(r.code == 0);
  const std::string table = test::slurp(dir / "ab" / "ablation.csv");
  CHECK(line_count(table) == 6);
  CHECK(csv_row(table, 0)[0] == "row");
  const char* names[] = {"full", "no_uns", "no_uns+no_mmd", "alpha=0", "alpha=1"};
  for (std::size_t i = 0; i < 5; ++i) CHECK(csv_row(table, i + 1)[0] == names[i]);
  CHECK(csv_row(table, 3)[2] == "no_uns+no_mmd");

  // alpha = 0 trains exactly like no_uns; alpha = 1 exactly like full.
  auto scores = [&](std::size_t row) {
    const auto c = csv_row(table, row);
    return std::vector<std::string>(c.begin() + 6, c.end());
  };
  CHECK(scores(4) == scores(2));
  CHECK(scores(5) == scores(1));

  REQUIRE(run({"train", "--config", cfg, "--data", data, "--out", (dir / "tr").string(), "--seeds",
               "1,2"})
              .code == 0);
  const auto summary = csv_row(test::slurp(dir / "tr" / "summary.csv"), 1);
  CHECK(std::vector<std::string>(summary.begin() + 4, summary.end()) == scores(1));

  CHECK(run({"ablate", "--config", cfg, "--data", data, "--out", (dir / "ab").string(),
             "--ablate", "full"})
            .code == kExitUsage);
  CHECK(run({"ablate", "--config", cfg, "--data", data, "--out", (dir / "ab2").string(),
             "--alpha-grid", "-1"})
            .code == kExitUsage);
}
