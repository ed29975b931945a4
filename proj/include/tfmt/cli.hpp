#pragma once

// Command-line front end. Subcommands: synth, train, eval, audit, gradcheck,
// ablate. Exit status is 0 on success, 1 for usage or config errors and 2
// for runtime failures (I/O, bad checkpoints, a failed gradient check).

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tfmt/corpus.hpp"
#include "tfmt/trainer.hpp"

namespace tfmt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// Parses flat `key = value` lines; `#` starts a comment. Throws ConfigError
/// on a malformed line or a repeated key.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

bool is_synth_key(std::string_view key);
void set_synth_value(SynthConfig& cfg, std::string_view key, std::string_view value);

/// Comma-separated list of seeds, e.g. "1,2,3".
std::vector<std::uint64_t> parse_seed_list(std::string_view s);
/// Comma-separated list of non-negative weights for the alpha/beta sweeps.
std::vector<double> parse_grid(std::string_view s);

/// One row of the ablation table: "full" or a '+'-joined set such as
/// "no_uns+no_mmd".
Ablations parse_ablation_row(std::string_view row);

struct SeedStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single seed
};
SeedStats seed_stats(const std::vector<double>& values);

/// Corpus file names written by `synth` and read by `train`/`ablate`.
inline constexpr const char* kSourceTrainFile = "source_train.txt";
inline constexpr const char* kSourceDevFile = "source_dev.txt";
inline constexpr const char* kTargetUnlabeledFile = "target_unlabeled.txt";
inline constexpr const char* kTargetTestFile = "target_test.txt";

Datasets load_datasets(const std::filesystem::path& dir);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tfmt
