#pragma once

// Text checkpoint: config, history and both parameter sets. Values are
// hexfloats, so save followed by load reproduces every bit.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "tfmt/trainer.hpp"

namespace tfmt {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kCheckpointMagic = "tfmt-checkpoint v1";
inline constexpr const char* kEncoderKind = "hash-window";

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tfmt
