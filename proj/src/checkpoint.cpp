#include "tfmt/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace tfmt {

namespace {

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double read_double(std::istream& is, const char* what) {
  std::string tok;
  if (!(is >> tok)) throw CheckpointError(std::string("truncated checkpoint reading ") + what);
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) {
    throw CheckpointError(std::string("bad number '") + tok + "' reading " + what);
  }
  return v;
}

template <class T>
T read_value(std::istream& is, const char* what) {
  T v{};
  if (!(is >> v)) throw CheckpointError(std::string("truncated checkpoint reading ") + what);
  return v;
}

void expect(std::istream& is, const std::string& word) {
  std::string tok;
  if (!(is >> tok) || tok != word) {
    throw CheckpointError("expected '" + word + "' but found '" + tok + "'");
  }
}

void write_params(std::ostream& os, const char* role, const ModelParams& p) {
  p.visit([&](const std::string& name, const Tensor& t) {
    os << "tensor " << role << '.' << name << ' ' << t.shape.size();
    for (auto dim : t.shape) os << ' ' << dim;
    os << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
      os << hexfloat(t[i]) << (i + 1 == t.size() || i % 8 == 7 ? '\n' : ' ');
    }
  });
}

void read_params(std::istream& is, const char* role, ModelParams& p) {
  p.visit([&](const std::string& name, Tensor& t) {
    expect(is, "tensor");
    const std::string full = std::string(role) + '.' + name;
    expect(is, full);
    const auto rank = read_value<std::size_t>(is, "rank");
    std::vector<std::size_t> shape(rank);
    for (auto& dim : shape) dim = read_value<std::size_t>(is, "shape");
    if (shape != t.shape) throw CheckpointError("shape mismatch for " + full);
    for (double& v : t.data) v = read_double(is, full.c_str());
  });
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os << kCheckpointMagic << '\n';
  os << "encoder_kind " << kEncoderKind << '\n';
  for (const auto& [k, v] : config_entries(ckpt.config)) os << "config " << k << ' ' << v << '\n';
  os << "epoch " << ckpt.epoch << '\n';
  os << "history " << ckpt.history.size() << '\n';
  for (const auto& e : ckpt.history) {
    os << e.epoch << ' ' << e.step;
    for (double v : {e.mean.l_rpn, e.mean.l_rpc, e.mean.l_sup, e.mean.l_uns, e.mean.l_mmd_boundary,
                     e.mean.l_mmd_region, e.mean.l_mmd, e.mean.total, e.dev_f1, e.test_f1}) {
      os << ' ' << hexfloat(v);
    }
    os << '\n';
  }
  if (!same_shapes(ckpt.student, ckpt.teacher)) {
    throw CheckpointError("student and teacher shapes differ");
  }
  write_params(os, "student", ckpt.student);
  write_params(os, "teacher", ckpt.teacher);
  os << "end\n";
}

Checkpoint read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointMagic) {
    throw CheckpointError("not a checkpoint (bad header)");
  }
  Checkpoint ckpt;
  expect(is, "encoder_kind");
  const auto kind = read_value<std::string>(is, "encoder kind");
  if (kind != kEncoderKind) throw CheckpointError("unsupported encoder kind '" + kind + "'");
  std::string tok;
  while (is >> tok && tok == "config") {
    const auto key = read_value<std::string>(is, "config key");
    const auto value = read_value<std::string>(is, "config value");
    try {
      set_config_value(ckpt.config, key, value);
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("bad config in checkpoint: ") + e.what());
    }
  }
  if (tok != "epoch") throw CheckpointError("expected 'epoch' but found '" + tok + "'");
  ckpt.epoch = read_value<int>(is, "epoch");
  expect(is, "history");
  const auto rows = read_value<std::size_t>(is, "history size");
  for (std::size_t r = 0; r < rows; ++r) {
    EpochLog e;
    e.epoch = read_value<int>(is, "history epoch");
    e.step = read_value<long>(is, "history step");
    for (double* v : {&e.mean.l_rpn, &e.mean.l_rpc, &e.mean.l_sup, &e.mean.l_uns,
                      &e.mean.l_mmd_boundary, &e.mean.l_mmd_region, &e.mean.l_mmd, &e.mean.total,
                      &e.dev_f1, &e.test_f1}) {
      *v = read_double(is, "history");
    }
    ckpt.history.push_back(e);
  }
  ModelConfig mcfg;
  try {
    validate(ckpt.config);
    mcfg = model_config(ckpt.config);
    validate(mcfg);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("bad config in checkpoint: ") + e.what());
  }
  ckpt.student = make_model_params(mcfg);
  ckpt.teacher = make_model_params(mcfg);
  read_params(is, "student", ckpt.student);
  read_params(is, "teacher", ckpt.teacher);
  expect(is, "end");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_checkpoint(os, ckpt);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  try {
    return read_checkpoint(is);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace tfmt
