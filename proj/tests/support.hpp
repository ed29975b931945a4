#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tfmt/corpus.hpp"
#include "tfmt/random.hpp"

namespace tfmt::test {

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

inline Sentence words(const std::string& text) {
  Sentence s;
  std::istringstream is(text);
  for (std::string w; is >> w;) s.tokens.push_back(w);
  return s;
}

inline Span random_span(Rng& rng, int n, int max_len = 3) {
  const int start = int(rng.below(std::size_t(n)));
  const int len = 1 + int(rng.below(std::size_t(std::min(max_len, n - start))));
  return {start, start + len - 1};
}

/// Random valid sentence with up to max_triplets distinct triplets.
inline LabeledSentence random_labeled(Rng& rng, int max_n = 12, int max_triplets = 4) {
  LabeledSentence ls;
  const int n = 1 + int(rng.below(std::size_t(max_n)));
  for (int i = 0; i < n; ++i) ls.sentence.tokens.push_back("w" + std::to_string(rng.below(50)));
  const int count = int(rng.below(std::size_t(max_triplets + 1)));
  for (int t = 0; t < count; ++t) {
    Triplet trip{random_span(rng, n), random_span(rng, n), Polarity(rng.below(3))};
    if (std::find(ls.triplets.begin(), ls.triplets.end(), trip) == ls.triplets.end()) {
      ls.triplets.push_back(trip);
    }
  }
  return ls;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tfmt_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace tfmt::test
