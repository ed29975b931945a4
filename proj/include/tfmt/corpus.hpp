#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tfmt {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Sentence {
  std::vector<std::string> tokens;

  int size() const { return int(tokens.size()); }
  bool operator==(const Sentence&) const = default;
};

/// Inclusive token interval [start, end].
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  bool overlaps(const Span& o) const { return start <= o.end && o.start <= end; }
  auto operator<=>(const Span&) const = default;
};

enum class Polarity : int { Pos = 0, Neu = 1, Neg = 2 };

inline constexpr int kNumPolarities = 3;

std::string_view polarity_name(Polarity p);
Polarity parse_polarity(std::string_view s);

struct Triplet {
  Span aspect;
  Span opinion;
  Polarity polarity = Polarity::Pos;

  auto operator<=>(const Triplet&) const = default;
};

/// Aspect/opinion pair, the AOPE analogue of a triplet.
struct Pair {
  Span aspect;
  Span opinion;

  auto operator<=>(const Pair&) const = default;
};

struct LabeledSentence {
  Sentence sentence;
  std::vector<Triplet> triplets;

  bool operator==(const LabeledSentence&) const = default;
};

/// Checks tokens and spans; throws ParseError describing the first problem.
void validate(const LabeledSentence& ls);

/// Parses `tok tok ...####[([a..], [o..], 'POS'), ...]`. `line_no` only
/// feeds error messages.
LabeledSentence parse_aste_line(std::string_view line, int line_no = 0);
std::string serialize_aste_line(const LabeledSentence& ls);

std::vector<LabeledSentence> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path,
                  const std::vector<LabeledSentence>& records);

// -- synthetic two-domain corpus -------------------------------------------

struct SynthConfig {
  int num_source = 100;
  int num_dev = 30;
  int num_target = 100;
  int num_test = 50;
  std::uint64_t seed = 7;
  int source_aspects = 12;
  int source_opinions = 9;
  int target_aspects = 12;
  int target_opinions = 9;
  int max_len = 24;
  double two_triplet_rate = 0.4;
  double two_token_aspect_rate = 0.3;
  /// Probability that a polarity cue word precedes the opinion word.
  double cue_rate = 0.6;
  /// Polarity of opinion word k is polarity_table[k % size]. Empty means
  /// the cycle POS, NEU, NEG.
  std::vector<Polarity> polarity_table;
};

struct DomainLexicon {
  std::vector<std::string> aspects;
  std::vector<std::string> opinions;
  std::vector<Polarity> opinion_polarity;
};

struct SynthCorpus {
  std::vector<LabeledSentence> source_train;
  std::vector<LabeledSentence> source_dev;
  /// Target sentences with their triplets stripped.
  std::vector<LabeledSentence> target_unlabeled;
  std::vector<LabeledSentence> target_test;
  DomainLexicon source_lexicon;
  DomainLexicon target_lexicon;
  std::vector<std::string> context_words;
};

void validate(const SynthConfig& cfg);
SynthCorpus synth_corpus(const SynthConfig& cfg);

/// Distinct tokens of a set of sentences, in first-seen order.
std::vector<std::string> vocabulary(const std::vector<LabeledSentence>& data);

}  // namespace tfmt
