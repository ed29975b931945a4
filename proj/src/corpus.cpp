#include "tfmt/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "tfmt/random.hpp"

namespace tfmt {

std::string_view polarity_name(Polarity p) {
  switch (p) {
    case Polarity::Pos: return "POS";
    case Polarity::Neu: return "NEU";
    case Polarity::Neg: return "NEG";
  }
  return "?";
}

Polarity parse_polarity(std::string_view s) {
  if (s == "POS") return Polarity::Pos;
  if (s == "NEU") return Polarity::Neu;
  if (s == "NEG") return Polarity::Neg;
  throw ParseError("unknown polarity '" + std::string(s) + "'");
}

void validate(const LabeledSentence& ls) {
  const int n = ls.sentence.size();
  if (n < 1) throw ParseError("sentence has no tokens");
  for (const auto& tok : ls.sentence.tokens) {
    if (tok.empty()) throw ParseError("empty token");
    for (char c : tok) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        throw ParseError("token contains whitespace: '" + tok + "'");
      }
    }
  }
  std::set<Triplet> seen;
  for (const auto& t : ls.triplets) {
    for (const Span& s : {t.aspect, t.opinion}) {
      if (s.start < 0 || s.end >= n || s.start > s.end) {
        throw ParseError("span [" + std::to_string(s.start) + "," +
                         std::to_string(s.end) + "] out of range for " +
                         std::to_string(n) + " tokens");
      }
    }
    if (!seen.insert(t).second) throw ParseError("duplicate triplet");
  }
}

namespace {

class LabelCursor {
 public:
  explicit LabelCursor(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= s_.size();
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  void expect(char c) {
    if (!peek(c)) {
      throw ParseError(std::string("expected '") + c + "' at label offset " +
                       std::to_string(pos_));
    }
    ++pos_;
  }
  int integer() {
    skip_ws();
    std::size_t begin = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (begin == pos_) {
      throw ParseError("expected index at label offset " + std::to_string(begin));
    }
    return std::stoi(std::string(s_.substr(begin, pos_ - begin)));
  }
  std::string quoted() {
    skip_ws();
    if (pos_ >= s_.size() || (s_[pos_] != '\'' && s_[pos_] != '"')) {
      throw ParseError("expected quoted polarity at label offset " + std::to_string(pos_));
    }
    const char q = s_[pos_++];
    std::size_t close = s_.find(q, pos_);
    if (close == std::string_view::npos) throw ParseError("unterminated polarity string");
    std::string out(s_.substr(pos_, close - pos_));
    pos_ = close + 1;
    return out;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

Span parse_index_list(LabelCursor& cur) {
  cur.expect('[');
  std::vector<int> idx;
  if (!cur.peek(']')) {
    idx.push_back(cur.integer());
    while (cur.peek(',')) {
      cur.expect(',');
      idx.push_back(cur.integer());
    }
  }
  cur.expect(']');
  if (idx.empty()) throw ParseError("empty index list");
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (idx[i] != idx[i - 1] + 1) throw ParseError("non-contiguous index list");
  }
  return Span{idx.front(), idx.back()};
}

}  // namespace

LabeledSentence parse_aste_line(std::string_view line, int line_no) {
  auto fail = [line_no](const std::string& why) -> ParseError {
    return ParseError("line " + std::to_string(line_no) + ": " + why);
  };
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  const std::size_t sep = line.rfind("####");
  if (sep == std::string_view::npos) throw fail("missing '####' separator");

  LabeledSentence out;
  std::istringstream words{std::string(line.substr(0, sep))};
  for (std::string tok; words >> tok;) out.sentence.tokens.push_back(tok);

  try {
    LabelCursor cur(line.substr(sep + 4));
    cur.expect('[');
    if (!cur.peek(']')) {
      while (true) {
        cur.expect('(');
        Triplet t;
        t.aspect = parse_index_list(cur);
        cur.expect(',');
        t.opinion = parse_index_list(cur);
        cur.expect(',');
        t.polarity = parse_polarity(cur.quoted());
        cur.expect(')');
        out.triplets.push_back(t);
        if (!cur.peek(',')) break;
        cur.expect(',');
      }
    }
    cur.expect(']');
    if (!cur.at_end()) throw ParseError("trailing characters after triplet list");
    validate(out);
  } catch (const ParseError& e) {
    throw fail(e.what());
  }
  return out;
}

std::string serialize_aste_line(const LabeledSentence& ls) {
  std::string out;
  for (std::size_t i = 0; i < ls.sentence.tokens.size(); ++i) {
    if (i) out += ' ';
    out += ls.sentence.tokens[i];
  }
  out += "####[";
  auto list = [&out](const Span& s) {
    out += '[';
    for (int i = s.start; i <= s.end; ++i) {
      if (i != s.start) out += ", ";
      out += std::to_string(i);
    }
    out += ']';
  };
  for (std::size_t i = 0; i < ls.triplets.size(); ++i) {
    const auto& t = ls.triplets[i];
    if (i) out += ", ";
    out += '(';
    list(t.aspect);
    out += ", ";
    list(t.opinion);
    out += ", '";
    out += polarity_name(t.polarity);
    out += "')";
  }
  out += ']';
  return out;
}

std::vector<LabeledSentence> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<LabeledSentence> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_aste_line(line, line_no));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  if (in.bad()) throw std::runtime_error("read error on " + path.string());
  return out;
}

void save_dataset(const std::filesystem::path& path,
                  const std::vector<LabeledSentence>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) out << serialize_aste_line(r) << '\n';
  if (!out) throw std::runtime_error("write error on " + path.string());
}

std::vector<std::string> vocabulary(const std::vector<LabeledSentence>& data) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& ls : data) {
    for (const auto& tok : ls.sentence.tokens) {
      if (seen.insert(tok).second) out.push_back(tok);
    }
  }
  return out;
}

// -- synthetic corpus --------------------------------------------------------

namespace {

const std::vector<std::string> kDeterminers = {"the", "their", "our", "this", "that"};
const std::vector<std::string> kCopulas = {"is", "was", "seems", "looks", "felt"};
const std::vector<std::string> kPrefix = {"honestly", "overall", "i", "think",
                                          "well", "also", "then", "now"};
const std::vector<std::string> kSuffix = {"here", "today", "again", "there", "lately"};
const std::vector<std::string> kJoiners = {"and", "but", ",", "while"};
const std::array<std::vector<std::string>, kNumPolarities> kCues = {
    std::vector<std::string>{"truly", "so"},
    std::vector<std::string>{"fairly", "kinda"},
    std::vector<std::string>{"too", "rather"}};

constexpr int kMaxLexicon = 4000;

std::vector<std::string> all_context_words() {
  std::vector<std::string> out;
  for (const auto* list : {&kDeterminers, &kCopulas, &kPrefix, &kSuffix, &kJoiners}) {
    out.insert(out.end(), list->begin(), list->end());
  }
  for (const auto& cues : kCues) out.insert(out.end(), cues.begin(), cues.end());
  out.push_back(".");
  std::vector<std::string> uniq;
  for (const auto& w : out) {
    if (std::find(uniq.begin(), uniq.end(), w) == uniq.end()) uniq.push_back(w);
  }
  return uniq;
}

std::string pseudo_word(Rng& rng) {
  static constexpr std::string_view kCons = "bdfgklmnprstvz";
  static constexpr std::string_view kVow = "aeiou";
  const int syllables = 2 + int(rng.below(2));
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += kCons[rng.below(kCons.size())];
    w += kVow[rng.below(kVow.size())];
  }
  return w;
}

std::vector<std::string> fresh_words(int count, Rng& rng, std::unordered_set<std::string>& used) {
  std::vector<std::string> out;
  while (int(out.size()) < count) {
    std::string w = pseudo_word(rng);
    if (used.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

DomainLexicon make_lexicon(int aspects, int opinions, const std::vector<Polarity>& table,
                           Rng& rng, std::unordered_set<std::string>& used) {
  DomainLexicon lex;
  lex.aspects = fresh_words(aspects, rng, used);
  lex.opinions = fresh_words(opinions, rng, used);
  for (int k = 0; k < opinions; ++k) lex.opinion_polarity.push_back(table[k % table.size()]);
  return lex;
}

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

/// Appends one `<ctx>* det <aspect> cop [cue] <opinion> <ctx>?` clause.
void emit_clause(const DomainLexicon& lex, const SynthConfig& cfg, Rng& rng,
                 LabeledSentence& out) {
  auto& toks = out.sentence.tokens;
  const int prefix = int(rng.below(3));
  for (int i = 0; i < prefix; ++i) toks.push_back(pick(kPrefix, rng));
  toks.push_back(pick(kDeterminers, rng));

  Triplet t;
  t.aspect.start = int(toks.size());
  const std::size_t head = rng.below(lex.aspects.size());
  if (lex.aspects.size() >= 2 && rng.bernoulli(cfg.two_token_aspect_rate)) {
    std::size_t mod = rng.below(lex.aspects.size() - 1);
    if (mod >= head) ++mod;
    toks.push_back(lex.aspects[mod]);
  }
  toks.push_back(lex.aspects[head]);
  t.aspect.end = int(toks.size()) - 1;

  toks.push_back(pick(kCopulas, rng));
  const std::size_t op = rng.below(lex.opinions.size());
  t.polarity = lex.opinion_polarity[op];
  if (rng.bernoulli(cfg.cue_rate)) toks.push_back(pick(kCues[int(t.polarity)], rng));
  t.opinion.start = t.opinion.end = int(toks.size());
  toks.push_back(lex.opinions[op]);
  if (rng.bernoulli(0.5)) toks.push_back(pick(kSuffix, rng));
  out.triplets.push_back(t);
}

LabeledSentence make_sentence(const DomainLexicon& lex, const SynthConfig& cfg, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    LabeledSentence ls;
    emit_clause(lex, cfg, rng, ls);
    if (rng.bernoulli(cfg.two_triplet_rate)) {
      ls.sentence.tokens.push_back(pick(kJoiners, rng));
      emit_clause(lex, cfg, rng, ls);
    }
    ls.sentence.tokens.push_back(".");
    if (ls.sentence.size() <= cfg.max_len) return ls;
  }
  throw ConfigError("max_len too small for the sentence template");
}

std::vector<LabeledSentence> make_split(int count, const DomainLexicon& lex,
                                        const SynthConfig& cfg, Rng& rng) {
  std::vector<LabeledSentence> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(make_sentence(lex, cfg, rng));
  return out;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.num_source < 1 || cfg.num_dev < 1 || cfg.num_target < 1 || cfg.num_test < 1) {
    throw ConfigError("synthetic split counts must be >= 1");
  }
  if (cfg.source_aspects < 1 || cfg.target_aspects < 1 || cfg.source_opinions < 1 ||
      cfg.target_opinions < 1) {
    throw ConfigError("lexicon exhausted: every domain needs at least one aspect and opinion");
  }
  if (cfg.two_token_aspect_rate > 0 && (cfg.source_aspects < 2 || cfg.target_aspects < 2)) {
    throw ConfigError("lexicon exhausted: two-token aspects need at least two aspect words");
  }
  if (cfg.source_aspects + cfg.source_opinions + cfg.target_aspects + cfg.target_opinions >
      kMaxLexicon) {
    throw ConfigError("lexicon exhausted: at most " + std::to_string(kMaxLexicon) +
                      " domain words can be generated");
  }
  if (cfg.max_len < 7) throw ConfigError("max_len must be >= 7");
  for (double p : {cfg.two_triplet_rate, cfg.two_token_aspect_rate, cfg.cue_rate}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synthetic rates must lie in [0,1]");
  }
}

SynthCorpus synth_corpus(const SynthConfig& cfg) {
  validate(cfg);
  const std::vector<Polarity> table =
      cfg.polarity_table.empty()
          ? std::vector<Polarity>{Polarity::Pos, Polarity::Neu, Polarity::Neg}
          : cfg.polarity_table;

  SynthCorpus corpus;
  corpus.context_words = all_context_words();
  std::unordered_set<std::string> used(corpus.context_words.begin(), corpus.context_words.end());
  Rng lex_rng = Rng::stream(cfg.seed, 0);
  corpus.source_lexicon =
      make_lexicon(cfg.source_aspects, cfg.source_opinions, table, lex_rng, used);
  corpus.target_lexicon =
      make_lexicon(cfg.target_aspects, cfg.target_opinions, table, lex_rng, used);

  Rng src_rng = Rng::stream(cfg.seed, 1);
  Rng tgt_rng = Rng::stream(cfg.seed, 2);
  corpus.source_train = make_split(cfg.num_source, corpus.source_lexicon, cfg, src_rng);
  corpus.source_dev = make_split(cfg.num_dev, corpus.source_lexicon, cfg, src_rng);
  corpus.target_unlabeled = make_split(cfg.num_target, corpus.target_lexicon, cfg, tgt_rng);
  for (auto& ls : corpus.target_unlabeled) ls.triplets.clear();
  corpus.target_test = make_split(cfg.num_test, corpus.target_lexicon, cfg, tgt_rng);
  return corpus;
}

}  // namespace tfmt
