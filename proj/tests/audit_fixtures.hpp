#pragma once

// Hand-built pseudo-label audit cases. Each expected category follows from
// the taxonomy rules applied in order: exact match, same spans with another
// polarity, same polarity with overlapping but different spans, otherwise
// an error.

#include <vector>

#include "tfmt/eval.hpp"

namespace tfmt::test {

struct AuditCase {
  const char* what;
  Triplet pseudo;
  std::vector<Triplet> gold;
  ErrorCategory want;
};

inline std::vector<AuditCase> audit_cases() {
  using E = ErrorCategory;
  const Triplet g{{1, 2}, {4, 4}, Polarity::Pos};
  const Triplet h{{6, 6}, {8, 8}, Polarity::Neg};
  return {
      {"exact match", g, {g}, E::Correct},
      {"polarity flipped", {{1, 2}, {4, 4}, Polarity::Neg}, {g}, E::SentimentError},
      {"aspect truncated", {{1, 1}, {4, 4}, Polarity::Pos}, {g}, E::WordsMisLocalized},
      {"opinion extended", {{1, 2}, {4, 5}, Polarity::Pos}, {g}, E::WordsMisLocalized},
      {"both spans shifted", {{2, 3}, {3, 4}, Polarity::Pos}, {g}, E::WordsMisLocalized},
      {"overlap with wrong polarity", {{1, 1}, {4, 4}, Polarity::Neg}, {g}, E::Error},
      {"aspect disjoint", {{0, 0}, {4, 4}, Polarity::Pos}, {g}, E::Error},
      {"opinion disjoint", {{1, 2}, {5, 5}, Polarity::Pos}, {g}, E::Error},
      {"aspect and opinion swapped", {{4, 4}, {1, 2}, Polarity::Pos}, {g}, E::Error},
      {"matches the second gold", h, {g, h}, E::Correct},
      {"same spans win over overlap",
       {{1, 2}, {4, 4}, Polarity::Pos},
       {{{1, 2}, {4, 4}, Polarity::Neg}, {{1, 1}, {4, 4}, Polarity::Pos}},
       E::SentimentError},
      {"no gold at all", g, {}, E::Error},
  };
}

}  // namespace tfmt::test
