#pragma once

#include <compare>
#include <stdexcept>
#include <vector>

#include "tfmt/corpus.hpp"

namespace tfmt {

/// Region classes. Index order is the classifier's output order in ASTE mode.
enum class RegionClass : int { Pos = 0, Neu = 1, Neg = 2, Invalid = 3 };

RegionClass region_class(Polarity p);

/// Rectangle in the aspect x opinion table: rows a..c (aspect), columns b..d
/// (opinion). (a,b) is the top-left corner, (c,d) the bottom-right one.
struct Rect {
  int a = 0;
  int b = 0;
  int c = 0;
  int d = 0;

  bool valid() const { return a <= c && b <= d; }
  auto operator<=>(const Rect&) const = default;
};

struct GoldRegion {
  Rect rect;
  RegionClass cls = RegionClass::Invalid;

  auto operator<=>(const GoldRegion&) const = default;
};

/// Corner maps y^B and y^E, row-major n x n.
struct BoundaryLabels {
  int n = 0;
  std::vector<int> begin;
  std::vector<int> end;

  int at_begin(int i, int j) const { return begin[std::size_t(i) * n + j]; }
  int at_end(int i, int j) const { return end[std::size_t(i) * n + j]; }
};

struct RegionEncoding {
  BoundaryLabels labels;
  std::vector<GoldRegion> regions;
};

RegionEncoding encode_region_labels(const LabeledSentence& ls);

/// Drops INVALID regions, dedups and sorts by (a,b,c,d).
std::vector<Triplet> decode_regions(const std::vector<GoldRegion>& regions);

enum class CellLabel : int { None = 0, A = 1, O = 2, Pos = 3, Neu = 4, Neg = 5 };

inline constexpr int kNumCellLabels = 6;

CellLabel cell_label(Polarity p);

struct CellTable {
  int n = 0;
  std::vector<CellLabel> cells;

  CellTable() = default;
  explicit CellTable(int size) : n(size), cells(std::size_t(size) * size, CellLabel::None) {}
  CellLabel& at(int i, int j) { return cells[std::size_t(i) * n + j]; }
  CellLabel at(int i, int j) const { return cells[std::size_t(i) * n + j]; }
};

class EncodingConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws EncodingConflict when a token is inside both an aspect and an
/// opinion span.
CellTable encode_cell_labels(const LabeledSentence& ls);

/// Diagonal A/O runs give spans; the majority sentiment of each crossing
/// (NONE ignored, ties dropped) gives the polarity.
std::vector<Triplet> decode_cell_table(const CellTable& table);

}  // namespace tfmt
