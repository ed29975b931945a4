#include "tfmt/tagging.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <string>

namespace tfmt {

RegionClass region_class(Polarity p) { return static_cast<RegionClass>(int(p)); }

CellLabel cell_label(Polarity p) {
  switch (p) {
    case Polarity::Pos: return CellLabel::Pos;
    case Polarity::Neu: return CellLabel::Neu;
    case Polarity::Neg: return CellLabel::Neg;
  }
  return CellLabel::None;
}

namespace {

void check_bounds(const LabeledSentence& ls) {
  const int n = ls.sentence.size();
  for (const auto& t : ls.triplets) {
    for (const Span& s : {t.aspect, t.opinion}) {
      if (s.start < 0 || s.start > s.end || s.end >= n) {
        throw std::out_of_range("triplet span out of bounds for sentence of length " +
                                std::to_string(n));
      }
    }
  }
}

}  // namespace

RegionEncoding encode_region_labels(const LabeledSentence& ls) {
  check_bounds(ls);
  const int n = ls.sentence.size();
  RegionEncoding enc;
  enc.labels.n = n;
  enc.labels.begin.assign(std::size_t(n) * n, 0);
  enc.labels.end.assign(std::size_t(n) * n, 0);
  for (const auto& t : ls.triplets) {
    const Rect r{t.aspect.start, t.opinion.start, t.aspect.end, t.opinion.end};
    enc.labels.begin[std::size_t(r.a) * n + r.b] = 1;
    enc.labels.end[std::size_t(r.c) * n + r.d] = 1;
    enc.regions.push_back({r, region_class(t.polarity)});
  }
  return enc;
}

std::vector<Triplet> decode_regions(const std::vector<GoldRegion>& regions) {
  std::set<std::pair<Rect, int>> kept;
  for (const auto& g : regions) {
    if (g.cls == RegionClass::Invalid) continue;
    kept.insert({g.rect, int(g.cls)});
  }
  std::vector<Triplet> out;
  out.reserve(kept.size());
  for (const auto& [r, cls] : kept) {
    out.push_back({Span{r.a, r.c}, Span{r.b, r.d}, static_cast<Polarity>(cls)});
  }
  return out;
}

CellTable encode_cell_labels(const LabeledSentence& ls) {
  check_bounds(ls);
  const int n = ls.sentence.size();
  CellTable table(n);
  std::vector<char> is_aspect(n, 0), is_opinion(n, 0);
  for (const auto& t : ls.triplets) {
    for (int i = t.aspect.start; i <= t.aspect.end; ++i) is_aspect[i] = 1;
    for (int j = t.opinion.start; j <= t.opinion.end; ++j) is_opinion[j] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (is_aspect[i] && is_opinion[i]) {
      throw EncodingConflict("token " + std::to_string(i) + " is both aspect and opinion");
    }
    if (is_aspect[i]) table.at(i, i) = CellLabel::A;
    if (is_opinion[i]) table.at(i, i) = CellLabel::O;
  }
  for (const auto& t : ls.triplets) {
    for (int i = t.aspect.start; i <= t.aspect.end; ++i) {
      for (int j = t.opinion.start; j <= t.opinion.end; ++j) {
        table.at(i, j) = cell_label(t.polarity);
      }
    }
  }
  return table;
}

namespace {

std::vector<Span> diagonal_runs(const CellTable& table, CellLabel label) {
  std::vector<Span> runs;
  for (int i = 0; i < table.n;) {
    if (table.at(i, i) != label) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < table.n && table.at(j + 1, j + 1) == label) ++j;
    runs.push_back({i, j});
    i = j + 1;
  }
  return runs;
}

}  // namespace

std::vector<Triplet> decode_cell_table(const CellTable& table) {
  std::vector<Triplet> out;
  for (const Span& a : diagonal_runs(table, CellLabel::A)) {
    for (const Span& o : diagonal_runs(table, CellLabel::O)) {
      std::array<int, kNumPolarities> votes{};
      for (int i = a.start; i <= a.end; ++i) {
        for (int j = o.start; j <= o.end; ++j) {
          switch (table.at(i, j)) {
            case CellLabel::Pos: ++votes[0]; break;
            case CellLabel::Neu: ++votes[1]; break;
            case CellLabel::Neg: ++votes[2]; break;
            default: break;
          }
        }
      }
      const int best = int(std::max_element(votes.begin(), votes.end()) - votes.begin());
      if (votes[best] == 0) continue;
      if (std::count(votes.begin(), votes.end(), votes[best]) > 1) continue;
      out.push_back({a, o, static_cast<Polarity>(best)});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tfmt
