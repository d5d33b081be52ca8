#pragma once

// Levenshtein alignment between a hypothesis and a reference class sequence,
// with a canonical backtrace and AR/CR rates.
//
// Operations are named from the reference's point of view: Insert is an extra
// hypothesis symbol, Delete a reference symbol missing from the hypothesis.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "folio/error.hpp"

namespace folio {

enum class EditOp : std::uint8_t { Equal, Substitute, Insert, Delete };

inline char op_letter(EditOp op) {
  switch (op) {
    case EditOp::Equal: return 'E';
    case EditOp::Substitute: return 'S';
    case EditOp::Insert: return 'I';
    case EditOp::Delete: return 'D';
  }
  return '?';
}

struct EditCounts {
  long ie = 0;
  long de = 0;
  long se = 0;

  long errors() const { return ie + de + se; }
  EditCounts& operator+=(const EditCounts& o) {
    ie += o.ie;
    de += o.de;
    se += o.se;
    return *this;
  }
  friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

struct EditScript {
  std::vector<EditOp> ops;  // forward order

  EditCounts counts() const {
    EditCounts c;
    for (EditOp op : ops) {
      if (op == EditOp::Insert) ++c.ie;
      if (op == EditOp::Delete) ++c.de;
      if (op == EditOp::Substitute) ++c.se;
    }
    return c;
  }

  /// States attached to hypothesis symbols, one per symbol (Delete dropped).
  std::vector<EditOp> hyp_states() const {
    std::vector<EditOp> out;
    for (EditOp op : ops)
      if (op != EditOp::Delete) out.push_back(op);
    return out;
  }
};

/// Minimum-cost script from `ref` to `hyp` with unit costs. Among equal-cost
/// scripts the backtrace, walking from the end, prefers a diagonal move
/// (Equal/Substitute), then Delete, then Insert.
inline EditScript edit_script(std::span<const int> hyp, std::span<const int> ref) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<long> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> long& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = long(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = long(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});

  EditScript s;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1])) {
      s.ops.push_back(ref[i - 1] == hyp[j - 1] ? EditOp::Equal : EditOp::Substitute);
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      s.ops.push_back(EditOp::Delete);
      --i;
    } else {
      s.ops.push_back(EditOp::Insert);
      --j;
    }
  }
  std::reverse(s.ops.begin(), s.ops.end());
  return s;
}

inline EditCounts edit_counts(std::span<const int> hyp, std::span<const int> ref) {
  return edit_script(hyp, ref).counts();
}

/// Accurate rate (|ref| - Ie - De - Se) / |ref|. Negative when insertions
/// outnumber correct symbols.
inline double ar(std::span<const int> hyp, std::span<const int> ref) {
  if (ref.empty()) throw DomainError("ar: empty reference");
  const EditCounts c = edit_counts(hyp, ref);
  return double(long(ref.size()) - c.errors()) / double(ref.size());
}

/// Correct rate (|ref| - De - Se) / |ref|.
inline double cr(std::span<const int> hyp, std::span<const int> ref) {
  if (ref.empty()) throw DomainError("cr: empty reference");
  const EditCounts c = edit_counts(hyp, ref);
  return double(long(ref.size()) - c.de - c.se) / double(ref.size());
}

/// AR as an exact fraction, for tie-stable comparisons.
struct Rate {
  long num = 0;
  long den = 1;

  double value() const { return double(num) / double(den); }
  friend bool operator<(const Rate& a, const Rate& b) { return a.num * b.den < b.num * a.den; }
  friend bool operator==(const Rate& a, const Rate& b) { return a.num * b.den == b.num * a.den; }
};

inline Rate ar_rate(std::span<const int> hyp, std::span<const int> ref) {
  if (ref.empty()) throw DomainError("ar: empty reference");
  return {long(ref.size()) - edit_counts(hyp, ref).errors(), long(ref.size())};
}

}  // namespace folio
