#pragma once

// Per-character pseudo-labels, keyed by page and annotated (line, position).

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "folio/error.hpp"
#include "folio/geometry.hpp"
#include "folio/page.hpp"

namespace folio {

struct PseudoLabel {
  Box box;
  double gamma = 0;  // confidence of the stored box
  int count = 0;     // observations folded in so far

  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

/// Slots of one page, shaped like its annotation: slots[q][n].
struct PageLabels {
  std::vector<std::vector<std::optional<PseudoLabel>>> slots;

  static PageLabels for_annotation(const PageAnnotation& a) {
    PageLabels p;
    for (const auto& line : a.lines) p.slots.emplace_back(line.size());
    return p;
  }

  const std::optional<PseudoLabel>& at(std::size_t q, std::size_t n) const {
    if (q >= slots.size() || n >= slots[q].size())
      throw DomainError("pseudo-label index (" + std::to_string(q) + ", " + std::to_string(n) +
                        ") outside the annotation");
    return slots[q][n];
  }
  std::optional<PseudoLabel>& at(std::size_t q, std::size_t n) {
    return const_cast<std::optional<PseudoLabel>&>(std::as_const(*this).at(q, n));
  }

  std::size_t n_slots() const {
    std::size_t n = 0;
    for (const auto& l : slots) n += l.size();
    return n;
  }
  std::size_t n_labeled() const {
    std::size_t n = 0;
    for (const auto& l : slots)
      for (const auto& s : l) n += s.has_value();
    return n;
  }

  friend bool operator==(const PageLabels&, const PageLabels&) = default;
};

/// All pages' pseudo-labels. A const store may be read from many threads at
/// once; mutation needs exclusive access.
class PseudoLabelStore {
 public:
  PageLabels& page(const std::string& page_id) {
    auto it = pages_.find(page_id);
    if (it == pages_.end()) throw ConfigError("pseudo-label store has no page '" + page_id + "'");
    return it->second;
  }
  const PageLabels& page(const std::string& page_id) const {
    auto it = pages_.find(page_id);
    if (it == pages_.end()) throw ConfigError("pseudo-label store has no page '" + page_id + "'");
    return it->second;
  }
  bool has_page(const std::string& page_id) const { return pages_.count(page_id) > 0; }

  /// Adds empty slots for `a` unless the page is already present, in which
  /// case its shape must agree.
  PageLabels& ensure_page(const PageAnnotation& a) {
    auto [it, inserted] = pages_.try_emplace(a.page_id, PageLabels::for_annotation(a));
    if (!inserted) {
      const auto& slots = it->second.slots;
      bool same = slots.size() == a.lines.size();
      for (std::size_t q = 0; same && q < slots.size(); ++q)
        same = slots[q].size() == a.lines[q].size();
      if (!same)
        throw ConfigError("pseudo-label store page '" + a.page_id +
                          "' does not match its annotation");
    }
    return it->second;
  }

  const std::map<std::string, PageLabels>& pages() const { return pages_; }
  std::map<std::string, PageLabels>& pages() { return pages_; }

  friend bool operator==(const PseudoLabelStore&, const PseudoLabelStore&) = default;

 private:
  std::map<std::string, PageLabels> pages_;
};

}  // namespace folio
