#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "camadapt/numerics.hpp"

namespace camadapt {

/// Which mask guided the visual embedding of a record.
enum class Condition { gt_mask, all_black, pred_mask };

std::string_view to_string(Condition c);
/// nullopt for anything outside the closed vocabulary.
std::optional<Condition> parse_condition(std::string_view tag);

/// Per-class frozen text feature (pre-adapter, end-of-sequence token).
struct PromptEntry {
    std::string name;
    Vec feature;
    std::string prompt;  // optional template text, empty when absent

    friend bool operator==(const PromptEntry&, const PromptEntry&) = default;
};

/// Ordered table of class prompt features. Names are unique and every
/// feature has the same length.
class PromptTable {
public:
    PromptTable() = default;
    /// Throws DataError on duplicate names, ShapeError on mixed dimensions.
    explicit PromptTable(std::vector<PromptEntry> entries);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t dim() const { return entries_.empty() ? 0 : entries_.front().feature.size(); }

    const PromptEntry& operator[](std::size_t i) const { return entries_[i]; }
    const std::vector<PromptEntry>& entries() const { return entries_; }

    std::optional<std::size_t> index_of(std::string_view name) const;

    friend bool operator==(const PromptTable&, const PromptTable&) = default;

private:
    std::vector<PromptEntry> entries_;
};

/// One frozen image embedding under one mask condition and one view.
struct EmbeddingRecord {
    std::string id;
    std::string class_name;
    Condition condition = Condition::gt_mask;
    std::size_t view = 0;  // 0 = canonical
    Vec embedding;

    friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// All views of one (id, condition) pair, view 0 first.
struct ViewSet {
    std::string id;
    Condition condition = Condition::gt_mask;
    std::string class_name;
    std::vector<Vec> views;
};

}  // namespace camadapt
