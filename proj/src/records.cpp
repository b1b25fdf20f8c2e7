#include "camadapt/records.hpp"

#include <set>

#include "camadapt/error.hpp"

namespace camadapt {

std::string_view to_string(Condition c) {
    switch (c) {
        case Condition::gt_mask: return "gt_mask";
        case Condition::all_black: return "all_black";
        case Condition::pred_mask: return "pred_mask";
    }
    return "unknown";
}

std::optional<Condition> parse_condition(std::string_view tag) {
    if (tag == "gt_mask") return Condition::gt_mask;
    if (tag == "all_black") return Condition::all_black;
    if (tag == "pred_mask") return Condition::pred_mask;
    return std::nullopt;
}

PromptTable::PromptTable(std::vector<PromptEntry> entries) : entries_(std::move(entries)) {
    std::set<std::string_view> seen;
    for (const auto& e : entries_) {
        if (!seen.insert(e.name).second) throw DataError("duplicate class '" + e.name + "' in prompt table");
        if (e.feature.empty()) throw ShapeError("class '" + e.name + "' has an empty feature");
        if (e.feature.size() != entries_.front().feature.size()) {
            throw ShapeError("class '" + e.name + "' has feature length " + std::to_string(e.feature.size()) +
                             ", expected " + std::to_string(entries_.front().feature.size()));
        }
    }
}

std::optional<std::size_t> PromptTable::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name == name) return i;
    }
    return std::nullopt;
}

}  // namespace camadapt
