#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "camadapt/metrics.hpp"
#include "camadapt/records.hpp"

namespace camadapt {

/// Allowed deviation of an embedding's L2 norm from 1.
inline constexpr double kEmbeddingNormTolerance = 1e-3;

/// Template used to build class prompts.
std::string prompt_for_class(std::string_view class_name);

// --- Embeddings: one JSON object per line ---------------------------------
//   {"id": str, "class": str, "condition": "gt_mask"|"all_black"|"pred_mask",
//    "view": uint, "embedding": [number, ...]}
// Blank lines are ignored. Errors carry "<source>:<line>".

std::vector<EmbeddingRecord> parse_embeddings(std::string_view text, const std::string& source = "<memory>");
std::vector<EmbeddingRecord> load_embeddings(const std::string& path);
std::string format_embeddings(std::span<const EmbeddingRecord> records);
void save_embeddings(const std::string& path, std::span<const EmbeddingRecord> records);

// --- Prompt features: {"class": str, "feature": [number, ...], "prompt"?: str}

PromptTable parse_prompts(std::string_view text, const std::string& source = "<memory>");
PromptTable load_prompts(const std::string& path);
std::string format_prompts(const PromptTable& table);
void save_prompts(const std::string& path, const PromptTable& table);

// --- Masks: binary PGM (P5), 8-bit, maxval 255 ------------------------------

/// Values are v/255.
MaskGrid parse_pgm(std::string_view bytes, const std::string& source = "<memory>");
MaskGrid load_mask_pgm(const std::string& path);
/// Ground-truth variant: bytes >= 128 become 1, everything else 0.
MaskGrid load_gt_mask_pgm(const std::string& path);
/// Values are scaled by 255 and rounded.
std::string encode_pgm(const MaskGrid& mask);
void save_mask_pgm(const std::string& path, const MaskGrid& mask);

// --- Segmentation manifest --------------------------------------------------
//   {"version": "camadapt.manifest/1",
//    "entries": [{"id", "pred_mask_path", "gt_mask_path", "pred_class", "true_class"}, ...]}
// Relative mask paths resolve against the manifest's directory.

inline constexpr const char* kManifestVersion = "camadapt.manifest/1";

struct ManifestEntry {
    std::string id;
    std::string pred_mask_path;  // resolved
    std::string gt_mask_path;    // resolved
    std::string pred_class;
    std::string true_class;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
};

/// Throws IoError when the manifest or any referenced mask is missing,
/// FormatError on schema violations, DataError on duplicate ids.
Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& manifest);

/// Loads every mask pair; gt masks go through load_gt_mask_pgm.
std::vector<EvalPair> load_eval_pairs(const Manifest& manifest);

/// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

}  // namespace camadapt
