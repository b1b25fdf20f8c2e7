#include "camadapt/dataio.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "camadapt/error.hpp"
#include "io_util.hpp"

namespace camadapt {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string at_line(const std::string& source, std::size_t line) {
    return source + ":" + std::to_string(line);
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line, line_no);
        pos = end + 1;
    }
}

json parse_line(std::string_view line, const std::string& where) {
    try {
        json j = json::parse(line);
        if (!j.is_object()) throw FormatError(where + ": expected a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw FormatError(where + ": invalid JSON (" + e.what() + ")");
    }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (!allowed.contains(key)) throw FormatError(where + ": field '" + key + "': unknown field");
    }
}

std::string require_string(const json& j, const char* field, const std::string& where) {
    if (!j.contains(field)) throw FormatError(where + ": field '" + field + "': missing");
    const json& v = j.at(field);
    if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
        throw FormatError(where + ": field '" + field + "': must be a non-empty string");
    }
    return v.get<std::string>();
}

Vec require_vector(const json& j, const char* field, const std::string& where) {
    if (!j.contains(field)) throw FormatError(where + ": field '" + field + "': missing");
    const json& v = j.at(field);
    if (!v.is_array() || v.empty()) throw FormatError(where + ": field '" + field + "': must be a non-empty array");
    Vec out;
    out.reserve(v.size());
    for (const json& x : v) {
        if (!x.is_number()) throw FormatError(where + ": field '" + field + "': non-numeric entry");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw FormatError(where + ": field '" + field + "': non-finite entry");
        out.push_back(d);
    }
    return out;
}

ordered_json vector_json(const Vec& v) {
    ordered_json arr = ordered_json::array();
    for (double x : v) arr.push_back(x);
    return arr;
}

std::string resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    if (path.is_relative()) path = base / path;
    return path.lexically_normal().string();
}

}  // namespace

std::string prompt_for_class(std::string_view class_name) {
    return "A photo of the camouflaged " + std::string(class_name);
}

std::vector<EmbeddingRecord> parse_embeddings(std::string_view text, const std::string& source) {
    static const std::set<std::string> fields = {"id", "class", "condition", "view", "embedding"};
    std::vector<EmbeddingRecord> out;
    std::set<std::tuple<std::string, Condition, std::size_t>> keys;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        const std::string where = at_line(source, line_no);
        const json j = parse_line(line, where);
        reject_unknown(j, fields, where);

        EmbeddingRecord r;
        r.id = require_string(j, "id", where);
        r.class_name = require_string(j, "class", where);
        const std::string tag = require_string(j, "condition", where);
        const auto cond = parse_condition(tag);
        if (!cond) throw FormatError(where + ": field 'condition': unknown condition '" + tag + "'");
        r.condition = *cond;
        if (!j.contains("view") || !j.at("view").is_number_unsigned()) {
            throw FormatError(where + ": field 'view': must be a non-negative integer");
        }
        r.view = j.at("view").get<std::size_t>();
        r.embedding = require_vector(j, "embedding", where);

        if (!out.empty() && r.embedding.size() != out.front().embedding.size()) {
            throw DataError(where + ": embedding dimension " + std::to_string(r.embedding.size()) +
                            " differs from " + std::to_string(out.front().embedding.size()) + " on earlier lines");
        }
        const double n = norm2(r.embedding);
        if (std::abs(n - 1.0) > kEmbeddingNormTolerance) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f", n);
            throw DataError(where + ": record '" + r.id + "' has norm " + buf + ", expected 1 within 1e-3");
        }
        if (!keys.emplace(r.id, r.condition, r.view).second) {
            throw DataError(where + ": duplicate (id, condition, view) for record '" + r.id + "'");
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<EmbeddingRecord> load_embeddings(const std::string& path) {
    return parse_embeddings(detail::read_text_file(path), path);
}

std::string format_embeddings(std::span<const EmbeddingRecord> records) {
    std::string out;
    for (const auto& r : records) {
        ordered_json j;
        j["id"] = r.id;
        j["class"] = r.class_name;
        j["condition"] = std::string(to_string(r.condition));
        j["view"] = r.view;
        j["embedding"] = vector_json(r.embedding);
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_embeddings(const std::string& path, std::span<const EmbeddingRecord> records) {
    detail::write_text_file(path, format_embeddings(records));
}

PromptTable parse_prompts(std::string_view text, const std::string& source) {
    static const std::set<std::string> fields = {"class", "feature", "prompt"};
    std::vector<PromptEntry> entries;
    std::set<std::string> names;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        const std::string where = at_line(source, line_no);
        const json j = parse_line(line, where);
        reject_unknown(j, fields, where);
        PromptEntry e;
        e.name = require_string(j, "class", where);
        e.feature = require_vector(j, "feature", where);
        if (j.contains("prompt")) e.prompt = require_string(j, "prompt", where);
        if (!names.insert(e.name).second) throw DataError(where + ": duplicate class '" + e.name + "'");
        if (!entries.empty() && e.feature.size() != entries.front().feature.size()) {
            throw DataError(where + ": feature dimension " + std::to_string(e.feature.size()) + " differs from " +
                            std::to_string(entries.front().feature.size()));
        }
        entries.push_back(std::move(e));
    });
    return PromptTable(std::move(entries));
}

PromptTable load_prompts(const std::string& path) { return parse_prompts(detail::read_text_file(path), path); }

std::string format_prompts(const PromptTable& table) {
    std::string out;
    for (const auto& e : table.entries()) {
        ordered_json j;
        j["class"] = e.name;
        if (!e.prompt.empty()) j["prompt"] = e.prompt;
        j["feature"] = vector_json(e.feature);
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_prompts(const std::string& path, const PromptTable& table) {
    detail::write_text_file(path, format_prompts(table));
}

MaskGrid parse_pgm(std::string_view bytes, const std::string& source) {
    std::size_t pos = 0;
    auto fail = [&](const std::string& what) -> FormatError { return FormatError(source + ": " + what); };
    auto skip_space_and_comments = [&] {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_uint = [&](const char* what) {
        skip_space_and_comments();
        std::size_t start = pos;
        std::size_t value = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
            if (value > (1u << 24)) throw fail(std::string("PGM ") + what + " is too large");
            ++pos;
        }
        if (pos == start) throw fail(std::string("PGM header: missing ") + what);
        return value;
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw fail("not a binary PGM (P5) file");
    pos = 2;
    const std::size_t width = read_uint("width");
    const std::size_t height = read_uint("height");
    const std::size_t maxval = read_uint("maxval");
    if (width == 0 || height == 0) throw fail("PGM dimensions must be >= 1");
    if (maxval != 255) throw fail("PGM maxval must be 255, got " + std::to_string(maxval));
    if (pos >= bytes.size() || !(bytes[pos] == ' ' || bytes[pos] == '\t' || bytes[pos] == '\n' || bytes[pos] == '\r')) {
        throw fail("PGM header must end with a single whitespace byte");
    }
    ++pos;
    const std::size_t n = width * height;
    if (bytes.size() - pos < n) {
        throw fail("PGM payload truncated: expected " + std::to_string(n) + " bytes, got " +
                   std::to_string(bytes.size() - pos));
    }
    if (bytes.size() - pos > n) throw fail("PGM has trailing bytes after the payload");

    MaskGrid m(height, width);
    for (std::size_t i = 0; i < n; ++i) {
        m.values[i] = static_cast<double>(static_cast<unsigned char>(bytes[pos + i])) / 255.0;
    }
    return m;
}

MaskGrid load_mask_pgm(const std::string& path) { return parse_pgm(detail::read_text_file(path), path); }

MaskGrid load_gt_mask_pgm(const std::string& path) {
    MaskGrid m = load_mask_pgm(path);
    // v/255 >= 128/255 exactly when the byte is >= 128.
    for (double& v : m.values) v = std::lround(v * 255.0) >= 128 ? 1.0 : 0.0;
    return m;
}

std::string encode_pgm(const MaskGrid& mask) {
    if (mask.height == 0 || mask.width == 0 || mask.values.size() != mask.height * mask.width) {
        throw ShapeError("cannot encode an empty or inconsistent mask");
    }
    std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
    out.reserve(out.size() + mask.values.size());
    for (double v : mask.values) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("mask values must lie in [0, 1]");
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    return out;
}

void save_mask_pgm(const std::string& path, const MaskGrid& mask) { detail::write_text_file(path, encode_pgm(mask)); }

Manifest load_manifest(const std::string& path) {
    const std::string text = detail::read_text_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": invalid JSON (" + e.what() + ")");
    }
    if (!doc.is_object()) throw FormatError(path + ": manifest must be a JSON object");
    reject_unknown(doc, {"version", "entries"}, path);
    if (!doc.contains("version") || doc.at("version") != kManifestVersion) {
        throw FormatError(path + ": field 'version': expected '" + std::string(kManifestVersion) + "'");
    }
    if (!doc.contains("entries") || !doc.at("entries").is_array()) {
        throw FormatError(path + ": field 'entries': must be an array");
    }
    const fs::path base = fs::path(path).parent_path();
    static const std::set<std::string> fields = {"id", "pred_mask_path", "gt_mask_path", "pred_class", "true_class"};
    Manifest m;
    std::set<std::string> ids;
    const json& entries = doc.at("entries");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string where = path + ": entries[" + std::to_string(i) + "]";
        const json& e = entries[i];
        if (!e.is_object()) throw FormatError(where + ": must be an object");
        reject_unknown(e, fields, where);
        ManifestEntry me;
        me.id = require_string(e, "id", where);
        me.pred_mask_path = resolve(base, require_string(e, "pred_mask_path", where));
        me.gt_mask_path = resolve(base, require_string(e, "gt_mask_path", where));
        me.pred_class = require_string(e, "pred_class", where);
        me.true_class = require_string(e, "true_class", where);
        if (!ids.insert(me.id).second) throw DataError(where + ": duplicate id '" + me.id + "'");
        for (const std::string* p : {&me.pred_mask_path, &me.gt_mask_path}) {
            if (!fs::is_regular_file(*p)) throw IoError(where + ": mask file not found: " + *p);
        }
        m.entries.push_back(std::move(me));
    }
    return m;
}

void save_manifest(const std::string& path, const Manifest& manifest) {
    ordered_json doc;
    doc["version"] = kManifestVersion;
    doc["entries"] = ordered_json::array();
    for (const auto& e : manifest.entries) {
        ordered_json j;
        j["id"] = e.id;
        j["pred_mask_path"] = e.pred_mask_path;
        j["gt_mask_path"] = e.gt_mask_path;
        j["pred_class"] = e.pred_class;
        j["true_class"] = e.true_class;
        doc["entries"].push_back(std::move(j));
    }
    detail::write_text_file(path, doc.dump(2) + "\n");
}

std::vector<EvalPair> load_eval_pairs(const Manifest& manifest) {
    std::vector<EvalPair> pairs;
    pairs.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        pairs.push_back({e.id, load_mask_pgm(e.pred_mask_path), load_gt_mask_pgm(e.gt_mask_path), e.pred_class,
                         e.true_class});
    }
    return pairs;
}

std::string file_digest(const std::string& path) {
    const std::string bytes = detail::read_text_file(path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace camadapt
