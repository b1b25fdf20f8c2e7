#include "camadapt/config.hpp"

#include <algorithm>
#include <cmath>

#include "camadapt/error.hpp"
#include "io_util.hpp"

namespace camadapt {

using nlohmann::json;

namespace {

[[noreturn]] void bad_value(std::string_view key, const std::string& what) {
    throw ConfigError("config key '" + std::string(key) + "': " + what);
}

double as_real(std::string_view key, const json& v) {
    if (!v.is_number()) bad_value(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) bad_value(key, "must be finite");
    return d;
}

std::uint64_t as_count(std::string_view key, const json& v) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        bad_value(key, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

bool as_bool(std::string_view key, const json& v) {
    if (!v.is_boolean()) bad_value(key, "expected true or false");
    return v.get<bool>();
}

std::string as_string(std::string_view key, const json& v) {
    if (!v.is_string()) bad_value(key, "expected a string");
    return v.get<std::string>();
}

Binarization as_binarization(std::string_view key, const json& v) {
    if (v.is_string() && v.get<std::string>() == "adaptive") return Binarization::adaptive();
    if (v.is_number()) {
        const double t = v.get<double>();
        if (!(t >= 0.0 && t <= 1.0)) bad_value(key, "threshold must lie in [0, 1]");
        return Binarization::fixed(t);
    }
    bad_value(key, "expected \"adaptive\" or a number in [0, 1]");
}

json binarization_json(const Binarization& b) {
    return b.kind == Binarization::Kind::adaptive ? json("adaptive") : json(b.threshold);
}

void flatten(const json& node, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
    for (const auto& [k, v] : node.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) {
            flatten(v, key, out);
        } else {
            out.emplace_back(key, v);
        }
    }
}

}  // namespace

std::string_view to_string(InitMode m) { return m == InitMode::lai ? "lai" : "standard"; }
std::string_view to_string(TtaWeighting w) { return w == TtaWeighting::tempered ? "tempered" : "raw"; }
std::string_view to_string(Gating g) { return g == Gating::class_aware ? "class_aware" : "none"; }

void RunConfig::set(std::string_view key, const json& v) {
    if (key == "seed" || key == "init.seed") {
        seed = as_count(key, v);
    } else if (key == "init.mode") {
        const std::string s = as_string(key, v);
        if (s == "lai") {
            init_mode = InitMode::lai;
        } else if (s == "standard") {
            init_mode = InitMode::standard;
        } else {
            bad_value(key, "expected \"lai\" or \"standard\"");
        }
    } else if (key == "init.rank") {
        rank = as_count(key, v);
    } else if (key == "init.sigma_down") {
        init.sigma_down = as_real(key, v);
    } else if (key == "init.sigma_mid") {
        init.sigma_mid = as_real(key, v);
    } else if (key == "init.sigma_up") {
        init.sigma_up = as_real(key, v);
    } else if (key == "init.s_lo") {
        init.s_lo = as_real(key, v);
    } else if (key == "init.s_hi") {
        init.s_hi = as_real(key, v);
    } else if (key == "init.sigma") {
        standard_sigma = as_real(key, v);
    } else if (key == "init.s0") {
        standard_s0 = as_real(key, v);
    } else if (key == "train.lr") {
        train.lr = as_real(key, v);
    } else if (key == "train.momentum") {
        train.momentum = as_real(key, v);
    } else if (key == "train.weight_decay") {
        train.weight_decay = as_real(key, v);
    } else if (key == "train.epochs") {
        train.epochs = as_count(key, v);
    } else if (key == "train.batch_size") {
        train.batch_size = as_count(key, v);
    } else if (key == "train.tau") {
        train.tau = as_real(key, v);
    } else if (key == "train.decay_scale") {
        train.decay_scale = as_bool(key, v);
    } else if (key == "tta.enabled") {
        tta = as_bool(key, v);
    } else if (key == "tta.weighting") {
        const std::string s = as_string(key, v);
        if (s == "tempered") {
            tta_weighting = TtaWeighting::tempered;
        } else if (s == "raw") {
            tta_weighting = TtaWeighting::raw;
        } else {
            bad_value(key, "expected \"tempered\" or \"raw\"");
        }
    } else if (key == "metrics.beta2") {
        metrics.beta2 = as_real(key, v);
    } else if (key == "metrics.fbeta_threshold") {
        metrics.fbeta_bin = as_binarization(key, v);
    } else if (key == "metrics.em_threshold") {
        metrics.em_bin = as_binarization(key, v);
    } else if (key == "metrics.iou_threshold") {
        metrics.iou_bin = as_binarization(key, v);
    } else if (key == "metrics.gating") {
        const std::string s = as_string(key, v);
        if (s == "class_aware") {
            gating = Gating::class_aware;
        } else if (s == "none") {
            gating = Gating::none;
        } else {
            bad_value(key, "expected \"class_aware\" or \"none\"");
        }
    } else {
        throw UsageError("unknown config key '" + std::string(key) + "'");
    }
}

void RunConfig::set_from_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw UsageError("expected key=value, got '" + std::string(assignment) + "'");
    }
    const std::string_view key = assignment.substr(0, eq);
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    set(key, value);
}

void RunConfig::merge_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    std::vector<std::pair<std::string, json>> flat;
    flatten(doc, "", flat);
    for (const auto& [k, v] : flat) set(k, v);
}

void RunConfig::merge_file(const std::string& path) {
    const std::string text = detail::read_text_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": invalid JSON (" + e.what() + ")");
    }
    try {
        merge_json(doc);
    } catch (const UsageError& e) {
        throw UsageError(path + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["init.mode"] = to_string(init_mode);
    j["init.rank"] = rank;
    j["init.sigma_down"] = init.sigma_down;
    j["init.sigma_mid"] = init.sigma_mid;
    j["init.sigma_up"] = init.sigma_up;
    j["init.s_lo"] = init.s_lo;
    j["init.s_hi"] = init.s_hi;
    j["init.sigma"] = standard_sigma;
    j["init.s0"] = standard_s0;
    j["train.lr"] = train.lr;
    j["train.momentum"] = train.momentum;
    j["train.weight_decay"] = train.weight_decay;
    j["train.epochs"] = train.epochs;
    j["train.batch_size"] = train.batch_size;
    j["train.tau"] = train.tau;
    j["train.decay_scale"] = train.decay_scale;
    j["tta.enabled"] = tta;
    j["tta.weighting"] = to_string(tta_weighting);
    j["metrics.beta2"] = metrics.beta2;
    j["metrics.fbeta_threshold"] = binarization_json(metrics.fbeta_bin);
    j["metrics.em_threshold"] = binarization_json(metrics.em_bin);
    j["metrics.iou_threshold"] = binarization_json(metrics.iou_bin);
    j["metrics.gating"] = to_string(gating);
    return j;
}

void RunConfig::validate() const {
    init.validate();
    train.validate();
    if (standard_sigma < 0.0) throw ConfigError("init.sigma must be >= 0");
    if (standard_s0 < 0.0) throw ConfigError("init.s0 must be >= 0");
    if (!(metrics.beta2 > 0.0)) throw ConfigError("metrics.beta2 must be > 0");
}

std::size_t RunConfig::effective_rank(std::size_t d) const {
    if (rank != 0) return rank;
    return d >= 128 ? 64 : std::max<std::size_t>(1, d / 4);
}

AdapterParams RunConfig::initial_params(std::size_t d) const {
    const std::size_t r = effective_rank(d);
    if (init_mode == InitMode::lai) {
        InitConfig c = init;
        c.seed = seed;
        return lai_init(d, r, c);
    }
    const double sigma = standard_sigma > 0.0 ? standard_sigma : matched_standard_sigma(init);
    return standard_init(d, r, sigma, standard_s0, seed);
}

RunConfig RunConfig::desk_scale() {
    RunConfig c;
    c.init = InitConfig::desk_scale();
    c.rank = 8;
    return c;
}

}  // namespace camadapt
