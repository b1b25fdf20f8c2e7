#include "camadapt/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include <nlohmann/json.hpp>

#include "camadapt/classification.hpp"
#include "camadapt/dataio.hpp"
#include "camadapt/error.hpp"
#include "io_util.hpp"

namespace camadapt {

namespace {

double normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

std::string class_name(std::size_t c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%02zu", c);
    return buf;
}

std::string record_id(const char* split, std::size_t c, std::size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s-%02zu-%03zu", split, c, i);
    return buf;
}

std::vector<Vec> orthonormal_directions(Rng& rng, std::size_t count, std::size_t dim) {
    std::vector<Vec> out;
    while (out.size() < count) {
        Vec v = gaussian_sample(rng, 0.0, 1.0, dim);
        for (const Vec& e : out) {
            const double proj = dot(v, e);
            for (std::size_t k = 0; k < dim; ++k) v[k] -= proj * e[k];
        }
        // A draw this close to the current span is resampled.
        if (norm2(v) < 1e-6) continue;
        out.push_back(normalized(v));
    }
    return out;
}

Vec noisy(const Vec& base, Rng& rng, double noise) {
    Vec v = base;
    for (double& x : v) x += noise * rng.next_gaussian();
    return v;
}

}  // namespace

void SynthConfig::validate() const {
    if (classes < 2) throw ConfigError("synth: classes must be >= 2");
    if (dim < classes) {
        throw ConfigError("synth: dim (" + std::to_string(dim) + ") must be >= classes (" + std::to_string(classes) +
                          ")");
    }
    if (train_per_class == 0 || test_per_class == 0) throw ConfigError("synth: per-class counts must be >= 1");
    if (test_views == 0) throw ConfigError("synth: test_views must be >= 1");
    if (!(mixing >= 0.0 && mixing <= 1.0)) throw ConfigError("synth: mixing must lie in [0, 1]");
    if (classes == 2 && mixing >= 1.0) throw ConfigError("synth: mixing must be < 1 with two classes");
    if (noise && !(*noise >= 0.0 && std::isfinite(*noise))) throw ConfigError("synth: noise must be >= 0");
    if (!noise && !(target_ideal_accuracy > 1.0 / static_cast<double>(classes) && target_ideal_accuracy < 1.0)) {
        throw ConfigError("synth: target accuracy must lie in (1/classes, 1)");
    }
    if (!(view_jitter >= 0.0 && std::isfinite(view_jitter))) throw ConfigError("synth: view_jitter must be >= 0");
}

double closed_form_ideal_accuracy(std::size_t classes, double noise) {
    if (classes < 1) throw DomainError("closed_form_ideal_accuracy: classes must be >= 1");
    if (noise < 0.0) throw DomainError("closed_form_ideal_accuracy: noise must be >= 0");
    if (noise == 0.0 || classes == 1) return 1.0;
    const double shift = 1.0 / noise;
    const double k = static_cast<double>(classes - 1);
    // Composite Simpson on [-12, 12]; the tails carry < 1e-30 of the mass.
    constexpr int n = 4000;
    constexpr double lo = -12.0, hi = 12.0;
    const double h = (hi - lo) / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double u = lo + h * i;
        const double f = normal_pdf(u) * std::pow(normal_cdf(u + shift), k);
        sum += f * (i == 0 || i == n ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0));
    }
    return sum * h / 3.0;
}

double calibrate_noise(std::size_t classes, double target) {
    if (!(target > 1.0 / static_cast<double>(classes) && target < 1.0)) {
        throw DomainError("calibrate_noise: target must lie in (1/classes, 1)");
    }
    double lo = 1e-4, hi = 100.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (closed_form_ideal_accuracy(classes, mid) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

AdapterParams synth_ideal_adapter(const SynthDataset& ds, std::size_t r) {
    const std::size_t c_count = ds.directions.size();
    const std::size_t d = ds.info.dim;
    if (r < c_count || r > d) throw ShapeError("synth_ideal_adapter: need classes <= r <= dim");
    const double beta = ds.info.mixing;
    const double kappa = c_count == 2 ? 1.0 - beta * beta : 1.0;
    const double s = 1.0;

    AdapterParams p = AdapterParams::zeros(d, r, s);
    for (std::size_t j = 0; j < c_count; ++j) {
        const Vec& ej = ds.directions[j];
        const Vec& eprev = ds.directions[(j + c_count - 1) % c_count];
        const Vec& enext = ds.directions[(j + 1) % c_count];
        for (std::size_t k = 0; k < d; ++k) {
            p.w_down(j, k) = ej[k] - beta * eprev[k];
            p.w_up(k, j) = -(beta / (s * kappa)) * enext[k];
        }
        p.w_mid(j, j) = 1.0;
    }
    return p;
}

SynthDataset synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    const double noise = cfg.noise ? *cfg.noise : calibrate_noise(cfg.classes, cfg.target_ideal_accuracy);
    Rng rng = Rng::stream(cfg.seed, "synth");

    SynthDataset ds;
    ds.directions = orthonormal_directions(rng, cfg.classes, cfg.dim);

    std::vector<PromptEntry> entries;
    for (std::size_t c = 0; c < cfg.classes; ++c) {
        const Vec& e = ds.directions[c];
        const Vec& next = ds.directions[(c + 1) % cfg.classes];
        Vec z(cfg.dim);
        for (std::size_t k = 0; k < cfg.dim; ++k) z[k] = e[k] + cfg.mixing * next[k];
        const std::string name = class_name(c);
        entries.push_back({name, std::move(z), prompt_for_class(name)});
    }
    ds.prompts = PromptTable(std::move(entries));

    for (std::size_t c = 0; c < cfg.classes; ++c) {
        for (std::size_t i = 0; i < cfg.train_per_class; ++i) {
            ds.train.push_back({record_id("train", c, i), class_name(c), Condition::gt_mask, 0,
                                normalized(noisy(ds.directions[c], rng, noise))});
        }
    }

    const std::pair<Condition, double> conditions[] = {
        {Condition::gt_mask, 1.0},
        {Condition::all_black, kAllBlackNoiseScale},
        {Condition::pred_mask, kPredMaskNoiseScale},
    };
    for (std::size_t c = 0; c < cfg.classes; ++c) {
        for (std::size_t i = 0; i < cfg.test_per_class; ++i) {
            const std::string id = record_id("test", c, i);
            for (const auto& [cond, scale] : conditions) {
                const Vec base = noisy(ds.directions[c], rng, noise * scale);
                for (std::size_t v = 0; v < cfg.test_views; ++v) {
                    const Vec x = v == 0 ? base : noisy(base, rng, cfg.view_jitter);
                    ds.test.push_back({id, class_name(c), cond, v, normalized(x)});
                }
            }
        }
    }

    ds.info.classes = cfg.classes;
    ds.info.dim = cfg.dim;
    ds.info.noise = noise;
    ds.info.mixing = cfg.mixing;
    ds.info.seed = cfg.seed;
    ds.info.closed_form_ideal_accuracy = closed_form_ideal_accuracy(cfg.classes, noise);

    const std::vector<ViewSet> sets = make_view_sets(ds.test);
    EvalOptions opts;
    opts.condition = Condition::gt_mask;
    ds.info.baseline_test_accuracy = evaluate_accuracy(AdapterParams::zeros(cfg.dim, 1), ds.prompts, sets, opts).accuracy;
    ds.info.ideal_test_accuracy =
        evaluate_accuracy(synth_ideal_adapter(ds, cfg.classes), ds.prompts, sets, opts).accuracy;
    return ds;
}

std::string format_synth_info(const SynthInfo& info) {
    nlohmann::ordered_json j;
    j["classes"] = info.classes;
    j["dim"] = info.dim;
    j["noise"] = info.noise;
    j["mixing"] = info.mixing;
    j["seed"] = info.seed;
    j["closed_form_ideal_accuracy"] = info.closed_form_ideal_accuracy;
    j["baseline_test_accuracy"] = info.baseline_test_accuracy;
    j["ideal_test_accuracy"] = info.ideal_test_accuracy;
    return j.dump(2) + "\n";
}

SynthInfo parse_synth_info(const std::string& text) {
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        SynthInfo info;
        info.classes = j.at("classes").get<std::size_t>();
        info.dim = j.at("dim").get<std::size_t>();
        info.noise = j.at("noise").get<double>();
        info.mixing = j.at("mixing").get<double>();
        info.seed = j.at("seed").get<std::uint64_t>();
        info.closed_form_ideal_accuracy = j.at("closed_form_ideal_accuracy").get<double>();
        info.baseline_test_accuracy = j.at("baseline_test_accuracy").get<double>();
        info.ideal_test_accuracy = j.at("ideal_test_accuracy").get<double>();
        return info;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("synth sidecar: ") + e.what());
    }
}

void write_synth(const SynthDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
    const fs::path base(dir);
    save_prompts((base / "prompts.jsonl").string(), ds.prompts);
    save_embeddings((base / "train.jsonl").string(), ds.train);
    save_embeddings((base / "test.jsonl").string(), ds.test);
    detail::write_text_file((base / "synth.json").string(), format_synth_info(ds.info));
}

}  // namespace camadapt
