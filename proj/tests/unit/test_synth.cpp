#include <doctest.h>

#include <cmath>

#include "camadapt/classification.hpp"
#include "camadapt/dataio.hpp"
#include "camadapt/error.hpp"
#include "camadapt/synth.hpp"
#include "temp_dir.hpp"

using namespace camadapt;

TEST_CASE("synth config validation") {
    SynthConfig sc;
    sc.dim = 3;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc = {};
    sc.classes = 1;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc = {};
    sc.mixing = 1.5;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc = {};
    sc.target_ideal_accuracy = 0.1;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
}

TEST_CASE("closed-form ideal accuracy and calibration") {
    CHECK(closed_form_ideal_accuracy(5, 0.0) == 1.0);
    CHECK(closed_form_ideal_accuracy(5, 1e6) == doctest::Approx(0.2).epsilon(1e-3));
    // Two classes: P(u + 1/noise > v) = Phi(1 / (noise * sqrt 2)).
    const double noise = 0.8;
    const double phi = 0.5 * std::erfc(-1.0 / (noise * std::sqrt(2.0)) / std::sqrt(2.0));
    CHECK(closed_form_ideal_accuracy(2, noise) == doctest::Approx(phi).epsilon(1e-6));
    CHECK(closed_form_ideal_accuracy(5, 0.3) > closed_form_ideal_accuracy(5, 0.4));
    const double n = calibrate_noise(5, 0.9);
    CHECK(closed_form_ideal_accuracy(5, n) == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("noise-free synthetic data is perfectly separable") {
    SynthConfig sc;
    sc.noise = 0.0;
    sc.test_views = 1;
    const SynthDataset ds = synth_generate(sc);
    CHECK(ds.info.closed_form_ideal_accuracy == 1.0);
    CHECK(ds.info.ideal_test_accuracy == 1.0);
    EvalOptions opts;
    opts.condition = Condition::gt_mask;
    CHECK(evaluate_accuracy(synth_ideal_adapter(ds, 8), ds.prompts, make_view_sets(ds.test), opts).accuracy == 1.0);
}

TEST_CASE("synthetic dataset shape") {
    SynthConfig sc;
    const SynthDataset ds = synth_generate(sc);
    CHECK(ds.prompts.size() == sc.classes);
    CHECK(ds.prompts.dim() == sc.dim);
    CHECK(ds.train.size() == sc.classes * sc.train_per_class);
    for (const auto& r : ds.train) CHECK(std::abs(norm2(r.embedding) - 1.0) < 1e-12);
    CHECK(ds.info.baseline_test_accuracy < ds.info.ideal_test_accuracy);
    CHECK_THROWS_AS(synth_ideal_adapter(ds, 2), ShapeError);
}

TEST_CASE("same seed writes byte-identical files") {
    SynthConfig sc;
    sc.seed = 4;
    TempDir a, b;
    write_synth(synth_generate(sc), a.path().string());
    write_synth(synth_generate(sc), b.path().string());
    for (const char* name : {"prompts.jsonl", "train.jsonl", "test.jsonl", "synth.json"}) {
        CAPTURE(name);
        CHECK(slurp(a.file(name)) == slurp(b.file(name)));
    }
    sc.seed = 5;
    TempDir c;
    write_synth(synth_generate(sc), c.path().string());
    CHECK(slurp(a.file("train.jsonl")) != slurp(c.file("train.jsonl")));

    CHECK(load_embeddings(a.file("train.jsonl")).size() == sc.classes * sc.train_per_class);
    CHECK(load_prompts(a.file("prompts.jsonl")).size() == sc.classes);
}

TEST_CASE("synth info round trip") {
    const SynthInfo info = synth_generate(SynthConfig{}).info;
    const SynthInfo back = parse_synth_info(format_synth_info(info));
    CHECK(back.classes == info.classes);
    CHECK(back.noise == info.noise);
    CHECK(back.baseline_test_accuracy == info.baseline_test_accuracy);
    CHECK(format_synth_info(back) == format_synth_info(info));
}
