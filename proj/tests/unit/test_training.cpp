#include <doctest.h>

#include <cmath>
#include <numeric>

#include "camadapt/error.hpp"
#include "camadapt/init.hpp"
#include "camadapt/synth.hpp"
#include "camadapt/training.hpp"

using namespace camadapt;

namespace {

PromptTable orthogonal_prompts() {
    return PromptTable({{"a", Vec{1, 0, 0, 0}, {}}, {"b", Vec{0, 1, 0, 0}, {}}});
}

std::vector<EmbeddingRecord> tiny_dataset() {
    std::vector<EmbeddingRecord> out;
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const bool a = i % 2 == 0;
        Vec v{a ? 1.0 : 0.2, a ? 0.2 : 1.0, 0.0, 0.0};
        for (double& x : v) x += 0.1 * rng.next_gaussian();
        out.push_back({"r" + std::to_string(i), a ? "a" : "b", Condition::gt_mask, 0, normalized(v)});
    }
    return out;
}

}  // namespace

TEST_CASE("class_logits examples") {
    const PromptTable prompts = orthogonal_prompts();
    const AdapterParams zero = AdapterParams::zeros(4, 2);
    const Vec img{1, 0, 0, 0};
    const Vec logits = class_logits(zero, img, prompts, 0.01);
    CHECK(logits[0] == doctest::Approx(100.0).epsilon(1e-14));
    CHECK(logits[1] == 0.0);

    const Vec halved = class_logits(zero, normalized(Vec{0.3, 0.5, 0.1, 0.2}), prompts, 0.005);
    const Vec full = class_logits(zero, normalized(Vec{0.3, 0.5, 0.1, 0.2}), prompts, 0.01);
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(halved[i] == doctest::Approx(2.0 * full[i]).epsilon(1e-14));

    const PromptTable same({{"x", Vec{1, 1, 0, 0}, {}}, {"y", Vec{1, 1, 0, 0}, {}}, {"z", Vec{1, 1, 0, 0}, {}}});
    const Vec eq = class_logits(zero, normalized(Vec{0.3, 0.5, 0.1, 0.2}), same, 0.01);
    CHECK(eq[0] == eq[1]);
    CHECK(eq[1] == eq[2]);

    CHECK_THROWS_AS(class_logits(AdapterParams::zeros(3, 1), img, prompts, 0.01), ShapeError);
}

TEST_CASE("cross_entropy examples") {
    const CrossEntropy u = cross_entropy(Vec{0, 0}, 0);
    CHECK(u.loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(u.dlogits[0] == doctest::Approx(-0.5));
    CHECK(u.dlogits[1] == doctest::Approx(0.5));

    const CrossEntropy far = cross_entropy(Vec{90, 70}, 0);
    CHECK(far.loss == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
    CHECK(far.loss == doctest::Approx(2.06e-9).epsilon(0.01));

    CHECK_THROWS_AS(cross_entropy(Vec{1, 2}, 2), DomainError);

    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec logits = gaussian_sample(rng, 0.0, 30.0, 2 + rng.next_index(8));
        const CrossEntropy ce = cross_entropy(logits, rng.next_index(logits.size()));
        CHECK(std::abs(std::accumulate(ce.dlogits.begin(), ce.dlogits.end(), 0.0)) < 1e-12);
        CHECK(ce.loss >= 0.0);
    }
}

TEST_CASE("sgd_step examples") {
    TrainConfig cfg;
    cfg.lr = 0.1;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;

    AdapterParams p = AdapterParams::zeros(1, 1, 1.0);
    p.w_down(0, 0) = 1.0;
    AdapterGrads g = AdapterGrads::zeros_like(p);
    g.g_down(0, 0) = 1.0;
    MomentumState m = MomentumState::zeros_like(p);
    sgd_step(p, g, m, cfg);
    CHECK(p.w_down(0, 0) == doctest::Approx(0.9).epsilon(1e-15));

    cfg.momentum = 0.9;
    p.w_down(0, 0) = 1.0;
    m = MomentumState::zeros_like(p);
    sgd_step(p, g, m, cfg);
    CHECK(p.w_down(0, 0) == doctest::Approx(0.9).epsilon(1e-15));
    sgd_step(p, g, m, cfg);
    CHECK(p.w_down(0, 0) == doctest::Approx(0.71).epsilon(1e-15));

    AdapterParams fixed = AdapterParams::zeros(3, 2, 0.4);
    fixed.w_mid(1, 0) = 0.7;
    const AdapterParams before = fixed;
    MomentumState m0 = MomentumState::zeros_like(fixed);
    sgd_step(fixed, AdapterGrads::zeros_like(fixed), m0, cfg);
    CHECK(fixed == before);
}

TEST_CASE("weight decay skips s unless asked") {
    TrainConfig cfg;
    cfg.lr = 0.1;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.5;
    AdapterParams p = AdapterParams::zeros(1, 1, 1.0);
    p.w_up(0, 0) = 1.0;
    MomentumState m = MomentumState::zeros_like(p);
    sgd_step(p, AdapterGrads::zeros_like(p), m, cfg);
    CHECK(p.s == 1.0);
    CHECK(p.w_up(0, 0) == doctest::Approx(0.95).epsilon(1e-15));

    cfg.decay_scale = true;
    m = MomentumState::zeros_like(p);
    sgd_step(p, AdapterGrads::zeros_like(p), m, cfg);
    CHECK(p.s == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("train: zero epochs and zero learning rate return p0") {
    const PromptTable prompts = orthogonal_prompts();
    const auto data = tiny_dataset();
    InitConfig ic;
    ic.seed = 1;
    const AdapterParams p0 = lai_init(4, 2, ic);

    TrainConfig none;
    none.epochs = 0;
    const TrainResult r0 = train(p0, prompts, data, none);
    CHECK(r0.params == p0);
    CHECK(r0.history.empty());

    TrainConfig frozen;
    frozen.lr = 0.0;
    const TrainResult r1 = train(p0, prompts, data, frozen);
    CHECK(r1.params == p0);
    CHECK(r1.history.size() == 10);
}

TEST_CASE("train: deterministic and leaves inputs untouched") {
    const PromptTable prompts = orthogonal_prompts();
    const auto data = tiny_dataset();
    const PromptTable prompts_copy = prompts;
    const auto data_copy = data;
    InitConfig ic;
    ic.seed = 2;
    const AdapterParams p0 = lai_init(4, 2, ic);
    TrainConfig cfg;
    cfg.seed = 9;
    cfg.batch_size = 6;  // 20 records: the final partial batch has 2

    const TrainResult a = train(p0, prompts, data, cfg);
    const TrainResult b = train(p0, prompts, data, cfg);
    CHECK(a.params == b.params);
    CHECK(save_checkpoint(a.params) == save_checkpoint(b.params));
    CHECK(prompts == prompts_copy);
    CHECK(data == data_copy);
    REQUIRE(a.history.size() == 10);
    CHECK(a.history.front().epoch == 1);
}

TEST_CASE("train: unknown class names the record") {
    const PromptTable prompts = orthogonal_prompts();
    auto data = tiny_dataset();
    data[3].class_name = "zebra";
    try {
        train(AdapterParams::zeros(4, 2), prompts, data, TrainConfig{});
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("r3") != std::string::npos);
    }
}

TEST_CASE("train: config validation") {
    TrainConfig cfg;
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("train: synthetic separable set") {
    SynthConfig sc;
    sc.seed = 0;
    const SynthDataset ds = synth_generate(sc);
    InitConfig ic = InitConfig::desk_scale();
    ic.seed = 0;
    TrainConfig cfg;
    const TrainResult res = train(lai_init(sc.dim, 8, ic), ds.prompts, ds.train, cfg);
    REQUIRE(res.history.size() == 10);
    CHECK(res.history.back().train_accuracy >= 0.95);
    CHECK(res.history.front().mean_loss > res.history.back().mean_loss);
}

TEST_CASE("batch gradient matches finite differences") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 6, r = 2;
        AdapterParams p = AdapterParams::zeros(d, r, 0.8);
        for (Mat* m : {&p.w_down, &p.w_mid, &p.w_up}) {
            for (double& v : m->values()) v = rng.next_gaussian();
        }
        std::vector<PromptEntry> entries;
        for (int c = 0; c < 3; ++c) entries.push_back({"c" + std::to_string(c), gaussian_sample(rng, 0.0, 1.0, d), {}});
        const PromptTable prompts(std::move(entries));
        std::vector<Vec> imgs;
        std::vector<LabeledEmbedding> batch;
        for (int b = 0; b < 3; ++b) imgs.push_back(normalized(gaussian_sample(rng, 0.0, 1.0, d)));
        for (std::size_t b = 0; b < imgs.size(); ++b) batch.push_back({imgs[b], b % 3});

        bool near_kink = false;
        for (const auto& e : prompts.entries()) {
            const ForwardTrace t = forward(p, e.feature);
            for (const Vec* pre : {&t.pre1, &t.pre2}) {
                for (double v : *pre) near_kink = near_kink || std::abs(v) < 1e-3;
            }
        }
        if (near_kink) continue;

        const double tau = 0.7;
        const AdapterGrads g = batch_loss_and_grad(p, prompts, batch, tau).grads;
        auto loss = [&] { return batch_loss_and_grad(p, prompts, batch, tau).mean_loss; };
        const double h = 1e-6;
        for (std::size_t i = 0; i < p.w_down.size(); ++i) {
            double& slot = p.w_down.values()[i];
            const double saved = slot;
            slot = saved + h;
            const double up = loss();
            slot = saved - h;
            const double down = loss();
            slot = saved;
            CHECK((up - down) / (2 * h) == doctest::Approx(g.g_down.values()[i]).epsilon(1e-5).scale(1e-3));
        }
        const double saved = p.s;
        p.s = saved + h;
        const double up = loss();
        p.s = saved - h;
        const double down = loss();
        p.s = saved;
        CHECK((up - down) / (2 * h) == doctest::Approx(g.g_s).epsilon(1e-5).scale(1e-3));
    }
}
