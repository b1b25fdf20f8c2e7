#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "camadapt/error.hpp"
#include "camadapt/metrics.hpp"
#include "camadapt/numerics.hpp"

using namespace camadapt;

namespace {

MaskGrid grid(std::size_t h, std::size_t w, std::vector<double> v) { return MaskGrid::from_values(h, w, std::move(v)); }

MaskGrid random_binary(Rng& rng, std::size_t h, std::size_t w, double p = 0.5) {
    MaskGrid m(h, w);
    for (double& v : m.values) v = rng.next_unit() < p ? 1.0 : 0.0;
    return m;
}

MaskGrid random_continuous(Rng& rng, std::size_t h, std::size_t w) {
    MaskGrid m(h, w);
    for (double& v : m.values) v = rng.next_unit();
    return m;
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

MaskGrid from_u8(const nlohmann::json& arr, std::size_t h, std::size_t w, bool gt) {
    std::vector<double> v;
    for (const auto& x : arr) {
        const int b = x.get<int>();
        v.push_back(gt ? (b >= 128 ? 1.0 : 0.0) : b / 255.0);
    }
    return grid(h, w, std::move(v));
}

}  // namespace

TEST_CASE("binarize examples") {
    CHECK(binarize(MaskGrid(2, 2, 0.6), Binarization::fixed(0.5)).values == std::vector<double>(4, 1.0));
    CHECK(binarize(grid(1, 2, {0.2, 0.8}), Binarization::adaptive()).values == std::vector<double>{0.0, 0.0});
    CHECK(binarize(grid(1, 3, {0.2, 0.8, 1.0}), Binarization::adaptive()).values ==
          std::vector<double>{0.0, 0.0, 1.0});
    const MaskGrid bin = grid(2, 2, {0, 1, 1, 0});
    CHECK(binarize(bin, Binarization::fixed(0.5)) == bin);
}

TEST_CASE("mask grids reject out-of-range values and bad shapes") {
    CHECK_THROWS_AS(grid(1, 2, {0.5, 1.5}), DomainError);
    CHECK_THROWS_AS(grid(2, 2, {0.5}), ShapeError);
    CHECK_THROWS_AS(iou(MaskGrid(2, 2), MaskGrid(2, 3)), ShapeError);
    CHECK_THROWS_AS(mae(MaskGrid(2, 2), MaskGrid(3, 2)), ShapeError);
}

TEST_CASE("iou examples") {
    const MaskGrid g = grid(2, 2, {1, 0, 1, 0});
    CHECK(iou(g, g) == 1.0);
    CHECK(iou(grid(2, 2, {1, 1, 0, 0}), grid(2, 2, {0, 1, 0, 1})) == doctest::Approx(1.0 / 3.0));
    CHECK(iou(grid(1, 2, {1, 0}), grid(1, 2, {0, 1})) == 0.0);
    CHECK(iou(MaskGrid(2, 2), MaskGrid(2, 2)) == 1.0);
}

TEST_CASE("mae examples") {
    const MaskGrid g = grid(1, 2, {0, 1});
    CHECK(mae(g, g) == 0.0);
    CHECK(mae(MaskGrid(2, 2, 0.5), MaskGrid(2, 2, 1.0)) == 0.5);
    CHECK(mae(grid(1, 2, {0.1, 0.9}), g) == doctest::Approx(0.1));
}

TEST_CASE("f_beta examples") {
    const MaskGrid g = grid(2, 2, {1, 1, 0, 0});
    CHECK(f_beta(g, g) == doctest::Approx(1.0));
    CHECK(f_beta(grid(2, 2, {1, 0, 0, 0}), g, 0.3) == doctest::Approx(0.8125));
    CHECK(f_beta(MaskGrid(2, 2), g) == 0.0);
    CHECK(f_beta(MaskGrid(2, 2), MaskGrid(2, 2)) == 1.0);
}

TEST_CASE("weighted F examples") {
    const MaskGrid g = grid(3, 3, {0, 1, 0, 1, 1, 0, 0, 0, 0});
    CHECK(f_weighted_beta(g, g) == doctest::Approx(1.0));
    const double half = f_weighted_beta(MaskGrid(3, 3, 0.5), g);
    CHECK(half > 0.0);
    CHECK(half < 1.0);
    CHECK(f_weighted_beta(MaskGrid(3, 3, 0.3), MaskGrid(3, 3)) == 0.0);
}

TEST_CASE("s_measure examples") {
    const MaskGrid g = grid(3, 3, {0, 1, 0, 1, 1, 0, 0, 0, 0});
    CHECK(s_measure(g, g) == doctest::Approx(1.0));
    CHECK(s_measure(MaskGrid(2, 2, 0.0), MaskGrid(2, 2)) == 1.0);
    CHECK(s_measure(MaskGrid(2, 2, 1.0), MaskGrid(2, 2)) == 0.0);
    CHECK(s_measure(MaskGrid(2, 2, 0.25), MaskGrid(2, 2, 1.0)) == doctest::Approx(0.25));
}

TEST_CASE("e_measure examples") {
    const MaskGrid g = grid(3, 3, {0, 1, 0, 1, 1, 0, 0, 0, 0});
    CHECK(e_measure(g, g) == doctest::Approx(1.0));
    CHECK(e_measure(MaskGrid(2, 2), MaskGrid(2, 2)) == 1.0);
    MaskGrid inv = g;
    for (double& v : inv.values) v = 1.0 - v;
    CHECK(std::abs(e_measure(inv, g)) < 1e-9);
    CHECK(e_measure(MaskGrid(2, 2, 1.0), MaskGrid(2, 2)) == 0.0);
    CHECK(e_measure(MaskGrid(2, 2), MaskGrid(2, 2, 1.0)) == 0.0);
}

TEST_CASE("all metrics are perfect at pred = gt") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        MaskGrid g = random_binary(rng, 3 + rng.next_index(10), 3 + rng.next_index(10));
        g.values[0] = 1.0;
        g.values[1] = 0.0;
        const MetricValues m = segmentation_metrics(g, g);
        CHECK(m.sm == doctest::Approx(1.0));
        CHECK(m.wfm == doctest::Approx(1.0));
        CHECK(m.mae == 0.0);
        CHECK(m.fm == doctest::Approx(1.0));
        CHECK(m.em == doctest::Approx(1.0));
        CHECK(m.iou == 1.0);
    }
}

TEST_CASE("metrics stay in [0, 1] under fuzzing") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t h = 1 + rng.next_index(12), w = 1 + rng.next_index(12);
        const MaskGrid pred = random_continuous(rng, h, w);
        const MaskGrid gt = random_binary(rng, h, w, rng.next_unit());
        const MetricValues m = segmentation_metrics(pred, gt);
        CHECK(in_unit(m.sm));
        CHECK(in_unit(m.wfm));
        CHECK(in_unit(m.mae));
        CHECK(in_unit(m.fm));
        CHECK(in_unit(m.em));
        CHECK(in_unit(m.iou));
    }
}

TEST_CASE("adding a correct foreground pixel never lowers IoU") {
    Rng rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        const MaskGrid gt = random_binary(rng, 8, 8, 0.4);
        MaskGrid pred(8, 8);
        std::vector<std::size_t> fg;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (gt.values[i] == 1.0) {
                if (rng.next_unit() < 0.5) {
                    pred.values[i] = 1.0;
                } else {
                    fg.push_back(i);
                }
            }
        }
        if (fg.empty()) continue;
        const double before = iou(pred, gt);
        pred.values[fg[rng.next_index(fg.size())]] = 1.0;
        CHECK(iou(pred, gt) >= before);
    }
}

TEST_CASE("class-aware gating") {
    const MaskGrid g = grid(2, 2, {1, 0, 0, 1});
    std::vector<EvalPair> pairs{
        {"a", g, g, "cat", "cat"},
        {"b", g, g, "cat", "dog"},
    };
    const MetricReport half = class_aware_report(pairs);
    CHECK(half.mean.iou == doctest::Approx(0.5));
    CHECK(half.mean.mae == doctest::Approx(0.5));
    CHECK(half.accuracy == 0.5);
    CHECK(half.samples[1].values == kGatedOut);

    const MetricReport ungated = class_aware_report(pairs, {}, Gating::none);
    CHECK(ungated.mean.iou == 1.0);

    std::vector<EvalPair> mismatch{{"x", g, MaskGrid(3, 3), "a", "a"}};
    try {
        class_aware_report(mismatch);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("x") != std::string::npos);
    }
    std::vector<EvalPair> soft{{"y", g, MaskGrid(2, 2, 0.5), "a", "a"}};
    CHECK_THROWS_AS(class_aware_report(soft), DataError);
}

TEST_CASE("report table has the expected columns") {
    const MaskGrid g = grid(1, 2, {1, 0});
    std::vector<EvalPair> pairs{{"a", g, g, "c", "c"}};
    const std::string table = format_report_table(class_aware_report(pairs));
    for (const char* col : {"cSm", "cFwb", "cMAE", "cFb", "cEm", "cIoU"}) {
        CHECK(table.find(col) != std::string::npos);
    }
}

TEST_CASE("reference implementation fixtures") {
    std::ifstream in(std::string(CAMADAPT_FIXTURE_DIR) + "/metric_reference.json");
    REQUIRE(in.good());
    const nlohmann::json doc = nlohmann::json::parse(in);
    for (const auto& c : doc.at("cases")) {
        const std::string name = c.at("name").get<std::string>();
        CAPTURE(name);
        const auto h = c.at("height").get<std::size_t>();
        const auto w = c.at("width").get<std::size_t>();
        const MaskGrid pred = from_u8(c.at("pred_u8"), h, w, false);
        const MaskGrid gt = from_u8(c.at("gt_u8"), h, w, true);
        const double n = static_cast<double>(h * w);

        CHECK(s_measure(pred, gt) == doctest::Approx(c.at("sm").get<double>()).epsilon(1e-9));
        CHECK(f_weighted_beta(pred, gt) == doctest::Approx(c.at("wfm").get<double>()).epsilon(1e-9));
        CHECK(mae(pred, gt) == doctest::Approx(c.at("mae").get<double>()).epsilon(1e-12));
        const MaskGrid adaptive = binarize(pred, Binarization::adaptive());
        CHECK(f_beta(adaptive, gt, 0.3) == doctest::Approx(c.at("fm_adaptive").get<double>()).epsilon(1e-9));
        // The reference divides the alignment sum by N - 1 instead of N.
        CHECK(e_measure(adaptive, gt) ==
              doctest::Approx(c.at("em_adaptive_ref").get<double>() * (n - 1.0) / n).epsilon(1e-9));
    }
}
