#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace camadapt {

/// 2D grayscale map with row-major values in [0, 1].
struct MaskGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    MaskGrid() = default;
    MaskGrid(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}
    /// Throws ShapeError when values.size() != h*w, DomainError on values
    /// outside [0, 1].
    static MaskGrid from_values(std::size_t h, std::size_t w, std::vector<double> values);

    std::size_t size() const { return values.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
    double& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
    bool same_dims(const MaskGrid& o) const { return height == o.height && width == o.width; }
    bool is_binary() const;
    double mean() const;

    friend bool operator==(const MaskGrid&, const MaskGrid&) = default;
};

struct Binarization {
    enum class Kind { fixed, adaptive };
    Kind kind = Kind::adaptive;
    double threshold = 0.5;  // used when kind == fixed

    static Binarization fixed(double t) { return {Kind::fixed, t}; }
    /// t = min(2·mean, 1)
    static Binarization adaptive() { return {Kind::adaptive, 0.0}; }
};

/// value >= t -> 1, else 0.
MaskGrid binarize(const MaskGrid& m, const Binarization& mode);

// Every metric throws ShapeError on mismatched dimensions.

/// |P∩G| / |P∪G| on binary masks; 1 when both are empty.
double iou(const MaskGrid& pred_bin, const MaskGrid& gt);

/// Mean absolute error on the continuous prediction.
double mae(const MaskGrid& pred, const MaskGrid& gt);

/// (1+β²)PR / (β²P + R) on binary masks. 1 when both are empty, 0 when the
/// denominator vanishes.
double f_beta(const MaskGrid& pred_bin, const MaskGrid& gt, double beta2 = 0.3);

/// Weighted F-measure: errors are smoothed by a 7×7 Gaussian (σ=5) with
/// background pixels inheriting the error of their nearest foreground pixel,
/// and background errors are weighted by 2 - exp(ln(0.5)/5 · dist). β² = 1.
/// An all-background ground truth scores 0.
double f_weighted_beta(const MaskGrid& pred, const MaskGrid& gt);

/// Structure measure with α = 0.5 (object and region terms). All-background
/// gt gives 1 - mean(pred), all-foreground gt gives mean(pred). Clamped to
/// [0, 1].
double s_measure(const MaskGrid& pred, const MaskGrid& gt);

/// Enhanced-alignment measure of two binary maps, averaged over all pixels.
double e_measure(const MaskGrid& pred_bin, const MaskGrid& gt);

struct MetricValues {
    double sm = 0.0;
    double wfm = 0.0;
    double mae = 0.0;
    double fm = 0.0;
    double em = 0.0;
    double iou = 0.0;

    friend bool operator==(const MetricValues&, const MetricValues&) = default;
};

/// Values a sample receives when its class is wrong.
inline constexpr MetricValues kGatedOut{0.0, 0.0, 1.0, 0.0, 0.0, 0.0};

struct MetricsConfig {
    double beta2 = 0.3;
    Binarization fbeta_bin = Binarization::adaptive();
    Binarization em_bin = Binarization::adaptive();
    Binarization iou_bin = Binarization::fixed(0.5);
};

/// The six metrics for one prediction, ignoring classes.
MetricValues segmentation_metrics(const MaskGrid& pred, const MaskGrid& gt, const MetricsConfig& cfg = {});

struct EvalPair {
    std::string id;
    MaskGrid pred;
    MaskGrid gt;
    std::string pred_class;
    std::string true_class;
};

struct SampleMetrics {
    std::string id;
    bool class_correct = false;
    MetricValues values;
};

struct MetricReport {
    std::vector<SampleMetrics> samples;  // sorted by id
    MetricValues mean;
    std::size_t count = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
};

enum class Gating {
    class_aware,  // wrong class scores kGatedOut
    none,         // plain segmentation metrics
};

/// Per-sample metrics and their unweighted means, reduced in id order.
/// Throws DataError naming the pair on dimension mismatch or non-binary gt.
MetricReport class_aware_report(std::span<const EvalPair> pairs, const MetricsConfig& cfg = {},
                                Gating gating = Gating::class_aware);

/// Aligned text table, columns cSm cFwb cMAE cFb cEm cIoU.
std::string format_report_table(const MetricReport& report);

}  // namespace camadapt
