#include "camadapt/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include "camadapt/error.hpp"

namespace camadapt {

namespace {

// numpy's np.spacing(1); the reference formulations add it to denominators.
constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same_dims(const MaskGrid& a, const MaskGrid& b, const char* what) {
    if (!a.same_dims(b)) {
        throw ShapeError(std::string(what) + ": prediction is " + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " but ground truth is " + std::to_string(b.height) + "x" +
                         std::to_string(b.width));
    }
}

bool on(double v) { return v >= 0.5; }

std::size_t count_on(const MaskGrid& m) {
    return static_cast<std::size_t>(std::ranges::count_if(m.values, on));
}

// ---------------------------------------------------------------------------
// Exact Euclidean distance transform with nearest-feature indices.
// Separable lower-envelope method: a 1D pass down each column, then a
// parabola envelope along each row.

struct NearestForeground {
    std::vector<double> dist;         // Euclidean distance to nearest fg pixel
    std::vector<std::size_t> nearest;  // flat index of that pixel
};

NearestForeground nearest_foreground(const MaskGrid& gt) {
    const std::size_t h = gt.height;
    const std::size_t w = gt.width;
    constexpr double kFar = 1e30;

    // Column pass: squared vertical distance and row of the nearest fg pixel.
    std::vector<double> col_d2(h * w, kFar);
    std::vector<std::size_t> col_row(h * w, 0);
    for (std::size_t x = 0; x < w; ++x) {
        long last = -1;
        for (std::size_t y = 0; y < h; ++y) {
            if (on(gt.at(y, x))) last = static_cast<long>(y);
            if (last >= 0) {
                const double dy = static_cast<double>(y) - static_cast<double>(last);
                col_d2[y * w + x] = dy * dy;
                col_row[y * w + x] = static_cast<std::size_t>(last);
            }
        }
        last = -1;
        for (std::size_t yy = h; yy-- > 0;) {
            if (on(gt.at(yy, x))) last = static_cast<long>(yy);
            if (last >= 0) {
                const double dy = static_cast<double>(last) - static_cast<double>(yy);
                if (dy * dy < col_d2[yy * w + x]) {
                    col_d2[yy * w + x] = dy * dy;
                    col_row[yy * w + x] = static_cast<std::size_t>(last);
                }
            }
        }
    }

    NearestForeground out{std::vector<double>(h * w), std::vector<std::size_t>(h * w)};
    std::vector<std::size_t> v(w);
    std::vector<double> z(w + 1);
    for (std::size_t y = 0; y < h; ++y) {
        auto f = [&](std::size_t q) { return col_d2[y * w + q]; };
        std::size_t k = 0;
        v[0] = 0;
        z[0] = -std::numeric_limits<double>::infinity();
        z[1] = std::numeric_limits<double>::infinity();
        for (std::size_t q = 1; q < w; ++q) {
            const double qd = static_cast<double>(q);
            double s;
            // z[0] is -inf, so the scan always stops by k == 0.
            while (true) {
                const double vd = static_cast<double>(v[k]);
                s = ((f(q) + qd * qd) - (f(v[k]) + vd * vd)) / (2.0 * qd - 2.0 * vd);
                if (s > z[k]) break;
                --k;
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = std::numeric_limits<double>::infinity();
        }
        k = 0;
        for (std::size_t x = 0; x < w; ++x) {
            while (z[k + 1] < static_cast<double>(x)) ++k;
            const std::size_t src = v[k];
            const double dx = static_cast<double>(x) - static_cast<double>(src);
            out.dist[y * w + x] = std::sqrt(dx * dx + f(src));
            out.nearest[y * w + x] = col_row[y * w + src] * w + src;
        }
    }
    return out;
}

std::array<double, 49> gaussian_kernel_7x7(double sigma) {
    std::array<double, 49> k{};
    double total = 0.0;
    for (int i = -3; i <= 3; ++i) {
        for (int j = -3; j <= 3; ++j) {
            const double v = std::exp(-static_cast<double>(i * i + j * j) / (2.0 * sigma * sigma));
            k[static_cast<std::size_t>((i + 3) * 7 + (j + 3))] = v;
            total += v;
        }
    }
    for (double& v : k) v /= total;
    return k;
}

// ---------------------------------------------------------------------------
// Structure measure helpers.

double object_similarity(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double stdev = 0.0;
    if (x.size() > 1) {
        double ss = 0.0;
        for (double v : x) ss += (v - mean) * (v - mean);
        stdev = std::sqrt(ss / (n - 1.0));
    }
    return 2.0 * mean / (mean * mean + 1.0 + stdev + kEps);
}

double region_ssim(const MaskGrid& pred, const MaskGrid& gt, std::size_t r0, std::size_t r1, std::size_t c0,
                   std::size_t c1) {
    const std::size_t count = (r1 - r0) * (c1 - c0);
    if (count == 0) return 0.0;
    const double n = static_cast<double>(count);
    double mx = 0.0, my = 0.0;
    for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) {
            mx += pred.at(r, c);
            my += gt.at(r, c);
        }
    }
    mx /= n;
    my /= n;
    double sx = 0.0, sy = 0.0, sxy = 0.0;
    for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) {
            const double dx = pred.at(r, c) - mx;
            const double dy = gt.at(r, c) - my;
            sx += dx * dx;
            sy += dy * dy;
            sxy += dx * dy;
        }
    }
    sx /= (n - 1.0 + kEps);
    sy /= (n - 1.0 + kEps);
    sxy /= (n - 1.0 + kEps);
    const double alpha = 4.0 * mx * my * sxy;
    const double beta = (mx * mx + my * my) * (sx + sy);
    if (alpha != 0.0) return alpha / (beta + kEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

MaskGrid MaskGrid::from_values(std::size_t h, std::size_t w, std::vector<double> values) {
    if (h == 0 || w == 0) throw ShapeError("mask dimensions must be >= 1");
    if (values.size() != h * w) {
        throw ShapeError("mask " + std::to_string(h) + "x" + std::to_string(w) + " needs " + std::to_string(h * w) +
                         " values, got " + std::to_string(values.size()));
    }
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("mask values must lie in [0, 1]");
    }
    MaskGrid m;
    m.height = h;
    m.width = w;
    m.values = std::move(values);
    return m;
}

bool MaskGrid::is_binary() const {
    return std::ranges::all_of(values, [](double v) { return v == 0.0 || v == 1.0; });
}

double MaskGrid::mean() const {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

MaskGrid binarize(const MaskGrid& m, const Binarization& mode) {
    const double t = mode.kind == Binarization::Kind::fixed ? mode.threshold : std::min(2.0 * m.mean(), 1.0);
    MaskGrid out = m;
    for (double& v : out.values) v = v >= t ? 1.0 : 0.0;
    return out;
}

double iou(const MaskGrid& pred_bin, const MaskGrid& gt) {
    require_same_dims(pred_bin, gt, "iou");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool p = on(pred_bin.values[i]);
        const bool g = on(gt.values[i]);
        inter += (p && g) ? 1 : 0;
        uni += (p || g) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double mae(const MaskGrid& pred, const MaskGrid& gt) {
    require_same_dims(pred, gt, "mae");
    double total = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) total += std::abs(pred.values[i] - gt.values[i]);
    return total / static_cast<double>(gt.size());
}

double f_beta(const MaskGrid& pred_bin, const MaskGrid& gt, double beta2) {
    require_same_dims(pred_bin, gt, "f_beta");
    std::size_t tp = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) tp += (on(pred_bin.values[i]) && on(gt.values[i])) ? 1 : 0;
    const std::size_t n_pred = count_on(pred_bin);
    const std::size_t n_gt = count_on(gt);
    if (n_pred == 0 && n_gt == 0) return 1.0;
    const double precision = n_pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_pred);
    const double recall = n_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_gt);
    const double denom = beta2 * precision + recall;
    if (denom == 0.0) return 0.0;
    return (1.0 + beta2) * precision * recall / denom;
}

double f_weighted_beta(const MaskGrid& pred, const MaskGrid& gt) {
    require_same_dims(pred, gt, "f_weighted_beta");
    const std::size_t h = gt.height;
    const std::size_t w = gt.width;
    const std::size_t n = gt.size();
    const std::size_t n_fg = count_on(gt);
    if (n_fg == 0) return 0.0;

    const NearestForeground nf = nearest_foreground(gt);
    std::vector<double> err(n), err_t(n);
    for (std::size_t i = 0; i < n; ++i) err[i] = std::abs(pred.values[i] - gt.values[i]);
    for (std::size_t i = 0; i < n; ++i) err_t[i] = on(gt.values[i]) ? err[i] : err[nf.nearest[i]];

    // Zero-padded 7×7 Gaussian filtering of err_t.
    static const std::array<double, 49> kernel = gaussian_kernel_7x7(5.0);
    std::vector<double> smoothed(n, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -3; i <= 3; ++i) {
                const long yy = static_cast<long>(y) + i;
                if (yy < 0 || yy >= static_cast<long>(h)) continue;
                for (int j = -3; j <= 3; ++j) {
                    const long xx = static_cast<long>(x) + j;
                    if (xx < 0 || xx >= static_cast<long>(w)) continue;
                    acc += kernel[static_cast<std::size_t>((i + 3) * 7 + (j + 3))] *
                           err_t[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
                }
            }
            smoothed[y * w + x] = acc;
        }
    }

    double sum_ew_fg = 0.0, sum_ew_bg = 0.0;
    const double decay = std::log(0.5) / 5.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (on(gt.values[i])) {
            sum_ew_fg += (smoothed[i] < err[i]) ? smoothed[i] : err[i];
        } else {
            sum_ew_bg += err[i] * (2.0 - std::exp(decay * nf.dist[i]));
        }
    }
    const double tp_w = static_cast<double>(n_fg) - sum_ew_fg;
    const double fp_w = sum_ew_bg;
    const double recall = 1.0 - sum_ew_fg / static_cast<double>(n_fg);
    const double precision = tp_w / (tp_w + fp_w + kEps);
    const double q = 2.0 * recall * precision / (recall + precision + kEps);
    return std::clamp(q, 0.0, 1.0);
}

double s_measure(const MaskGrid& pred, const MaskGrid& gt) {
    require_same_dims(pred, gt, "s_measure");
    const double y = gt.mean();
    double score;
    if (y == 0.0) {
        score = 1.0 - pred.mean();
    } else if (y == 1.0) {
        score = pred.mean();
    } else {
        std::vector<double> fg, bg;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (on(gt.values[i])) {
                fg.push_back(pred.values[i]);
            } else {
                bg.push_back(1.0 - pred.values[i]);
            }
        }
        const double object = y * object_similarity(fg) + (1.0 - y) * object_similarity(bg);

        // Foreground centroid, rounded half-to-even, then shifted by one so
        // the split rows/cols are [0, cy) and [cy, h).
        double sum_r = 0.0, sum_c = 0.0;
        std::size_t cnt = 0;
        for (std::size_t r = 0; r < gt.height; ++r) {
            for (std::size_t c = 0; c < gt.width; ++c) {
                if (on(gt.at(r, c))) {
                    sum_r += static_cast<double>(r);
                    sum_c += static_cast<double>(c);
                    ++cnt;
                }
            }
        }
        const auto cy = static_cast<std::size_t>(std::nearbyint(sum_r / static_cast<double>(cnt))) + 1;
        const auto cx = static_cast<std::size_t>(std::nearbyint(sum_c / static_cast<double>(cnt))) + 1;
        const double hh = static_cast<double>(gt.height);
        const double ww = static_cast<double>(gt.width);
        const double area = hh * ww;
        const double w_lt = static_cast<double>(cx) * static_cast<double>(cy) / area;
        const double w_rt = static_cast<double>(cy) * (ww - static_cast<double>(cx)) / area;
        const double w_lb = (hh - static_cast<double>(cy)) * static_cast<double>(cx) / area;
        const double w_rb = 1.0 - w_lt - w_rt - w_lb;
        const std::size_t H = gt.height, W = gt.width;
        const double region = w_lt * region_ssim(pred, gt, 0, cy, 0, cx) + w_rt * region_ssim(pred, gt, 0, cy, cx, W) +
                              w_lb * region_ssim(pred, gt, cy, H, 0, cx) + w_rb * region_ssim(pred, gt, cy, H, cx, W);
        score = 0.5 * object + 0.5 * region;
    }
    return std::clamp(score, 0.0, 1.0);
}

double e_measure(const MaskGrid& pred_bin, const MaskGrid& gt) {
    require_same_dims(pred_bin, gt, "e_measure");
    const double n = static_cast<double>(gt.size());
    std::size_t fg_fg = 0, fg_bg = 0, gt_fg = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool p = on(pred_bin.values[i]);
        const bool g = on(gt.values[i]);
        fg_fg += (p && g) ? 1 : 0;
        fg_bg += (p && !g) ? 1 : 0;
        gt_fg += g ? 1 : 0;
    }
    const std::size_t pred_fg = fg_fg + fg_bg;
    const std::size_t pred_bg = gt.size() - pred_fg;

    double enhanced_sum;
    if (gt_fg == 0) {
        enhanced_sum = static_cast<double>(pred_bg);
    } else if (gt_fg == gt.size()) {
        enhanced_sum = static_cast<double>(pred_fg);
    } else {
        const std::size_t bg_fg = gt_fg - fg_fg;
        const std::size_t bg_bg = pred_bg - bg_fg;
        const double mu_pred = static_cast<double>(pred_fg) / n;
        const double mu_gt = static_cast<double>(gt_fg) / n;
        // (pixel count, centered pred value, centered gt value) per region
        const std::array<std::array<double, 3>, 4> parts = {{
            {static_cast<double>(fg_fg), 1.0 - mu_pred, 1.0 - mu_gt},
            {static_cast<double>(fg_bg), 1.0 - mu_pred, -mu_gt},
            {static_cast<double>(bg_fg), -mu_pred, 1.0 - mu_gt},
            {static_cast<double>(bg_bg), -mu_pred, -mu_gt},
        }};
        enhanced_sum = 0.0;
        for (const auto& [count, a, b] : parts) {
            const double align = 2.0 * a * b / (a * a + b * b + kEps);
            enhanced_sum += count * (align + 1.0) * (align + 1.0) / 4.0;
        }
    }
    return std::clamp(enhanced_sum / n, 0.0, 1.0);
}

MetricValues segmentation_metrics(const MaskGrid& pred, const MaskGrid& gt, const MetricsConfig& cfg) {
    require_same_dims(pred, gt, "segmentation_metrics");
    MetricValues v;
    v.sm = s_measure(pred, gt);
    v.wfm = f_weighted_beta(pred, gt);
    v.mae = mae(pred, gt);
    v.fm = f_beta(binarize(pred, cfg.fbeta_bin), gt, cfg.beta2);
    v.em = e_measure(binarize(pred, cfg.em_bin), gt);
    v.iou = iou(binarize(pred, cfg.iou_bin), gt);
    return v;
}

MetricReport class_aware_report(std::span<const EvalPair> pairs, const MetricsConfig& cfg, Gating gating) {
    if (pairs.empty()) throw DataError("class_aware_report: no evaluation pairs");
    for (const EvalPair& p : pairs) {
        if (!p.pred.same_dims(p.gt) || p.gt.size() == 0) {
            throw DataError("pair '" + p.id + "': prediction " + std::to_string(p.pred.height) + "x" +
                            std::to_string(p.pred.width) + " vs ground truth " + std::to_string(p.gt.height) + "x" +
                            std::to_string(p.gt.width));
        }
        if (!p.gt.is_binary()) throw DataError("pair '" + p.id + "': ground truth is not binary");
    }
    std::vector<const EvalPair*> order;
    order.reserve(pairs.size());
    for (const auto& p : pairs) order.push_back(&p);
    std::ranges::stable_sort(order, [](const EvalPair* a, const EvalPair* b) { return a->id < b->id; });

    MetricReport report;
    report.samples.reserve(order.size());
    for (const EvalPair* p : order) {
        SampleMetrics s;
        s.id = p->id;
        s.class_correct = p->pred_class == p->true_class;
        const bool gate_open = gating == Gating::none || s.class_correct;
        s.values = gate_open ? segmentation_metrics(p->pred, p->gt, cfg) : kGatedOut;
        report.correct += s.class_correct ? 1 : 0;
        report.mean.sm += s.values.sm;
        report.mean.wfm += s.values.wfm;
        report.mean.mae += s.values.mae;
        report.mean.fm += s.values.fm;
        report.mean.em += s.values.em;
        report.mean.iou += s.values.iou;
        report.samples.push_back(std::move(s));
    }
    report.count = report.samples.size();
    const double n = static_cast<double>(report.count);
    report.mean.sm /= n;
    report.mean.wfm /= n;
    report.mean.mae /= n;
    report.mean.fm /= n;
    report.mean.em /= n;
    report.mean.iou /= n;
    report.accuracy = static_cast<double>(report.correct) / n;
    return report;
}

std::string format_report_table(const MetricReport& report) {
    std::string out = "samples  acc     cSm     cFwb    cMAE    cFb     cEm     cIoU\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-8zu %-7s %-7s %-7s %-7s %-7s %-7s %s\n", report.count, fmt3(report.accuracy).c_str(),
                  fmt3(report.mean.sm).c_str(), fmt3(report.mean.wfm).c_str(), fmt3(report.mean.mae).c_str(),
                  fmt3(report.mean.fm).c_str(), fmt3(report.mean.em).c_str(), fmt3(report.mean.iou).c_str());
    out += buf;
    return out;
}

}  // namespace camadapt
