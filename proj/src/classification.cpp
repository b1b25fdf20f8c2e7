#include "camadapt/classification.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "camadapt/error.hpp"
#include "camadapt/training.hpp"

namespace camadapt {

namespace {

std::vector<Vec> raw_features(const PromptTable& prompts) {
    if (prompts.empty()) throw ShapeError("prompt table is empty");
    std::vector<Vec> out;
    out.reserve(prompts.size());
    for (const auto& e : prompts.entries()) out.push_back(e.feature);
    return out;
}

Prediction predict_from_logits(const Vec& logits) {
    Prediction pr;
    pr.probs = softmax_temp(logits, 1.0);
    pr.pred_idx = argmax(pr.probs);
    return pr;
}

}  // namespace

Prediction classify(const AdapterParams& p, const PromptTable& prompts, std::span<const double> img, double tau) {
    return predict_from_logits(class_logits(p, img, prompts, tau));
}

Prediction classify_frozen(const PromptTable& prompts, std::span<const double> img, double tau) {
    return predict_from_logits(cosine_logits(raw_features(prompts), img, tau));
}

Vec tta_aggregate(std::span<const Vec> view_logits, double tau, TtaWeighting weighting) {
    if (view_logits.empty()) throw DomainError("tta_aggregate: no views");
    if (!(tau > 0.0)) throw DomainError("tta_aggregate: tau must be > 0");
    const std::size_t k = view_logits.front().size();
    Vec total(k, 0.0);
    double weight_sum = 0.0;
    for (const Vec& z : view_logits) {
        if (z.size() != k) throw ShapeError("tta_aggregate: views have different lengths");
        const Vec probs = softmax_temp(z, tau);
        const Vec conf = weighting == TtaWeighting::tempered ? probs : softmax_temp(z, 1.0);
        const double w = conf[argmax(conf)];
        for (std::size_t c = 0; c < k; ++c) total[c] += w * probs[c];
        weight_sum += w;
    }
    for (double& v : total) v /= weight_sum;
    return total;
}

std::vector<ViewSet> make_view_sets(std::span<const EmbeddingRecord> records) {
    std::vector<const EmbeddingRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) sorted.push_back(&r);
    std::ranges::sort(sorted, [](const EmbeddingRecord* a, const EmbeddingRecord* b) {
        return std::tie(a->id, a->condition, a->view) < std::tie(b->id, b->condition, b->view);
    });

    std::vector<ViewSet> sets;
    for (std::size_t i = 0; i < sorted.size();) {
        const EmbeddingRecord& first = *sorted[i];
        const std::string where = "record '" + first.id + "' (" + std::string(to_string(first.condition)) + ")";
        if (first.view != 0) throw DataError(where + ": missing canonical view 0");
        ViewSet vs{first.id, first.condition, first.class_name, {}};
        std::size_t j = i;
        for (; j < sorted.size() && sorted[j]->id == first.id && sorted[j]->condition == first.condition; ++j) {
            const EmbeddingRecord& r = *sorted[j];
            if (j > i && r.view == sorted[j - 1]->view) {
                throw DataError(where + ": duplicate view " + std::to_string(r.view));
            }
            if (r.class_name != first.class_name) throw DataError(where + ": views disagree on the class label");
            vs.views.push_back(r.embedding);
        }
        sets.push_back(std::move(vs));
        i = j;
    }
    return sets;
}

AccuracyReport evaluate_accuracy(const AdapterParams& p, const PromptTable& prompts, std::span<const ViewSet> dataset,
                                 const EvalOptions& opts) {
    if (!(opts.tau > 0.0)) throw DomainError("tau must be > 0");
    const std::vector<Vec> features = adapted_features(p, prompts);
    const std::size_t n_classes = prompts.size();

    AccuracyReport report;
    report.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    for (const auto& e : prompts.entries()) report.per_class[e.name];

    for (const ViewSet& vs : dataset) {
        if (opts.condition && vs.condition != *opts.condition) continue;
        if (vs.views.empty()) throw DataError("record '" + vs.id + "' has no views");
        const auto true_idx = prompts.index_of(vs.class_name);
        if (!true_idx) throw DataError("record '" + vs.id + "': unknown class '" + vs.class_name + "'");

        Vec probs;
        if (opts.tta) {
            std::vector<Vec> sims;
            sims.reserve(vs.views.size());
            for (const Vec& v : vs.views) sims.push_back(cosine_logits(features, v, 1.0));
            probs = tta_aggregate(sims, opts.tau, opts.weighting);
        } else {
            probs = softmax_temp(cosine_logits(features, vs.views.front(), opts.tau), 1.0);
        }
        const std::size_t pred = argmax(probs);
        const bool ok = pred == *true_idx;

        report.predictions.push_back({vs.id, vs.condition, prompts[pred].name, probs[pred], vs.class_name, ok});
        ++report.total;
        report.correct += ok ? 1 : 0;
        auto& pc = report.per_class[vs.class_name];
        ++pc.total;
        pc.correct += ok ? 1 : 0;
        ++report.confusion[*true_idx][pred];
    }
    if (report.total == 0) {
        throw DataError(opts.condition ? "no records with condition '" + std::string(to_string(*opts.condition)) + "'"
                                       : std::string("no records to evaluate"));
    }
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
    return report;
}

}  // namespace camadapt
