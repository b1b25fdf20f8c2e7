#include "camadapt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "camadapt/adapter.hpp"
#include "camadapt/error.hpp"
#include "camadapt/training.hpp"

namespace camadapt {

namespace {

struct Instance {
    AdapterParams params;
    PromptTable prompts;
    std::vector<Vec> images;
    std::vector<std::size_t> labels;
    double tau = 1.0;
};

Instance random_instance(Rng& rng, const GradcheckConfig& cfg) {
    Instance in;
    const std::size_t d = cfg.min_dim + rng.next_index(cfg.max_dim - cfg.min_dim + 1);
    const std::size_t r = 1 + rng.next_index(std::min(cfg.max_rank, d));
    const std::size_t classes = 2 + rng.next_index(4);
    const std::size_t batch = 1 + rng.next_index(3);
    in.tau = uniform_sample(rng, cfg.tau_lo, cfg.tau_hi);

    in.params = AdapterParams::zeros(d, r);
    for (Mat* m : {&in.params.w_down, &in.params.w_mid, &in.params.w_up}) {
        for (double& v : m->values()) v = cfg.weight_scale * rng.next_gaussian();
    }
    in.params.s = uniform_sample(rng, 0.5, 1.5);

    std::vector<PromptEntry> entries;
    for (std::size_t c = 0; c < classes; ++c) {
        entries.push_back({"c" + std::to_string(c), gaussian_sample(rng, 0.0, 1.0, d), {}});
    }
    in.prompts = PromptTable(std::move(entries));
    for (std::size_t b = 0; b < batch; ++b) {
        in.images.push_back(normalized(gaussian_sample(rng, 0.0, 1.0, d)));
        in.labels.push_back(rng.next_index(classes));
    }
    return in;
}

bool near_kink(const Instance& in, double margin) {
    for (const auto& e : in.prompts.entries()) {
        const ForwardTrace t = forward(in.params, e.feature);
        for (const Vec* pre : {&t.pre1, &t.pre2}) {
            for (double v : *pre) {
                if (std::abs(v) < margin) return true;
            }
        }
    }
    return false;
}

double mean_loss(const Instance& in) {
    double total = 0.0;
    for (std::size_t b = 0; b < in.images.size(); ++b) {
        total += cross_entropy(class_logits(in.params, in.images[b], in.prompts, in.tau), in.labels[b]).loss;
    }
    return total / static_cast<double>(in.images.size());
}

}  // namespace

bool gradient_entry_matches(double analytic, double numeric, double rel_tol, double abs_floor) {
    const double diff = std::abs(analytic - numeric);
    return diff < abs_floor || diff < rel_tol * std::max(std::abs(analytic), std::abs(numeric));
}

GradcheckResult run_gradcheck(const GradcheckConfig& cfg) {
    if (cfg.min_dim < 1 || cfg.max_dim < cfg.min_dim || cfg.max_rank < 1) {
        throw ConfigError("gradcheck: invalid dimension ranges");
    }
    if (!(cfg.h > 0.0)) throw ConfigError("gradcheck: h must be > 0");

    Rng rng = Rng::stream(cfg.seed, "gradcheck");
    GradcheckResult res;
    // Excluded draws are replaced, so `configs` instances are always checked.
    for (std::size_t k = 0; res.checked < cfg.configs; ++k) {
        if (res.skipped > 100 * cfg.configs + 1000) throw DomainError("gradcheck: too many draws near a ReLU kink");
        Instance in = random_instance(rng, cfg);
        if (near_kink(in, cfg.kink_margin)) {
            ++res.skipped;
            continue;
        }
        ++res.checked;

        std::vector<LabeledEmbedding> batch;
        for (std::size_t b = 0; b < in.images.size(); ++b) batch.push_back({in.images[b], in.labels[b]});
        const AdapterGrads g = batch_loss_and_grad(in.params, in.prompts, batch, in.tau).grads;

        auto check = [&](const char* name, double& slot, double analytic, std::size_t i, std::size_t j) {
            const double saved = slot;
            slot = saved + cfg.h;
            const double up = mean_loss(in);
            slot = saved - cfg.h;
            const double down = mean_loss(in);
            slot = saved;
            const double numeric = (up - down) / (2.0 * cfg.h);
            ++res.entries;
            const double denom = std::max(std::abs(analytic), std::abs(numeric));
            if (denom > 0.0) res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
            if (!gradient_entry_matches(analytic, numeric, cfg.rel_tol, cfg.abs_floor)) {
                res.failures.push_back(
                    {k, std::string(name) + "[" + std::to_string(i) + "," + std::to_string(j) + "]", analytic, numeric});
            }
        };
        auto check_mat = [&](const char* name, Mat& w, const Mat& grad) {
            for (std::size_t i = 0; i < w.rows(); ++i) {
                for (std::size_t j = 0; j < w.cols(); ++j) check(name, w(i, j), grad(i, j), i, j);
            }
        };
        check_mat("w_down", in.params.w_down, g.g_down);
        check_mat("w_mid", in.params.w_mid, g.g_mid);
        check_mat("w_up", in.params.w_up, g.g_up);
        check("s", in.params.s, g.g_s, 0, 0);
    }
    return res;
}

}  // namespace camadapt
