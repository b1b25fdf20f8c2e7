#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace camadapt {

/// Finite-difference audit of the end-to-end loss
/// cross_entropy ∘ class_logits ∘ forward over random small instances.
struct GradcheckConfig {
    std::size_t configs = 100;
    std::uint64_t seed = 0;
    double h = 1e-3;
    double rel_tol = 1e-4;
    double abs_floor = 1e-8;
    /// Instances with any |pre-activation| below this are skipped.
    double kink_margin = 1e-6;
    std::size_t min_dim = 4;
    std::size_t max_dim = 16;
    std::size_t max_rank = 4;
    /// Temperature range; the checked quantity is the same for any tau > 0.
    double tau_lo = 0.5;
    double tau_hi = 2.0;
    /// Std of the random adapter weights.
    double weight_scale = 1.0;
};

struct GradcheckFailure {
    std::size_t config = 0;
    std::string param;  // e.g. "w_down[2,3]"
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradcheckResult {
    std::size_t checked = 0;
    std::size_t skipped = 0;
    std::size_t entries = 0;
    double max_rel_error = 0.0;
    std::vector<GradcheckFailure> failures;

    bool passed() const { return failures.empty(); }
};

/// True when |a - n| < rel_tol · max(|a|, |n|) or |a - n| < abs_floor.
bool gradient_entry_matches(double analytic, double numeric, double rel_tol, double abs_floor);

GradcheckResult run_gradcheck(const GradcheckConfig& cfg);

}  // namespace camadapt
