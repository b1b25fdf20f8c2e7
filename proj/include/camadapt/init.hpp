#pragma once

#include <cstddef>
#include <cstdint>

#include "camadapt/adapter.hpp"

namespace camadapt {

/// Layered asymmetric initialization: zero-mean Gaussians with
/// sigma_down > sigma_mid > sigma_up, residual scale s ~ U[s_lo, s_hi].
struct InitConfig {
    double sigma_down = 0.02;
    double sigma_mid = 0.01;
    double sigma_up = 0.005;
    double s_lo = 0.075;
    double s_hi = 0.225;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the offending pair when the strict
    /// ordering or 0 <= s_lo <= s_hi fails.
    void validate() const;

    /// Defaults with the residual scale pinned to 0.15.
    static InitConfig reproducible();
    /// The same 4:2:1 ladder scaled for small feature dimensions and short
    /// schedules (32-dim synthetic task, ~130 SGD steps).
    static InitConfig desk_scale();
};

/// Matrices are drawn in the order w_down, w_mid, w_up (row-major), then s.
AdapterParams lai_init(std::size_t d, std::size_t r, const InitConfig& cfg);

/// Symmetric baseline: every matrix at the same sigma, s = s0.
AdapterParams standard_init(std::size_t d, std::size_t r, double sigma, double s0, std::uint64_t seed);

/// Geometric mean of the three LAI sigmas. Using it for standard_init keeps
/// the product of layer scales equal, so the ordering is the only variable.
double matched_standard_sigma(const InitConfig& cfg);

}  // namespace camadapt
