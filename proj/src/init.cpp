#include "camadapt/init.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "camadapt/error.hpp"

namespace camadapt {

namespace {

void fill_gaussian(Rng& rng, Mat& m, double sigma) {
    for (double& v : m.values()) v = sigma * rng.next_gaussian();
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

}  // namespace

void InitConfig::validate() const {
    if (!(sigma_up >= 0.0)) throw ConfigError("init.sigma_up must be >= 0, got " + num(sigma_up));
    if (!(sigma_down > sigma_mid)) {
        throw ConfigError("init.sigma_down (" + num(sigma_down) + ") must be > init.sigma_mid (" + num(sigma_mid) + ")");
    }
    if (!(sigma_mid > sigma_up)) {
        throw ConfigError("init.sigma_mid (" + num(sigma_mid) + ") must be > init.sigma_up (" + num(sigma_up) + ")");
    }
    if (!(s_lo >= 0.0)) throw ConfigError("init.s_lo must be >= 0, got " + num(s_lo));
    if (!(s_lo <= s_hi)) throw ConfigError("init.s_lo (" + num(s_lo) + ") must be <= init.s_hi (" + num(s_hi) + ")");
}

InitConfig InitConfig::reproducible() {
    InitConfig cfg;
    cfg.s_lo = 0.15;
    cfg.s_hi = 0.15;
    return cfg;
}

InitConfig InitConfig::desk_scale() {
    InitConfig cfg;
    cfg.sigma_down = 0.4;
    cfg.sigma_mid = 0.2;
    cfg.sigma_up = 0.1;
    return cfg;
}

AdapterParams lai_init(std::size_t d, std::size_t r, const InitConfig& cfg) {
    cfg.validate();
    AdapterParams p = AdapterParams::zeros(d, r);
    Rng rng = Rng::stream(cfg.seed, "init");
    fill_gaussian(rng, p.w_down, cfg.sigma_down);
    fill_gaussian(rng, p.w_mid, cfg.sigma_mid);
    fill_gaussian(rng, p.w_up, cfg.sigma_up);
    p.s = uniform_sample(rng, cfg.s_lo, cfg.s_hi);
    return p;
}

AdapterParams standard_init(std::size_t d, std::size_t r, double sigma, double s0, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw ConfigError("standard init sigma must be >= 0, got " + num(sigma));
    AdapterParams p = AdapterParams::zeros(d, r, s0);
    Rng rng = Rng::stream(seed, "init");
    fill_gaussian(rng, p.w_down, sigma);
    fill_gaussian(rng, p.w_mid, sigma);
    fill_gaussian(rng, p.w_up, sigma);
    return p;
}

double matched_standard_sigma(const InitConfig& cfg) {
    return std::cbrt(cfg.sigma_down * cfg.sigma_mid * cfg.sigma_up);
}

}  // namespace camadapt
