#pragma once

#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

#include "camadapt/numerics.hpp"

namespace camadapt {

/// Trainable state of the bottleneck text adapter:
///   y = z + s · W_up · relu(W_mid · relu(W_down · z))
/// with W_down r×d, W_mid r×r, W_up d×r. There are no bias terms.
struct AdapterParams {
    Mat w_down;
    Mat w_mid;
    Mat w_up;
    double s = 0.0;

    std::size_t d() const { return w_down.cols(); }
    std::size_t r() const { return w_down.rows(); }

    /// All-zero matrices of the right shapes; validates d and r.
    static AdapterParams zeros(std::size_t d, std::size_t r, double s = 0.0);

    /// Throws ShapeError on inconsistent shapes or r > d, DomainError on
    /// non-finite values.
    void validate() const;

    friend bool operator==(const AdapterParams&, const AdapterParams&) = default;
};

/// True when r >= d/2, i.e. the bottleneck barely compresses.
bool wide_bottleneck(std::size_t d, std::size_t r);

struct AdapterGrads {
    Mat g_down;
    Mat g_mid;
    Mat g_up;
    double g_s = 0.0;

    static AdapterGrads zeros_like(const AdapterParams& p);
    void accumulate(const AdapterGrads& other);
    void scale(double factor);
};

struct ForwardTrace {
    Vec z;
    Vec pre1;  // W_down·z
    Vec h1;    // relu(pre1)
    Vec pre2;  // W_mid·h1
    Vec h2;    // relu(pre2)
    Vec a;     // W_up·h2
    Vec y;     // z + s·a
};

ForwardTrace forward(const AdapterParams& p, std::span<const double> z);

struct BackwardResult {
    AdapterGrads grads;
    Vec dz;
};

/// Gradients for upstream dL/dy. The ReLU subgradient at exactly 0 is 0.
BackwardResult backward(const AdapterParams& p, const ForwardTrace& t, std::span<const double> dy);

/// Adds the parameter gradients for `dy` into `grads` without allocating a
/// dz. Used by the training loop, which never needs dL/dz.
void accumulate_backward(const AdapterParams& p, const ForwardTrace& t, std::span<const double> dy,
                         AdapterGrads& grads);

/// 2·r·d + r² + 1
std::size_t param_count(const AdapterParams& p);
std::size_t param_count(std::size_t d, std::size_t r);

inline constexpr const char* kCheckpointVersion = "camadapt.adapter/1";

/// Serializes to the `*.adapter.json` document. Doubles are printed in
/// shortest round-trip form so load(save(p)) is exact.
std::string save_checkpoint(const AdapterParams& p, const nlohmann::json& meta = nlohmann::json::object());

struct Checkpoint {
    AdapterParams params;
    nlohmann::json meta;
};

/// Throws FormatError whose message starts with the offending JSON path.
Checkpoint load_checkpoint(const std::string& text);

void write_checkpoint_file(const std::string& path, const AdapterParams& p,
                           const nlohmann::json& meta = nlohmann::json::object());
Checkpoint read_checkpoint_file(const std::string& path);

}  // namespace camadapt
