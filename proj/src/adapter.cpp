#include "camadapt/adapter.hpp"

#include <cmath>
#include <set>
#include <string>

#include "camadapt/error.hpp"
#include "io_util.hpp"

namespace camadapt {

using nlohmann::json;

namespace {

void require_shape(const Mat& m, std::size_t rows, std::size_t cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ShapeError(std::string(name) + " is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
}

void require_grad_shapes(const AdapterParams& p, const AdapterGrads& g) {
    if (!g.g_down.same_shape(p.w_down) || !g.g_mid.same_shape(p.w_mid) || !g.g_up.same_shape(p.w_up)) {
        throw ShapeError("gradient buffers do not match adapter shapes");
    }
}

json matrix_to_json(const Mat& m) {
    json values = json::array();
    for (double v : m.values()) values.push_back(v);
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", std::move(values)}};
}

[[noreturn]] void format_fail(const std::string& path, const std::string& what) {
    throw FormatError(path + ": " + what);
}

std::size_t read_count(const json& doc, const std::string& key, const std::string& path) {
    if (!doc.contains(key)) format_fail(path + key, "missing");
    const json& v = doc.at(key);
    if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) format_fail(path + key, "must be a positive integer");
    return v.get<std::size_t>();
}

double read_real(const json& doc, const std::string& key, const std::string& path) {
    if (!doc.contains(key)) format_fail(path + key, "missing");
    const json& v = doc.at(key);
    if (!v.is_number()) format_fail(path + key, "must be a number");
    return v.get<double>();
}

Mat matrix_from_json(const json& doc, const std::string& key, std::size_t rows, std::size_t cols) {
    const std::string path = "/" + key;
    if (!doc.contains(key)) format_fail(path, "missing");
    const json& m = doc.at(key);
    if (!m.is_object()) format_fail(path, "must be an object");
    const std::size_t got_rows = read_count(m, "rows", path + "/");
    const std::size_t got_cols = read_count(m, "cols", path + "/");
    if (got_rows != rows || got_cols != cols) {
        format_fail(path, key + " is " + std::to_string(got_rows) + "x" + std::to_string(got_cols) +
                              ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!m.contains("values") || !m.at("values").is_array()) format_fail(path + "/values", "must be an array");
    const json& values = m.at("values");
    if (values.size() != rows * cols) {
        format_fail(path + "/values", key + " declares " + std::to_string(rows) + "x" + std::to_string(cols) +
                                          " but has " + std::to_string(values.size()) + " values");
    }
    std::vector<double> data;
    data.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!values[i].is_number()) format_fail(path + "/values/" + std::to_string(i), "must be a number");
        data.push_back(values[i].get<double>());
    }
    return Mat::from_values(rows, cols, std::move(data));
}

}  // namespace

AdapterParams AdapterParams::zeros(std::size_t d, std::size_t r, double s) {
    AdapterParams p{Mat(r, d), Mat(r, r), Mat(d, r), s};
    p.validate();
    return p;
}

void AdapterParams::validate() const {
    const std::size_t dd = d();
    const std::size_t rr = r();
    if (dd == 0 || rr == 0) throw ShapeError("adapter needs d >= 1 and r >= 1");
    if (rr > dd) {
        throw ShapeError("bottleneck r=" + std::to_string(rr) + " exceeds feature dimension d=" + std::to_string(dd));
    }
    require_shape(w_mid, rr, rr, "w_mid");
    require_shape(w_up, dd, rr, "w_up");
    if (!w_down.all_finite() || !w_mid.all_finite() || !w_up.all_finite() || !std::isfinite(s)) {
        throw DomainError("adapter parameters contain non-finite values");
    }
}

bool wide_bottleneck(std::size_t d, std::size_t r) { return 2 * r >= d; }

AdapterGrads AdapterGrads::zeros_like(const AdapterParams& p) {
    return AdapterGrads{Mat(p.w_down.rows(), p.w_down.cols()), Mat(p.w_mid.rows(), p.w_mid.cols()),
                        Mat(p.w_up.rows(), p.w_up.cols()), 0.0};
}

void AdapterGrads::accumulate(const AdapterGrads& other) {
    if (!g_down.same_shape(other.g_down) || !g_mid.same_shape(other.g_mid) || !g_up.same_shape(other.g_up)) {
        throw ShapeError("cannot accumulate gradients of different shapes");
    }
    auto add = [](Mat& dst, const Mat& src) {
        auto d = dst.values();
        auto s = src.values();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    };
    add(g_down, other.g_down);
    add(g_mid, other.g_mid);
    add(g_up, other.g_up);
    g_s += other.g_s;
}

void AdapterGrads::scale(double factor) {
    for (Mat* m : {&g_down, &g_mid, &g_up}) {
        for (double& v : m->values()) v *= factor;
    }
    g_s *= factor;
}

ForwardTrace forward(const AdapterParams& p, std::span<const double> z) {
    if (z.size() != p.d()) {
        throw ShapeError("adapter expects input of length d=" + std::to_string(p.d()) + ", got " +
                         std::to_string(z.size()));
    }
    ForwardTrace t;
    t.z.assign(z.begin(), z.end());
    t.pre1 = matvec(p.w_down, z);
    t.h1 = relu(t.pre1);
    t.pre2 = matvec(p.w_mid, t.h1);
    t.h2 = relu(t.pre2);
    t.a = matvec(p.w_up, t.h2);
    t.y.resize(t.z.size());
    for (std::size_t i = 0; i < t.y.size(); ++i) t.y[i] = t.z[i] + p.s * t.a[i];
    return t;
}

namespace {

// Shared core of backward/accumulate_backward. Returns dL/dh1 (pre-mask
// applied) so callers can form dz.
Vec backprop_into(const AdapterParams& p, const ForwardTrace& t, std::span<const double> dy, AdapterGrads& g) {
    if (dy.size() != p.d() || t.y.size() != p.d() || t.h1.size() != p.r()) {
        throw ShapeError("backward: upstream gradient/trace do not match adapter d=" + std::to_string(p.d()) +
                         ", r=" + std::to_string(p.r()));
    }
    require_grad_shapes(p, g);
    g.g_s += dot(dy, t.a);

    // da = s·dy
    Vec da(dy.begin(), dy.end());
    for (double& v : da) v *= p.s;
    add_outer(g.g_up, 1.0, da, t.h2);

    Vec dh2 = matvec_transposed(p.w_up, da);
    for (std::size_t i = 0; i < dh2.size(); ++i) {
        if (!(t.pre2[i] > 0.0)) dh2[i] = 0.0;
    }
    add_outer(g.g_mid, 1.0, dh2, t.h1);

    Vec dh1 = matvec_transposed(p.w_mid, dh2);
    for (std::size_t i = 0; i < dh1.size(); ++i) {
        if (!(t.pre1[i] > 0.0)) dh1[i] = 0.0;
    }
    add_outer(g.g_down, 1.0, dh1, t.z);
    return dh1;
}

}  // namespace

BackwardResult backward(const AdapterParams& p, const ForwardTrace& t, std::span<const double> dy) {
    BackwardResult out{AdapterGrads::zeros_like(p), {}};
    const Vec dh1 = backprop_into(p, t, dy, out.grads);
    out.dz = matvec_transposed(p.w_down, dh1);
    for (std::size_t i = 0; i < out.dz.size(); ++i) out.dz[i] += dy[i];
    return out;
}

void accumulate_backward(const AdapterParams& p, const ForwardTrace& t, std::span<const double> dy,
                         AdapterGrads& grads) {
    backprop_into(p, t, dy, grads);
}

std::size_t param_count(std::size_t d, std::size_t r) { return 2 * r * d + r * r + 1; }

std::size_t param_count(const AdapterParams& p) { return param_count(p.d(), p.r()); }

std::string save_checkpoint(const AdapterParams& p, const json& meta) {
    p.validate();
    if (!meta.is_object()) throw FormatError("/meta: must be an object");
    json doc = {
        {"version", kCheckpointVersion},
        {"d", p.d()},
        {"r", p.r()},
        {"s", p.s},
        {"w_down", matrix_to_json(p.w_down)},
        {"w_mid", matrix_to_json(p.w_mid)},
        {"w_up", matrix_to_json(p.w_up)},
        {"meta", meta},
    };
    return doc.dump(1) + "\n";
}

Checkpoint load_checkpoint(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        format_fail("/", std::string("unparseable checkpoint (") + e.what() + ")");
    }
    if (!doc.is_object()) format_fail("/", "checkpoint must be a JSON object");

    static const std::set<std::string> known = {"version", "d", "r", "s", "w_down", "w_mid", "w_up", "meta"};
    for (const auto& [key, _] : doc.items()) {
        if (!known.contains(key)) format_fail("/" + key, "unknown field");
    }
    if (!doc.contains("version") || !doc.at("version").is_string()) format_fail("/version", "missing");
    if (doc.at("version").get<std::string>() != kCheckpointVersion) {
        format_fail("/version", "unsupported version '" + doc.at("version").get<std::string>() + "', expected '" +
                                    kCheckpointVersion + "'");
    }
    const std::size_t d = read_count(doc, "d", "/");
    const std::size_t r = read_count(doc, "r", "/");

    Checkpoint ck;
    ck.params.w_down = matrix_from_json(doc, "w_down", r, d);
    ck.params.w_mid = matrix_from_json(doc, "w_mid", r, r);
    ck.params.w_up = matrix_from_json(doc, "w_up", d, r);
    ck.params.s = read_real(doc, "s", "/");
    if (!doc.contains("meta") || !doc.at("meta").is_object()) format_fail("/meta", "must be an object");
    ck.meta = doc.at("meta");
    try {
        ck.params.validate();
    } catch (const Error& e) {
        format_fail("/", e.what());
    }
    return ck;
}

void write_checkpoint_file(const std::string& path, const AdapterParams& p, const json& meta) {
    detail::write_text_file(path, save_checkpoint(p, meta));
}

Checkpoint read_checkpoint_file(const std::string& path) {
    const std::string text = detail::read_text_file(path);
    try {
        return load_checkpoint(text);
    } catch (const FormatError& e) {
        throw FormatError(path + ":" + e.what());
    }
}

}  // namespace camadapt
