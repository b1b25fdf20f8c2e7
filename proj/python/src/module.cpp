#include <sstream>
#include <string>
#include <vector>

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "camadapt/adapter.hpp"
#include "camadapt/classification.hpp"
#include "camadapt/cli.hpp"
#include "camadapt/dataio.hpp"
#include "camadapt/error.hpp"
#include "camadapt/gradcheck.hpp"
#include "camadapt/init.hpp"
#include "camadapt/metrics.hpp"
#include "camadapt/synth.hpp"
#include "camadapt/training.hpp"

namespace py = pybind11;
using namespace camadapt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Vec to_vec(const Array& a) {
    if (a.ndim() != 1) throw ShapeError("expected a 1-D array, got " + std::to_string(a.ndim()) + "-D");
    return Vec(a.data(), a.data() + a.size());
}

Array from_vec(const Vec& v) {
    return Array(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())}, v.data());
}

Mat to_mat(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Mat::from_values(rows, cols, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_mat(const Mat& m) {
    Array out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return out;
}

MaskGrid to_mask(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("mask must be a 2-D array");
    return MaskGrid::from_values(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                                 std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_mask(const MaskGrid& m) {
    Array out({static_cast<py::ssize_t>(m.height), static_cast<py::ssize_t>(m.width)});
    std::copy(m.values.begin(), m.values.end(), out.mutable_data());
    return out;
}

std::vector<Vec> to_vecs(const std::vector<Array>& arrays) {
    std::vector<Vec> out;
    out.reserve(arrays.size());
    for (const auto& a : arrays) out.push_back(to_vec(a));
    return out;
}

Condition condition_from(const std::string& tag) {
    const auto c = parse_condition(tag);
    if (!c) throw DataError("unknown condition '" + tag + "'");
    return *c;
}

TtaWeighting weighting_from(const std::string& tag) {
    if (tag == "tempered") return TtaWeighting::tempered;
    if (tag == "raw") return TtaWeighting::raw;
    throw ConfigError("unknown TTA weighting '" + tag + "'");
}

py::dict metric_dict(const MetricValues& v) {
    py::dict d;
    d["sm"] = v.sm;
    d["wfm"] = v.wfm;
    d["mae"] = v.mae;
    d["fm"] = v.fm;
    d["em"] = v.em;
    d["iou"] = v.iou;
    return d;
}

py::dict grads_dict(const AdapterGrads& g) {
    py::dict d;
    d["w_down"] = from_mat(g.g_down);
    d["w_mid"] = from_mat(g.g_mid);
    d["w_up"] = from_mat(g.g_up);
    d["s"] = g.g_s;
    return d;
}

}  // namespace

PYBIND11_MODULE(_camadapt, m) {
    m.doc() = "Bottleneck text adapter for class-aware camouflaged object segmentation";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
    py::register_exception<DomainError>(m, "DomainError", error.ptr());
    py::register_exception<FormatError>(m, "FormatError", error.ptr());
    py::register_exception<DataError>(m, "DataError", error.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<IoError>(m, "IoError", error.ptr());
    py::register_exception<UsageError>(m, "UsageError", error.ptr());

    // --- adapter -------------------------------------------------------------
    py::class_<AdapterParams>(m, "AdapterParams")
        .def(py::init([](const Array& w_down, const Array& w_mid, const Array& w_up, double s) {
                 AdapterParams p{to_mat(w_down), to_mat(w_mid), to_mat(w_up), s};
                 p.validate();
                 return p;
             }),
             py::arg("w_down"), py::arg("w_mid"), py::arg("w_up"), py::arg("s"))
        .def_static("zeros", &AdapterParams::zeros, py::arg("d"), py::arg("r"), py::arg("s") = 0.0)
        .def_property_readonly("d", &AdapterParams::d)
        .def_property_readonly("r", &AdapterParams::r)
        .def_property(
            "w_down", [](const AdapterParams& p) { return from_mat(p.w_down); },
            [](AdapterParams& p, const Array& a) { p.w_down = to_mat(a); })
        .def_property(
            "w_mid", [](const AdapterParams& p) { return from_mat(p.w_mid); },
            [](AdapterParams& p, const Array& a) { p.w_mid = to_mat(a); })
        .def_property(
            "w_up", [](const AdapterParams& p) { return from_mat(p.w_up); },
            [](AdapterParams& p, const Array& a) { p.w_up = to_mat(a); })
        .def_readwrite("s", &AdapterParams::s)
        .def("validate", &AdapterParams::validate)
        .def("__eq__", [](const AdapterParams& a, const AdapterParams& b) { return a == b; })
        .def("__repr__", [](const AdapterParams& p) {
            return "AdapterParams(d=" + std::to_string(p.d()) + ", r=" + std::to_string(p.r()) +
                   ", s=" + std::to_string(p.s) + ")";
        });

    m.def(
        "forward", [](const AdapterParams& p, const Array& z) { return from_vec(forward(p, to_vec(z)).y); },
        py::arg("params"), py::arg("z"), "Adapter output y for one feature vector.");
    m.def(
        "backward",
        [](const AdapterParams& p, const Array& z, const Array& dy) {
            const ForwardTrace t = forward(p, to_vec(z));
            const BackwardResult b = backward(p, t, to_vec(dy));
            py::dict d = grads_dict(b.grads);
            d["z"] = from_vec(b.dz);
            return d;
        },
        py::arg("params"), py::arg("z"), py::arg("dy"), "Gradients of <dy, y> for every parameter and for z.");
    m.def("param_count", py::overload_cast<std::size_t, std::size_t>(&param_count), py::arg("d"), py::arg("r"));
    m.def("wide_bottleneck", &wide_bottleneck, py::arg("d"), py::arg("r"));
    m.def(
        "save_checkpoint", [](const std::string& path, const AdapterParams& p) { write_checkpoint_file(path, p); },
        py::arg("path"), py::arg("params"));
    m.def(
        "load_checkpoint", [](const std::string& path) { return read_checkpoint_file(path).params; },
        py::arg("path"));

    // --- init ------------------------------------------------------------------
    m.def(
        "lai_init",
        [](std::size_t d, std::size_t r, double sigma_down, double sigma_mid, double sigma_up, double s_lo,
           double s_hi, std::uint64_t seed) {
            InitConfig cfg;
            cfg.sigma_down = sigma_down;
            cfg.sigma_mid = sigma_mid;
            cfg.sigma_up = sigma_up;
            cfg.s_lo = s_lo;
            cfg.s_hi = s_hi;
            cfg.seed = seed;
            return lai_init(d, r, cfg);
        },
        py::arg("d"), py::arg("r"), py::arg("sigma_down") = 0.02, py::arg("sigma_mid") = 0.01,
        py::arg("sigma_up") = 0.005, py::arg("s_lo") = 0.075, py::arg("s_hi") = 0.225, py::arg("seed") = 0);
    m.def("standard_init", &standard_init, py::arg("d"), py::arg("r"), py::arg("sigma"), py::arg("s0"),
          py::arg("seed") = 0);

    // --- records ----------------------------------------------------------------
    py::class_<PromptTable>(m, "PromptTable")
        .def(py::init([](const std::vector<std::string>& names, const std::vector<Array>& features) {
                 if (names.size() != features.size()) throw ShapeError("names and features differ in length");
                 std::vector<PromptEntry> entries;
                 for (std::size_t i = 0; i < names.size(); ++i) entries.push_back({names[i], to_vec(features[i]), {}});
                 return PromptTable(std::move(entries));
             }),
             py::arg("names"), py::arg("features"))
        .def("__len__", &PromptTable::size)
        .def_property_readonly("dim", &PromptTable::dim)
        .def_property_readonly("names",
                               [](const PromptTable& t) {
                                   std::vector<std::string> out;
                                   for (const auto& e : t.entries()) out.push_back(e.name);
                                   return out;
                               })
        .def("feature", [](const PromptTable& t, std::size_t i) {
            if (i >= t.size()) throw py::index_error();
            return from_vec(t[i].feature);
        });

    py::class_<EmbeddingRecord>(m, "EmbeddingRecord")
        .def(py::init([](std::string id, std::string cls, const std::string& condition, std::size_t view,
                         const Array& embedding) {
                 return EmbeddingRecord{std::move(id), std::move(cls), condition_from(condition), view,
                                        to_vec(embedding)};
             }),
             py::arg("id"), py::arg("class_name"), py::arg("condition") = "gt_mask", py::arg("view") = 0,
             py::arg("embedding"))
        .def_readonly("id", &EmbeddingRecord::id)
        .def_readonly("class_name", &EmbeddingRecord::class_name)
        .def_property_readonly("condition",
                               [](const EmbeddingRecord& r) { return std::string(to_string(r.condition)); })
        .def_readonly("view", &EmbeddingRecord::view)
        .def_property_readonly("embedding", [](const EmbeddingRecord& r) { return from_vec(r.embedding); });

    // --- dataio -----------------------------------------------------------------
    m.def("load_prompts", &load_prompts, py::arg("path"));
    m.def("save_prompts", &save_prompts, py::arg("path"), py::arg("table"));
    m.def("load_embeddings", &load_embeddings, py::arg("path"));
    m.def(
        "save_embeddings",
        [](const std::string& path, const std::vector<EmbeddingRecord>& records) { save_embeddings(path, records); },
        py::arg("path"), py::arg("records"));
    m.def(
        "load_mask", [](const std::string& path) { return from_mask(load_mask_pgm(path)); }, py::arg("path"));
    m.def(
        "load_gt_mask", [](const std::string& path) { return from_mask(load_gt_mask_pgm(path)); }, py::arg("path"));
    m.def(
        "save_mask", [](const std::string& path, const Array& mask) { save_mask_pgm(path, to_mask(mask)); },
        py::arg("path"), py::arg("mask"));
    m.def(
        "parse_pgm", [](const py::bytes& data) { return from_mask(parse_pgm(std::string(data))); },
        py::arg("data"));
    m.def(
        "encode_pgm", [](const Array& mask) { return py::bytes(encode_pgm(to_mask(mask))); }, py::arg("mask"));
    m.def("prompt_for_class", &prompt_for_class, py::arg("class_name"));
    m.def("file_digest", &file_digest, py::arg("path"));

    // --- training ---------------------------------------------------------------
    m.def(
        "cosine_logits",
        [](const std::vector<Array>& features, const Array& img, double tau) {
            const std::vector<Vec> f = to_vecs(features);
            return from_vec(cosine_logits(f, to_vec(img), tau));
        },
        py::arg("features"), py::arg("img"), py::arg("tau") = 0.01);
    m.def(
        "class_logits",
        [](const AdapterParams& p, const Array& img, const PromptTable& prompts, double tau) {
            return from_vec(class_logits(p, to_vec(img), prompts, tau));
        },
        py::arg("params"), py::arg("img"), py::arg("prompts"), py::arg("tau") = 0.01);
    m.def(
        "cross_entropy",
        [](const Array& logits, std::size_t true_idx) {
            const CrossEntropy ce = cross_entropy(to_vec(logits), true_idx);
            return py::make_tuple(ce.loss, from_vec(ce.dlogits));
        },
        py::arg("logits"), py::arg("true_idx"), "Returns (loss, dloss/dlogits).");
    m.def(
        "softmax", [](const Array& logits, double tau) { return from_vec(softmax_temp(to_vec(logits), tau)); },
        py::arg("logits"), py::arg("tau") = 1.0);
    m.def(
        "batch_loss_and_grad",
        [](const AdapterParams& p, const PromptTable& prompts, const std::vector<Array>& images,
           const std::vector<std::size_t>& labels, double tau) {
            if (images.size() != labels.size()) throw ShapeError("images and labels differ in length");
            const std::vector<Vec> imgs = to_vecs(images);
            std::vector<LabeledEmbedding> batch;
            for (std::size_t i = 0; i < imgs.size(); ++i) batch.push_back({imgs[i], labels[i]});
            const BatchResult r = batch_loss_and_grad(p, prompts, batch, tau);
            return py::make_tuple(r.mean_loss, grads_dict(r.grads));
        },
        py::arg("params"), py::arg("prompts"), py::arg("images"), py::arg("labels"), py::arg("tau") = 0.01);
    m.def(
        "train",
        [](const AdapterParams& p0, const PromptTable& prompts, const std::vector<EmbeddingRecord>& data, double lr,
           double momentum, double weight_decay, std::size_t epochs, std::size_t batch_size, double tau,
           std::uint64_t seed, bool decay_scale) {
            TrainConfig cfg;
            cfg.lr = lr;
            cfg.momentum = momentum;
            cfg.weight_decay = weight_decay;
            cfg.epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.tau = tau;
            cfg.seed = seed;
            cfg.decay_scale = decay_scale;
            TrainResult res;
            {
                py::gil_scoped_release release;
                res = train(p0, prompts, data, cfg);
            }
            py::list history;
            for (const auto& e : res.history) {
                py::dict h;
                h["epoch"] = e.epoch;
                h["mean_loss"] = e.mean_loss;
                h["train_accuracy"] = e.train_accuracy;
                history.append(h);
            }
            return py::make_tuple(res.params, history);
        },
        py::arg("params"), py::arg("prompts"), py::arg("data"), py::arg("lr") = 0.0035, py::arg("momentum") = 0.9,
        py::arg("weight_decay") = 1e-5, py::arg("epochs") = 10, py::arg("batch_size") = 16, py::arg("tau") = 0.01,
        py::arg("seed") = 0, py::arg("decay_scale") = false, "Returns (trained params, per-epoch history).");

    // --- classification -----------------------------------------------------------
    m.def(
        "classify",
        [](const AdapterParams& p, const PromptTable& prompts, const Array& img, double tau) {
            const Prediction pr = classify(p, prompts, to_vec(img), tau);
            return py::make_tuple(pr.pred_idx, from_vec(pr.probs));
        },
        py::arg("params"), py::arg("prompts"), py::arg("img"), py::arg("tau") = 0.01,
        "Returns (predicted index, class probabilities).");
    m.def(
        "classify_frozen",
        [](const PromptTable& prompts, const Array& img, double tau) {
            const Prediction pr = classify_frozen(prompts, to_vec(img), tau);
            return py::make_tuple(pr.pred_idx, from_vec(pr.probs));
        },
        py::arg("prompts"), py::arg("img"), py::arg("tau") = 0.01);
    m.def(
        "tta_aggregate",
        [](const std::vector<Array>& view_logits, double tau, const std::string& weighting) {
            const std::vector<Vec> v = to_vecs(view_logits);
            return from_vec(tta_aggregate(v, tau, weighting_from(weighting)));
        },
        py::arg("view_logits"), py::arg("tau") = 0.01, py::arg("weighting") = "tempered");
    m.def(
        "evaluate_accuracy",
        [](const AdapterParams& p, const PromptTable& prompts, const std::vector<EmbeddingRecord>& records,
           std::optional<std::string> condition, bool tta, double tau, const std::string& weighting) {
            EvalOptions opts;
            if (condition) opts.condition = condition_from(*condition);
            opts.tta = tta;
            opts.tau = tau;
            opts.weighting = weighting_from(weighting);
            const std::vector<ViewSet> sets = make_view_sets(records);
            const AccuracyReport r = evaluate_accuracy(p, prompts, sets, opts);
            py::dict out;
            out["accuracy"] = r.accuracy;
            out["correct"] = r.correct;
            out["total"] = r.total;
            py::dict per_class;
            for (const auto& [name, c] : r.per_class) per_class[py::str(name)] = c.accuracy();
            out["per_class"] = per_class;
            out["confusion"] = r.confusion;
            py::list preds;
            for (const auto& pr : r.predictions) {
                py::dict d;
                d["id"] = pr.id;
                d["condition"] = std::string(to_string(pr.condition));
                d["pred_class"] = pr.pred_class;
                d["prob_top1"] = pr.prob_top1;
                d["true_class"] = pr.true_class;
                d["correct"] = pr.correct;
                preds.append(d);
            }
            out["predictions"] = preds;
            return out;
        },
        py::arg("params"), py::arg("prompts"), py::arg("records"), py::arg("condition") = std::nullopt,
        py::arg("tta") = false, py::arg("tau") = 0.01, py::arg("weighting") = "tempered");

    // --- metrics ------------------------------------------------------------------
    m.def(
        "iou", [](const Array& pred, const Array& gt) { return iou(to_mask(pred), to_mask(gt)); }, py::arg("pred"),
        py::arg("gt"), "IoU of a binary prediction.");
    m.def(
        "mae", [](const Array& pred, const Array& gt) { return mae(to_mask(pred), to_mask(gt)); }, py::arg("pred"),
        py::arg("gt"));
    m.def(
        "f_beta",
        [](const Array& pred, const Array& gt, double beta2) { return f_beta(to_mask(pred), to_mask(gt), beta2); },
        py::arg("pred"), py::arg("gt"), py::arg("beta2") = 0.3, "F-beta of a binary prediction.");
    m.def(
        "f_weighted_beta",
        [](const Array& pred, const Array& gt) { return f_weighted_beta(to_mask(pred), to_mask(gt)); },
        py::arg("pred"), py::arg("gt"));
    m.def(
        "s_measure", [](const Array& pred, const Array& gt) { return s_measure(to_mask(pred), to_mask(gt)); },
        py::arg("pred"), py::arg("gt"));
    m.def(
        "e_measure", [](const Array& pred, const Array& gt) { return e_measure(to_mask(pred), to_mask(gt)); },
        py::arg("pred"), py::arg("gt"), "E-measure of a binary prediction.");
    m.def(
        "segmentation_metrics",
        [](const Array& pred, const Array& gt) { return metric_dict(segmentation_metrics(to_mask(pred), to_mask(gt))); },
        py::arg("pred"), py::arg("gt"));
    m.def(
        "class_aware_report",
        [](const std::vector<py::dict>& samples, bool gated) {
            std::vector<EvalPair> pairs;
            for (const auto& s : samples) {
                pairs.push_back({s["id"].cast<std::string>(), to_mask(s["pred"].cast<Array>()),
                                 to_mask(s["gt"].cast<Array>()), s["pred_class"].cast<std::string>(),
                                 s["true_class"].cast<std::string>()});
            }
            const MetricReport r = class_aware_report(pairs, {}, gated ? Gating::class_aware : Gating::none);
            py::dict out = metric_dict(r.mean);
            out["count"] = r.count;
            out["accuracy"] = r.accuracy;
            return out;
        },
        py::arg("samples"), py::arg("gated") = true,
        "samples: dicts with id, pred, gt, pred_class, true_class. Returns mean metrics.");

    // --- synthetic data and audits --------------------------------------------------
    m.def(
        "synth_generate",
        [](const std::string& out_dir, std::size_t classes, std::size_t train_per_class, std::size_t test_per_class,
           std::size_t dim, std::optional<double> noise, std::uint64_t seed) {
            SynthConfig cfg;
            cfg.classes = classes;
            cfg.train_per_class = train_per_class;
            cfg.test_per_class = test_per_class;
            cfg.dim = dim;
            cfg.noise = noise;
            cfg.seed = seed;
            const SynthDataset ds = synth_generate(cfg);
            write_synth(ds, out_dir);
            py::dict info;
            info["noise"] = ds.info.noise;
            info["closed_form_ideal_accuracy"] = ds.info.closed_form_ideal_accuracy;
            info["baseline_test_accuracy"] = ds.info.baseline_test_accuracy;
            info["ideal_test_accuracy"] = ds.info.ideal_test_accuracy;
            return info;
        },
        py::arg("out_dir"), py::arg("classes") = 5, py::arg("train_per_class") = 40, py::arg("test_per_class") = 20,
        py::arg("dim") = 32, py::arg("noise") = std::nullopt, py::arg("seed") = 0,
        "Writes prompts.jsonl, train.jsonl, test.jsonl and synth.json; returns the sidecar values.");
    m.def(
        "gradcheck",
        [](std::size_t configs, std::uint64_t seed, double h) {
            GradcheckConfig cfg;
            cfg.configs = configs;
            cfg.seed = seed;
            cfg.h = h;
            const GradcheckResult r = run_gradcheck(cfg);
            py::dict out;
            out["checked"] = r.checked;
            out["entries"] = r.entries;
            out["failures"] = r.failures.size();
            out["max_rel_error"] = r.max_rel_error;
            return out;
        },
        py::arg("configs") = 100, py::arg("seed") = 0, py::arg("h") = 1e-3);

    // --- command line -----------------------------------------------------------------
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv{"camadapt"};
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one camadapt command line in-process. Returns (exit code, stdout, stderr).");
}
