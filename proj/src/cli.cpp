#include "camadapt/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "camadapt/classification.hpp"
#include "camadapt/config.hpp"
#include "camadapt/dataio.hpp"
#include "camadapt/error.hpp"
#include "camadapt/gradcheck.hpp"
#include "camadapt/synth.hpp"
#include "io_util.hpp"

namespace camadapt {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Config layers shared by every subcommand that reads RunConfig.
struct ConfigFlags {
    std::string config_path;
    std::vector<std::string> assignments;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config with init.*, train.*, tta.*, metrics.* keys");
        sub->add_option("--set", assignments, "Override one config key, e.g. --set train.epochs=5");
        sub->add_option("--seed", seed, "Random seed for initialization and shuffling");
    }

    RunConfig resolve(RunConfig cfg = {}) const {
        if (!config_path.empty()) cfg.merge_file(config_path);
        for (const auto& a : assignments) cfg.set_from_assignment(a);
        if (seed) cfg.seed = *seed;
        return cfg;
    }
};

ordered_json file_list(const std::vector<std::string>& paths) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : paths) {
        ordered_json j;
        j["path"] = p;
        j["digest"] = file_digest(p);
        arr.push_back(std::move(j));
    }
    return arr;
}

void write_run_manifest(const std::string& path, const std::string& command, const ordered_json& config,
                        std::uint64_t seed, const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs, const ordered_json& report) {
    ordered_json j;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = file_list(inputs);
    j["outputs"] = file_list(outputs);
    j["report"] = report;
    detail::write_text_file(path, j.dump(2) + "\n");
}

std::optional<Condition> condition_arg(const std::string& tag) {
    if (tag.empty()) return std::nullopt;
    const auto c = parse_condition(tag);
    if (!c) throw UsageError("unknown condition '" + tag + "' (expected gt_mask, all_black or pred_mask)");
    return c;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
    std::string prompts;
    std::string data;
    std::string out;
    std::string condition;
    std::optional<std::size_t> rank;
    std::string init;
    ConfigFlags flags;
};

int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = a.flags.resolve();
    if (!a.init.empty()) cfg.set("init.mode", a.init);
    if (a.rank) cfg.rank = *a.rank;
    cfg.validate();
    const auto cond = condition_arg(a.condition);

    const PromptTable prompts = load_prompts(a.prompts);
    std::vector<EmbeddingRecord> data = load_embeddings(a.data);
    if (cond) std::erase_if(data, [&](const EmbeddingRecord& r) { return r.condition != *cond; });
    if (data.empty()) throw DataError(a.data + ": no training records" + (cond ? " with that condition" : ""));
    if (prompts.empty()) throw DataError(a.prompts + ": prompt table is empty");

    const std::size_t d = prompts.dim();
    const std::size_t r = cfg.effective_rank(d);
    if (wide_bottleneck(d, r)) {
        err << "warning: rank " << r << " is at least half of d=" << d << "; the bottleneck barely compresses\n";
    }
    const AdapterParams p0 = cfg.initial_params(d);

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    const TrainResult result = train(p0, prompts, data, tc, [&](const EpochStats& s) {
        out << "epoch " << s.epoch << " loss " << fixed(s.mean_loss, 6) << " train_acc " << fixed(s.train_accuracy, 4)
            << "\n";
    });

    ordered_json history = ordered_json::array();
    for (const auto& s : result.history) {
        ordered_json h;
        h["epoch"] = s.epoch;
        h["mean_loss"] = s.mean_loss;
        h["train_accuracy"] = s.train_accuracy;
        history.push_back(std::move(h));
    }

    const fs::path out_dir = fs::absolute(a.out).parent_path();
    nlohmann::json meta;
    meta["seed"] = cfg.seed;
    meta["config"] = cfg.to_json();
    meta["initial_s"] = p0.s;
    meta["prompts"] = {{"path", fs::relative(fs::absolute(a.prompts), out_dir).generic_string()},
                       {"digest", file_digest(a.prompts)}};
    meta["history"] = history;
    write_checkpoint_file(a.out, result.params, meta);
    out << "wrote " << a.out << " (d=" << d << ", r=" << r << ", " << param_count(result.params)
        << " parameters)\n";

    ordered_json report;
    report["d"] = d;
    report["r"] = r;
    report["param_count"] = param_count(result.params);
    report["final_s"] = result.params.s;
    report["history"] = history;
    write_run_manifest(a.out + ".run.json", "train", cfg.to_json(), cfg.seed, {a.prompts, a.data}, {a.out}, report);
    return kExitOk;
}

// --- classify --------------------------------------------------------------

struct ClassifyArgs {
    std::string adapter;
    std::string prompts;
    std::string data;
    std::string out;
    std::string condition;
    bool tta = false;
    ConfigFlags flags;
};

int run_classify(const ClassifyArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = a.flags.resolve();
    if (a.tta) cfg.tta = true;
    cfg.validate();
    const auto cond = condition_arg(a.condition);

    std::string prompts_path = a.prompts;
    std::optional<AdapterParams> params;
    std::vector<std::string> inputs;
    if (!a.adapter.empty()) {
        const Checkpoint ck = read_checkpoint_file(a.adapter);
        params = ck.params;
        inputs.push_back(a.adapter);
        if (prompts_path.empty()) {
            if (!ck.meta.contains("prompts") || !ck.meta["prompts"].contains("path") ||
                !ck.meta["prompts"]["path"].is_string()) {
                throw UsageError("--prompts is required: " + a.adapter + " does not record its prompt file");
            }
            const fs::path base = fs::absolute(a.adapter).parent_path();
            prompts_path = (base / ck.meta["prompts"]["path"].get<std::string>()).lexically_normal().string();
            const auto& digest = ck.meta["prompts"]["digest"];
            if (digest.is_string() && file_digest(prompts_path) != digest.get<std::string>()) {
                throw DataError(prompts_path + ": contents differ from the prompt file used for training");
            }
        }
    } else if (prompts_path.empty()) {
        throw UsageError("classify needs --adapter, --prompts, or both");
    }
    inputs.push_back(prompts_path);
    inputs.push_back(a.data);

    const PromptTable prompts = load_prompts(prompts_path);
    const std::vector<EmbeddingRecord> records = load_embeddings(a.data);
    const std::vector<ViewSet> sets = make_view_sets(records);
    if (!params) params = AdapterParams::zeros(prompts.dim(), 1);

    EvalOptions opts;
    opts.condition = cond;
    opts.tta = cfg.tta;
    opts.tau = cfg.train.tau;
    opts.weighting = cfg.tta_weighting;
    const AccuracyReport rep = evaluate_accuracy(*params, prompts, sets, opts);

    std::string lines;
    for (const auto& p : rep.predictions) {
        ordered_json j;
        j["id"] = p.id;
        j["condition"] = to_string(p.condition);
        j["pred_class"] = p.pred_class;
        j["prob_top1"] = p.prob_top1;
        j["true_class"] = p.true_class;
        j["correct"] = p.correct;
        lines += j.dump() + "\n";
    }
    const std::string summary = "accuracy " + fixed(rep.accuracy, 4) + " (" + std::to_string(rep.correct) + "/" +
                                std::to_string(rep.total) + ") condition=" +
                                (cond ? std::string(to_string(*cond)) : std::string("all")) +
                                " tta=" + (cfg.tta ? "on" : "off") + "\n";

    if (a.out.empty()) {
        out << lines;
        err << summary;
        return kExitOk;
    }
    detail::write_text_file(a.out, lines);
    out << summary;

    ordered_json report;
    report["accuracy"] = rep.accuracy;
    report["total"] = rep.total;
    report["correct"] = rep.correct;
    report["condition"] = cond ? std::string(to_string(*cond)) : std::string("all");
    ordered_json per_class;
    for (const auto& [name, acc] : rep.per_class) {
        per_class[name] = {{"total", acc.total}, {"correct", acc.correct}, {"accuracy", acc.accuracy()}};
    }
    report["per_class"] = per_class;
    report["confusion"] = rep.confusion;
    write_run_manifest(a.out + ".run.json", "classify", cfg.to_json(), cfg.seed, inputs, {a.out}, report);
    return kExitOk;
}

// --- seg-eval --------------------------------------------------------------

struct SegEvalArgs {
    std::string manifest;
    std::string out;
    ConfigFlags flags;
};

ordered_json metric_json(const MetricValues& v) {
    ordered_json j;
    j["cSm"] = v.sm;
    j["cFwb"] = v.wfm;
    j["cMAE"] = v.mae;
    j["cFb"] = v.fm;
    j["cEm"] = v.em;
    j["cIoU"] = v.iou;
    return j;
}

int run_seg_eval(const SegEvalArgs& a, std::ostream& out, std::ostream&) {
    RunConfig cfg = a.flags.resolve();
    cfg.validate();
    const Manifest manifest = load_manifest(a.manifest);
    const std::vector<EvalPair> pairs = load_eval_pairs(manifest);
    const MetricReport rep = class_aware_report(pairs, cfg.metrics, cfg.gating);
    out << format_report_table(rep);
    if (a.out.empty()) return kExitOk;

    ordered_json report;
    report["count"] = rep.count;
    report["correct"] = rep.correct;
    report["accuracy"] = rep.accuracy;
    report["gating"] = to_string(cfg.gating);
    report["mean"] = metric_json(rep.mean);
    ordered_json samples = ordered_json::array();
    for (const auto& s : rep.samples) {
        ordered_json j;
        j["id"] = s.id;
        j["class_correct"] = s.class_correct;
        j["metrics"] = metric_json(s.values);
        samples.push_back(std::move(j));
    }
    report["samples"] = samples;
    detail::write_text_file(a.out, report.dump(2) + "\n");

    std::vector<std::string> inputs{a.manifest};
    for (const auto& e : manifest.entries) {
        inputs.push_back(e.pred_mask_path);
        inputs.push_back(e.gt_mask_path);
    }
    ordered_json summary;
    summary["count"] = rep.count;
    summary["accuracy"] = rep.accuracy;
    summary["mean"] = metric_json(rep.mean);
    write_run_manifest(a.out + ".run.json", "seg-eval", cfg.to_json(), cfg.seed, inputs, {a.out}, summary);
    return kExitOk;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
    std::string out;
    SynthConfig cfg;
    std::optional<double> noise;
};

int run_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
    SynthConfig sc = a.cfg;
    sc.noise = a.noise;
    const SynthDataset ds = synth_generate(sc);
    write_synth(ds, a.out);
    const fs::path dir(a.out);
    const RunConfig run = RunConfig::desk_scale();
    detail::write_text_file((dir / "config.json").string(), run.to_json().dump(2) + "\n");

    std::vector<std::string> outputs;
    for (const char* name : {"prompts.jsonl", "train.jsonl", "test.jsonl", "synth.json", "config.json"}) {
        outputs.push_back((dir / name).string());
    }
    ordered_json report;
    report["classes"] = sc.classes;
    report["train_per_class"] = sc.train_per_class;
    report["test_per_class"] = sc.test_per_class;
    report["dim"] = sc.dim;
    report["noise"] = ds.info.noise;
    report["mixing"] = sc.mixing;
    report["test_views"] = sc.test_views;
    report["view_jitter"] = sc.view_jitter;
    report["target_ideal_accuracy"] = sc.target_ideal_accuracy;
    write_run_manifest((dir / "run.json").string(), "synth", report, sc.seed, {}, outputs,
                       ordered_json::parse(format_synth_info(ds.info)));

    out << "noise " << fixed(ds.info.noise, 6) << " closed-form ideal " << fixed(ds.info.closed_form_ideal_accuracy, 4)
        << " baseline " << fixed(ds.info.baseline_test_accuracy, 4) << " ideal adapter "
        << fixed(ds.info.ideal_test_accuracy, 4) << "\n";
    out << "wrote " << ds.train.size() << " train and " << ds.test.size() << " test records to " << a.out << "\n";
    return kExitOk;
}

// --- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
    GradcheckConfig cfg;
    std::string out;
};

int run_gradcheck_cmd(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
    const GradcheckResult res = run_gradcheck(a.cfg);
    out << "gradcheck: " << res.checked << " configs checked, " << res.skipped << " skipped near a ReLU kink, "
        << res.entries << " entries, max rel error " << res.max_rel_error << ", " << res.failures.size()
        << " failures\n";
    for (const auto& f : res.failures) {
        err << "  config " << f.config << " " << f.param << ": analytic " << f.analytic << " numeric " << f.numeric
            << "\n";
    }
    if (!a.out.empty()) {
        ordered_json j;
        j["configs"] = a.cfg.configs;
        j["seed"] = a.cfg.seed;
        j["h"] = a.cfg.h;
        j["rel_tol"] = a.cfg.rel_tol;
        j["checked"] = res.checked;
        j["skipped"] = res.skipped;
        j["entries"] = res.entries;
        j["max_rel_error"] = res.max_rel_error;
        j["failures"] = res.failures.size();
        detail::write_text_file(a.out, j.dump(2) + "\n");
    }
    return res.passed() ? kExitOk : kExitGradcheck;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bottleneck text adapter toolkit for open-vocabulary camouflaged-object classification", "camadapt"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train an adapter on prompt features and image embeddings");
    train_cmd->add_option("--prompts", ta.prompts, "Prompt feature file (JSONL)")->required();
    train_cmd->add_option("--data", ta.data, "Training embeddings (JSONL)")->required();
    train_cmd->add_option("--out", ta.out, "Checkpoint to write (*.adapter.json)")->required();
    train_cmd->add_option("--condition", ta.condition, "Train only on records with this condition");
    train_cmd->add_option("--rank", ta.rank, "Bottleneck rank (overrides init.rank)");
    train_cmd->add_option("--init", ta.init, "Initialization: lai or standard (overrides init.mode)");
    ta.flags.attach(train_cmd);

    ClassifyArgs ca;
    auto* classify_cmd = app.add_subcommand("classify", "Classify embeddings and report top-1 accuracy");
    classify_cmd->add_option("--adapter", ca.adapter, "Checkpoint; omit to score the frozen baseline");
    classify_cmd->add_option("--prompts", ca.prompts, "Prompt feature file (default: the one recorded in the checkpoint)");
    classify_cmd->add_option("--data", ca.data, "Embeddings to classify (JSONL)")->required();
    classify_cmd->add_option("--out", ca.out, "Predictions file (JSONL); stdout when omitted");
    classify_cmd->add_option("--condition", ca.condition, "Only score records with this condition");
    classify_cmd->add_flag("--tta", ca.tta, "Aggregate all views with confidence-weighted voting");
    ca.flags.attach(classify_cmd);

    SegEvalArgs sa;
    auto* seg_cmd = app.add_subcommand("seg-eval", "Class-aware segmentation metrics from a mask manifest");
    seg_cmd->add_option("--manifest", sa.manifest, "Manifest JSON")->required();
    seg_cmd->add_option("--out", sa.out, "JSON report to write");
    sa.flags.attach(seg_cmd);

    SynthArgs ya;
    auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic separable dataset");
    synth_cmd->add_option("--out", ya.out, "Output directory")->required();
    synth_cmd->add_option("--classes", ya.cfg.classes, "Number of classes")->capture_default_str();
    synth_cmd->add_option("--train", ya.cfg.train_per_class, "Training records per class")->capture_default_str();
    synth_cmd->add_option("--test", ya.cfg.test_per_class, "Test records per class")->capture_default_str();
    synth_cmd->add_option("--dim", ya.cfg.dim, "Embedding dimension")->capture_default_str();
    synth_cmd->add_option("--noise", ya.noise, "Noise std (default: calibrated from --target-accuracy)");
    synth_cmd->add_option("--target-accuracy", ya.cfg.target_ideal_accuracy, "Ideal accuracy used for calibration")
        ->capture_default_str();
    synth_cmd->add_option("--mixing", ya.cfg.mixing, "Weight of the neighbouring direction in each prompt")
        ->capture_default_str();
    synth_cmd->add_option("--views", ya.cfg.test_views, "Views per test record")->capture_default_str();
    synth_cmd->add_option("--jitter", ya.cfg.view_jitter, "Per-coordinate std of view perturbations")
        ->capture_default_str();
    synth_cmd->add_option("--seed", ya.cfg.seed, "Random seed")->capture_default_str();

    GradcheckArgs ga;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the adapter gradients");
    grad_cmd->add_option("--configs", ga.cfg.configs, "Random configurations")->capture_default_str();
    grad_cmd->add_option("--seed", ga.cfg.seed, "Random seed")->capture_default_str();
    grad_cmd->add_option("--tol", ga.cfg.rel_tol, "Relative tolerance")->capture_default_str();
    grad_cmd->add_option("--step", ga.cfg.h, "Finite-difference step")->capture_default_str();
    grad_cmd->add_option("--out", ga.out, "JSON summary to write");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return kExitUsage;
    }

    try {
        if (train_cmd->parsed()) return run_train(ta, out, err);
        if (classify_cmd->parsed()) return run_classify(ca, out, err);
        if (seg_cmd->parsed()) return run_seg_eval(sa, out, err);
        if (synth_cmd->parsed()) return run_synth(ya, out, err);
        if (grad_cmd->parsed()) return run_gradcheck_cmd(ga, out, err);
        err << app.help();
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace camadapt
