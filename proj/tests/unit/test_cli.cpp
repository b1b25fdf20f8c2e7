#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "camadapt/cli.hpp"
#include "temp_dir.hpp"

using namespace camadapt;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "camadapt");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Small synthetic set plus a two-epoch config so the CLI tests stay fast.
void make_data(const TempDir& dir) {
    REQUIRE(run({"synth", "--out", dir.file("d"), "--classes", "3", "--train", "10", "--test", "5", "--dim", "12",
                 "--seed", "1"})
                .code == kExitOk);
}

}  // namespace

TEST_CASE("cli: usage errors exit with 2") {
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"frobnicate"}).code == kExitUsage);
    CHECK(run({"train", "--prompts", "p.jsonl"}).code == kExitUsage);
    CHECK(run({"classify", "--data", "x.jsonl"}).code == kExitUsage);
    CHECK(run({"gradcheck", "--configs", "many"}).code == kExitUsage);
}

TEST_CASE("cli: missing input files exit with 3 and name the path") {
    TempDir dir;
    const CliResult r = run({"seg-eval", "--manifest", dir.file("nowhere.json")});
    CHECK(r.code == kExitIo);
    CHECK(r.err.find("nowhere.json") != std::string::npos);
}

TEST_CASE("cli: invalid data exits with 4") {
    TempDir dir;
    dir.write("p.jsonl", R"({"class": "a", "feature": [1, 0]})" "\n" R"({"class": "b", "feature": [0, 1]})" "\n");
    dir.write("e.jsonl", R"({"id": "x", "class": "a", "condition": "gt_mask", "view": 0, "embedding": [0.5, 0.5]})" "\n");
    const CliResult r = run({"classify", "--prompts", dir.file("p.jsonl"), "--data", dir.file("e.jsonl")});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("norm") != std::string::npos);

    CHECK(run({"train", "--prompts", dir.file("p.jsonl"), "--data", dir.file("e.jsonl"), "--out", dir.file("a.json"),
               "--set", "train.epochs=-2"})
              .code == kExitValidation);
}

TEST_CASE("cli: gradcheck exit codes") {
    const CliResult ok = run({"gradcheck", "--configs", "20", "--step", "1e-5"});
    CHECK(ok.code == kExitOk);
    CHECK(ok.out.find("0 failures") != std::string::npos);
    const CliResult strict = run({"gradcheck", "--configs", "20", "--tol", "1e-14"});
    CHECK(strict.code == kExitGradcheck);
}

TEST_CASE("cli: synth, train, classify") {
    TempDir dir;
    make_data(dir);
    const std::string d = dir.file("d");
    const CliResult tr = run({"train", "--prompts", d + "/prompts.jsonl", "--data", d + "/train.jsonl", "--out",
                              dir.file("a.adapter.json"), "--config", d + "/config.json", "--set", "train.epochs=2"});
    REQUIRE(tr.code == kExitOk);
    CHECK(tr.out.find("epoch 2 loss") != std::string::npos);

    const auto ck = nlohmann::json::parse(slurp(dir.file("a.adapter.json")));
    CHECK(ck.at("meta").at("history").size() == 2);
    const auto run_json = nlohmann::json::parse(slurp(dir.file("a.adapter.json.run.json")));
    CHECK(run_json.at("command") == "train");

    // Prompts resolved from the checkpoint.
    const CliResult stdout_run =
        run({"classify", "--adapter", dir.file("a.adapter.json"), "--data", d + "/test.jsonl", "--tta"});
    REQUIRE(stdout_run.code == kExitOk);
    CHECK(stdout_run.err.find("accuracy") != std::string::npos);
    CHECK(stdout_run.err.find("tta=on") != std::string::npos);
    std::istringstream lines(stdout_run.out);
    std::string first;
    std::getline(lines, first);
    const auto pred = nlohmann::json::parse(first);
    for (const char* key : {"id", "condition", "pred_class", "prob_top1", "true_class", "correct"}) {
        CHECK(pred.contains(key));
    }

    const CliResult file_run = run({"classify", "--adapter", dir.file("a.adapter.json"), "--prompts",
                                    d + "/prompts.jsonl", "--data", d + "/test.jsonl", "--tta", "--out",
                                    dir.file("pred.jsonl")});
    REQUIRE(file_run.code == kExitOk);
    CHECK(slurp(dir.file("pred.jsonl")) == stdout_run.out);

    const CliResult frozen =
        run({"classify", "--prompts", d + "/prompts.jsonl", "--data", d + "/test.jsonl", "--condition", "gt_mask"});
    CHECK(frozen.code == kExitOk);
    CHECK(frozen.err.find("condition=gt_mask") != std::string::npos);

    // Edited prompt file no longer matches the recorded digest.
    dir.write("d/prompts.jsonl", slurp(d + "/prompts.jsonl") + "\n");
    CHECK(run({"classify", "--adapter", dir.file("a.adapter.json"), "--data", d + "/test.jsonl"}).code ==
          kExitValidation);
}

TEST_CASE("cli: identical runs produce identical bytes") {
    TempDir dir;
    make_data(dir);
    const std::string d = dir.file("d");
    for (const char* name : {"a1.json", "a2.json"}) {
        REQUIRE(run({"train", "--prompts", d + "/prompts.jsonl", "--data", d + "/train.jsonl", "--out", dir.file(name),
                     "--config", d + "/config.json", "--set", "train.epochs=2", "--seed", "3"})
                    .code == kExitOk);
    }
    CHECK(slurp(dir.file("a1.json")) == slurp(dir.file("a2.json")));

    TempDir other;
    make_data(other);
    CHECK(slurp(dir.file("d/train.jsonl")) == slurp(other.file("d/train.jsonl")));
}
