#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("LLMCAL_CLI");
    REQUIRE_MESSAGE(p != nullptr, "LLMCAL_CLI must point at the built binary");
    return p;
}

int run_cli(const std::string& args, const std::string& log = "cli.log") {
    const std::string cmd = cli_path() + " " + args + " >" + log + " 2>" + log + ".err";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct Workspace {
    fs::path dir;

    Workspace() {
        dir = fs::temp_directory_path() / "llmcal-cli-test";
        fs::remove_all(dir);
        fs::create_directories(dir);

        std::ofstream cfg(dir / "config.json");
        cfg << R"({
  "label_space": {
    "labels": ["Positive", "Negative"],
    "token_variants": [["Positive", "Pos"], ["Negative", "Neg"]]
  },
  "experiment": {"test_cap": 20, "val_cap": 10, "master_seed": 7},
  "template": "trec"
})";

        std::ofstream data(dir / "data.jsonl");
        for (int i = 0; i < 40; ++i) {
            data << R"({"id": "s)" << i << R"(", "text": "sentence )" << i
                 << R"( ?", "label": ")" << (i % 2 == 0 ? "Positive" : "Negative") << R"("})"
                 << "\n";
        }

        std::ofstream mock(dir / "mock.json");
        mock << R"({"seed": 19, "noise_amplitude": 0.12,
                    "true_weight_mean": 0.7, "true_weight_concentration": 12.0})";
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("cli pipeline: evaluate, aggregate, calibrate, report") {
    Workspace ws;
    const std::string common = "--config " + ws.path("config.json") + " --dataset " +
                               ws.path("data.jsonl") + " --backend mock:" + ws.path("mock.json");

    CHECK(run_cli("evaluate " + common + " --mode comparative --j 4 --out " +
                  ws.path("test_run.json")) == 0);
    CHECK(run_cli("evaluate " + common + " --mode comparative --j 4 --replicate 2 --out " +
                  ws.path("val_run.json")) == 0);
    CHECK(fs::exists(ws.path("test_run.json")));

    CHECK(run_cli("aggregate " + ws.path("test_run.json") + " --out " + ws.path("agg.json") +
                  " --trend " + ws.path("trend.json")) == 0);
    const auto trend = nlohmann::json::parse(slurp(ws.path("trend.json")));
    CHECK(trend["rows"].size() == 4);

    CHECK(run_cli("calibrate --test " + ws.path("test_run.json") + " --val " +
                  ws.path("val_run.json") + " --kind vector --out " + ws.path("cal.json") +
                  " --report " + ws.path("cal_report.json")) == 0);
    const auto cal = nlohmann::json::parse(slurp(ws.path("cal.json")));
    CHECK(cal["schema"] == "llmcal.calibrator/1");
    CHECK(cal["per_reference"].size() == 4);
    const auto cal_report = nlohmann::json::parse(slurp(ws.path("cal_report.json")));
    CHECK(cal_report.contains("before"));
    CHECK(cal_report.contains("after"));

    CHECK(run_cli("report " + ws.path("test_run.json") + " " + ws.path("agg.json") + " --out " +
                  ws.path("bundle.json") + " --csv-dir " + ws.path("csv")) == 0);
    const auto bundle = nlohmann::json::parse(slurp(ws.path("bundle.json")));
    CHECK(bundle["schema"] == "llmcal.bundle/1");
    CHECK(bundle["conditions"].size() == 2);  // raw + aggregated conditions
    CHECK(fs::exists(ws.path("csv/condition_1.csv")));
}

TEST_CASE("cli evaluation artifacts are deterministic") {
    Workspace ws;
    const std::string common = "--config " + ws.path("config.json") + " --dataset " +
                               ws.path("data.jsonl") + " --backend mock:" + ws.path("mock.json");
    CHECK(run_cli("evaluate " + common + " --out " + ws.path("a.json")) == 0);
    CHECK(run_cli("evaluate " + common + " --out " + ws.path("b.json")) == 0);
    CHECK(slurp(ws.path("a.json")) == slurp(ws.path("b.json")));
}

TEST_CASE("cli reports missing datasets as machine-readable errors with exit 2") {
    Workspace ws;
    const int code = run_cli("evaluate --config " + ws.path("config.json") +
                                 " --dataset " + ws.path("nope.jsonl") + " --backend mock:" +
                                 ws.path("mock.json") + " --out " + ws.path("x.json"),
                             "missing.log");
    CHECK(code == 2);
    const auto err = nlohmann::json::parse(slurp("missing.log.err"));
    CHECK(err["error"] == "io");
    CHECK(err["message"].get<std::string>().find("nope.jsonl") != std::string::npos);
}

TEST_CASE("cli simulate emits population, report, and csv") {
    Workspace ws;
    {
        std::ofstream spec(ws.path("scenario.json"));
        spec << R"({"n": 2000, "profile": "indiscriminate", "p_correct": 0.6,
                    "correct_conf": {"mean": 0.75, "concentration": 40.0},
                    "incorrect_conf": {"mean": 0.75, "concentration": 40.0},
                    "seed": 3})";
    }
    CHECK(run_cli("simulate --spec " + ws.path("scenario.json") + " --out " +
                  ws.path("pop.json") + " --report " + ws.path("sim_report.json") + " --csv " +
                  ws.path("reliability.csv")) == 0);
    const auto report = nlohmann::json::parse(slurp(ws.path("sim_report.json")));
    CHECK(report["report"]["n"] == 2000);
    CHECK(slurp(ws.path("reliability.csv"))
              .rfind("bin_lower,bin_upper,mean_confidence,accuracy,count\n", 0) == 0);
    const auto pop = nlohmann::json::parse(slurp(ws.path("pop.json")));
    CHECK(pop["schema"] == "llmcal.run/1");
    CHECK(pop["records"].size() == 2000);
}

TEST_CASE("cli rejects bad flag values at parse time") {
    Workspace ws;
    CHECK(run_cli("evaluate --config " + ws.path("config.json") + " --dataset " +
                  ws.path("data.jsonl") + " --mode sideways --out x.json") != 0);
    CHECK(run_cli("calibrate --test a --val b --kind diagonal") != 0);
}
