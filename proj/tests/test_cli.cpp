#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mcpad/cli.hpp"
#include "mcpad/error.hpp"
#include "test_util.hpp"

using namespace mcpad;
using namespace mcpad::cli;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mcpad");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text(e.path());
    return out;
}

// Fields of the "eval" row of a metrics.csv.
std::vector<double> eval_row(const fs::path& metrics) {
    std::istringstream in(read_text(metrics));
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("eval,", 0) != 0) continue;
        std::vector<double> out;
        std::istringstream fields(line.substr(5));
        std::string f;
        while (std::getline(fields, f, ',')) out.push_back(std::stod(f));
        return out;
    }
    return {};
}

// Small enough to run the classical chain in a few seconds.
std::string tiny_config() {
    return R"({
  "paths": {"data": "data", "output": "out"},
  "synth": {"bonafide_clients": 6, "frames_per_sample": 3, "image_size": 48,
            "attack_categories": [{"type": "print", "instruments": 3}, {"type": "rigidmask", "instruments": 3}]},
  "preprocess": {"out_size": 32, "left_eye": [11, 12.5], "right_eye": [21, 12.5], "mouth": [16, 24]},
  "features": {"lbp": {"grid_rows": 2, "grid_cols": 2}},
  "classifiers": {"lr": {"epochs": 50}, "svm": {"epochs": 50}},
  "mccnn": {"input_size": 32}
}
)";
}

}  // namespace

TEST_CASE("defaults, file values and overrides") {
    const auto d = load_config(std::nullopt);
    CHECK(d.seed == 7);
    CHECK(d.mccnn.epochs == 25);
    CHECK(d.output_root == (fs::current_path() / "out").lexically_normal());

    test::TempDir dir;
    write(dir.path / "cfg.json", R"({"seed": 3, "paths": {"output": "o"}, "features": {"lbp": {"points": 16}}})");
    auto c = load_config(dir.path / "cfg.json");
    CHECK(c.seed == 3);
    CHECK(c.synth.seed == 3);
    CHECK(c.mccnn.seed == 3);
    CHECK(c.lbp.points == 16);
    CHECK(c.output_root == (dir.path / "o").lexically_normal());

    c = load_config(dir.path / "cfg.json",
                    {"mccnn.adapt=[\"C1\",\"G1\"]", "mccnn.channels=[\"gray\",\"depth\"]", "mccnn.name=ablation",
                     "synth.signal_channels=[\"thermal\"]", "classifiers.lr.lambda=0.5", "seed=21"});
    CHECK(c.mccnn.adapt == std::set<mccnn::LayerGroup>{mccnn::LayerGroup::C1, mccnn::LayerGroup::G1});
    CHECK(c.mccnn.channels == std::vector<ChannelId>{ChannelId::gray, ChannelId::depth});
    CHECK(c.mccnn_name == "ablation");
    CHECK(c.synth.signal_channels == std::vector<ChannelId>{ChannelId::thermal});
    CHECK(c.lr.lambda == 0.5);
    CHECK(c.seed == 21);

    CHECK(load_config(dir.path / "cfg.json", {"seed=21"}, "99").seed == 99);
}

TEST_CASE("invalid configurations are validation errors") {
    test::TempDir dir;
    write(dir.path / "unknown.json", R"({"sed": 3})");
    CHECK_THROWS_AS((void)load_config(dir.path / "unknown.json"), ValidationError);
    write(dir.path / "nested.json", R"({"features": {"lbp": {"pionts": 3}}})");
    CHECK_THROWS_AS((void)load_config(dir.path / "nested.json"), ValidationError);
    write(dir.path / "broken.json", "{");
    CHECK_THROWS_AS((void)load_config(dir.path / "broken.json"), ValidationError);
    CHECK_THROWS_AS((void)load_config(dir.path / "absent.json"), ValidationError);
    CHECK_THROWS_AS((void)load_config(std::nullopt, {"features.lbp.points=5"}), ValidationError);
    CHECK_THROWS_AS((void)load_config(std::nullopt, {"nope=1"}), ValidationError);
    CHECK_THROWS_AS((void)load_config(std::nullopt, {"seed"}), ValidationError);
    CHECK_THROWS_AS((void)load_config(std::nullopt, {"mccnn.adapt=[\"FFC\"]"}), ValidationError);
    CHECK_THROWS_AS((void)load_config(std::nullopt, {"preprocess.out_size=32"}), ValidationError);
    CHECK_THROWS_AS((void)load_config(std::nullopt, {"protocols.ratios=[0.5,0.5,0.5]"}), ValidationError);
    CHECK_THROWS_AS((void)load_config(std::nullopt, {}, "abc"), ValidationError);
}

TEST_CASE("digest and lock") {
    test::TempDir dir;
    const auto a = load_config(std::nullopt);
    const auto da = config_digest(a);
    CHECK(da.size() == 64);
    CHECK(da == config_digest(load_config(std::nullopt)));
    CHECK(da != config_digest(load_config(std::nullopt, {"seed=8"})));

    write_lock(a, dir.path);
    const auto back = load_config(dir.path / "config.lock");
    CHECK(config_digest(back) == da);
    CHECK(config_to_json(back) == read_text(dir.path / "config.lock"));
    write(dir.path / "defaults.json", default_config_json());
    CHECK(load_config(dir.path / "defaults.json").seed == 7);
}

TEST_CASE("exit statuses") {
    test::TempDir dir;
    CHECK(run_cli({}) == 2);
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"frobnicate"}) == 2);
    CHECK(run_cli({"eval", "--jobs", "0"}) == 2);
    CHECK(run_cli({"eval", "--config", (dir.path / "missing.json").string()}) == 2);
    write(dir.path / "cfg.json", R"({"paths": {"data": "d", "output": "o"}})");
    // Nothing upstream exists: a validation error naming the path.
    CHECK(run_cli({"report", "--config", (dir.path / "cfg.json").string()}) == 2);
    CHECK(run_cli({"preprocess", "--config", (dir.path / "cfg.json").string()}) == 2);
    // Unreadable score file content is a runtime failure.
    write(dir.path / "s" / "dev.csv", "garbage\n");
    write(dir.path / "s" / "eval.csv", "garbage\n");
    CHECK(run_cli({"eval", "--config", (dir.path / "cfg.json").string(), "--scores", (dir.path / "s").string()}) == 1);
}

TEST_CASE("eval on a toy score file reproduces the hand-computed report") {
    test::TempDir dir;
    write(dir.path / "cfg.json", R"({"paths": {"data": "d", "output": "o"}})");
    const std::string header = std::string(kScoreHeader) + "\n";
    write(dir.path / "toy" / "dev.csv", header + "b0,0,0.9,bonafide,none\nb1,0,0.8,bonafide,none\na0,0,0.1,attack,print\n");
    write(dir.path / "toy" / "eval.csv", header +
                                             "a1,0,0.1,attack,print\na2,0,0.6,attack,replay\na3,0,0.3,attack,print\n"
                                             "b2,0,0.9,bonafide,none\nb3,0,0.8,bonafide,none\n");
    REQUIRE(run_cli({"eval", "--config", (dir.path / "cfg.json").string(), "--scores", (dir.path / "toy").string(),
                     "--threshold", "0.5"}) == 0);
    const auto row = eval_row(dir.path / "o" / "eval" / "custom" / "toy" / "metrics.csv");
    REQUIRE(row.size() == 5);
    CHECK(row[0] == doctest::Approx(100.0 / 3));
    CHECK(row[1] == 0.0);
    CHECK(row[2] == doctest::Approx(50.0 / 3));
    CHECK(row[3] == 0.5);
    CHECK(row[4] == 100.0);
    CHECK(fs::exists(dir.path / "o" / "eval" / "config.lock"));

    // Dev rule: tau = 0.8, so the 0.6 replay is rejected too.
    REQUIRE(run_cli({"eval", "--config", (dir.path / "cfg.json").string(), "--scores", (dir.path / "toy").string(),
                     "--protocol", "mine"}) == 0);
    const auto row2 = eval_row(dir.path / "o" / "eval" / "mine" / "toy" / "metrics.csv");
    REQUIRE(row2.size() == 5);
    CHECK(row2[0] == 0.0);
    CHECK(row2[1] == 0.0);
    CHECK(row2[3] == 0.8);
    REQUIRE(run_cli({"report", "--config", (dir.path / "cfg.json").string()}) == 0);
    CHECK(fs::exists(dir.path / "o" / "report" / "summary.csv"));
}

TEST_CASE("classical chain end to end is repeatable and leaves inputs alone") {
    test::TempDir dir;
    write(dir.path / "cfg.json", tiny_config());
    const auto cfg = (dir.path / "cfg.json").string();
    REQUIRE(run_cli({"synth", "--config", cfg}) == 0);
    const auto data_before = snapshot(dir.path / "data");
    REQUIRE(run_cli({"preprocess", "--config", cfg, "--jobs", "2"}) == 0);
    REQUIRE(run_cli({"extract", "--config", cfg, "--jobs", "2"}) == 0);
    REQUIRE(run_cli({"train-baseline", "--config", cfg}) == 0);
    REQUIRE(run_cli({"eval", "--config", cfg}) == 0);
    REQUIRE(run_cli({"report", "--config", cfg}) == 0);
    CHECK(snapshot(dir.path / "data") == data_before);
    for (const char* sys : {"iqm-lbp-lr", "rdwt-haralick-svm"})
        CHECK(fs::exists(dir.path / "out" / "eval" / "grandtest" / sys / "metrics.csv"));
    for (const char* stage : {"protocols", "features", "models", "scores", "eval", "report"})
        CHECK(fs::exists(dir.path / "out" / stage / "config.lock"));
    const auto first = snapshot(dir.path / "out");

    // Rerunning every stage reproduces every byte.
    REQUIRE(run_cli({"synth", "--config", cfg}) == 0);
    REQUIRE(run_cli({"preprocess", "--config", cfg, "--jobs", "1"}) == 0);
    REQUIRE(run_cli({"extract", "--config", cfg, "--jobs", "1"}) == 0);
    REQUIRE(run_cli({"train-baseline", "--config", cfg}) == 0);
    REQUIRE(run_cli({"eval", "--config", cfg}) == 0);
    REQUIRE(run_cli({"report", "--config", cfg}) == 0);
    CHECK(snapshot(dir.path / "data") == data_before);
    CHECK(snapshot(dir.path / "out") == first);
}
