#include <cstdio>
#include <cstdlib>
#include <thread>

#include <CLI11.hpp>

#include "mcpad/cli.hpp"
#include "mcpad/error.hpp"

namespace mcpad::cli {
namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::string> protocols;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Configuration file (JSON)");
    cmd->add_option("--set", c.overrides, "Override a configuration entry: key.path=value")->take_all();
    cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::Range(1u, 4096u));
    cmd->add_option("--protocol", c.protocols, "Protocol name (repeatable; default: all)");
}

Extractor parse_extractor(const std::string& s) {
    if (s == "iqm") return Extractor::iqm;
    if (s == "lbp") return Extractor::lbp;
    if (s == "rdwt-haralick") return Extractor::rdwt_haralick;
    throw ValidationError("unknown extractor '" + s + "' (iqm, lbp, rdwt-haralick)");
}

Baseline parse_baseline(const std::string& s) {
    if (s == "iqm-lbp-lr") return Baseline::iqm_lbp_lr;
    if (s == "rdwt-haralick-svm") return Baseline::rdwt_haralick_svm;
    throw ValidationError("unknown pipeline '" + s + "' (iqm-lbp-lr, rdwt-haralick-svm)");
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Multi-channel face presentation attack detection pipeline"};
    app.require_subcommand(1);
    Common common;

    auto* synth = app.add_subcommand("synth", "Generate the synthetic multi-channel dataset");
    auto* preprocess = app.add_subcommand("preprocess", "Align, normalize and build protocols");
    auto* extract = app.add_subcommand("extract", "Compute classical features per protocol split");
    auto* baseline = app.add_subcommand("train-baseline", "Train IQM-LBP-LR / RDWT-Haralick-SVM and fuse");
    auto* mccnn = app.add_subcommand("train-mccnn", "Train the multi-channel CNN");
    auto* eval = app.add_subcommand("eval", "Compute APCER/BPCER/ACER and ROC from score files");
    auto* report = app.add_subcommand("report", "Collect evaluation results into summary tables");
    for (auto* cmd : {synth, preprocess, extract, baseline, mccnn, eval, report}) add_common(cmd, common);

    std::vector<std::string> extractors;
    bool sweep_lbp = false;
    extract->add_option("--extractor", extractors, "iqm, lbp or rdwt-haralick (default: all)");
    extract->add_flag("--sweep-lbp", sweep_lbp, "Also grid-search LBP parameters on the dev split");
    std::vector<std::string> pipelines;
    baseline->add_option("--pipeline", pipelines, "iqm-lbp-lr or rdwt-haralick-svm (default: both)");
    std::vector<std::string> score_dirs;
    std::optional<double> threshold;
    eval->add_option("--scores", score_dirs, "Directory holding dev.csv and eval.csv (repeatable)");
    eval->add_option("--threshold", threshold, "Fixed decision threshold instead of the dev BPCER rule");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        const auto config = load_config(common.config.empty() ? std::nullopt : std::optional<std::filesystem::path>(common.config),
                                        common.overrides, std::getenv("MCPAD_SEED"));
        std::printf("config digest: %s\n", config_digest(config).c_str());
        std::fflush(stdout);
        const StageOptions opt{common.jobs, common.protocols};

        if (*synth) {
            cmd_synth(config);
        } else if (*preprocess) {
            cmd_preprocess(config, opt);
        } else if (*extract) {
            std::vector<Extractor> which;
            for (const auto& e : extractors) which.push_back(parse_extractor(e));
            if (which.empty()) which = {Extractor::iqm, Extractor::lbp, Extractor::rdwt_haralick};
            cmd_extract(config, which, opt);
            if (sweep_lbp) cmd_sweep_lbp(config, opt);
        } else if (*baseline) {
            std::vector<Baseline> which;
            for (const auto& p : pipelines) which.push_back(parse_baseline(p));
            if (which.empty()) which = {Baseline::iqm_lbp_lr, Baseline::rdwt_haralick_svm};
            cmd_train_baseline(config, which, opt);
        } else if (*mccnn) {
            cmd_train_mccnn(config, opt);
        } else if (*eval) {
            std::vector<std::filesystem::path> dirs(score_dirs.begin(), score_dirs.end());
            cmd_eval(config, opt, dirs, threshold);
        } else if (*report) {
            cmd_report(config);
        }
        return 0;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace mcpad::cli
