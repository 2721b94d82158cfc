#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcpad/classical.hpp"
#include "mcpad/dataset.hpp"
#include "mcpad/eval.hpp"
#include "mcpad/features.hpp"
#include "mcpad/mccnn.hpp"
#include "mcpad/preprocess.hpp"

namespace mcpad::cli {

struct ProtocolParams {
    SplitRatios ratios = kEqualThirds;
    bool grandtest = true;
    std::vector<AttackType> loo;
};

// Everything a stage needs. One `seed` drives synthesis, protocol shuffles
// and MC-CNN initialization/ordering.
struct RunConfig {
    std::filesystem::path data_root;
    std::filesystem::path output_root;
    std::uint64_t seed = 7;
    SynthConfig synth;
    AlignTargets targets = AlignTargets::for_size(64);
    PreprocessOptions preprocess;
    LbpConfig lbp;
    GlcmConfig glcm;
    std::vector<std::string> iqm;  // empty: all measures
    LrOptions lr;
    SvmOptions svm;
    mccnn::McCnnConfig mccnn;
    std::string mccnn_name = "mccnn";
    ProtocolParams protocols;
    double target_bpcer = 0.01;
};

// Nested JSON, keys mirroring RunConfig. Paths resolve against `base_dir`.
[[nodiscard]] std::string default_config_json();
[[nodiscard]] std::string config_to_json(const RunConfig& config);

// Defaults, then the file, then each "a.b.c=value" override (value parsed
// as JSON, falling back to a plain string), then MCPAD_SEED. Unknown keys
// and invalid values raise ValidationError.
[[nodiscard]] RunConfig load_config(const std::optional<std::filesystem::path>& file,
                                    const std::vector<std::string>& overrides = {},
                                    const char* seed_env = nullptr);

// SHA-256 of the resolved configuration (hex).
[[nodiscard]] std::string config_digest(const RunConfig& config);

// Writes `<dir>/config.lock`, a config file that reproduces the run.
void write_lock(const RunConfig& config, const std::filesystem::path& dir);

// ---- stages ------------------------------------------------------------------

struct StageOptions {
    unsigned jobs = 1;
    std::vector<std::string> protocols;  // empty: every protocol on disk
};

void cmd_synth(const RunConfig& config);
void cmd_preprocess(const RunConfig& config, const StageOptions& opt);

enum class Extractor { iqm, lbp, rdwt_haralick };
void cmd_extract(const RunConfig& config, const std::vector<Extractor>& extractors, const StageOptions& opt);
// Grid search over LBP parameters on the first protocol's dev split.
void cmd_sweep_lbp(const RunConfig& config, const StageOptions& opt);

enum class Baseline { iqm_lbp_lr, rdwt_haralick_svm };
[[nodiscard]] std::string_view to_string(Baseline b) noexcept;
void cmd_train_baseline(const RunConfig& config, const std::vector<Baseline>& pipelines, const StageOptions& opt);

void cmd_train_mccnn(const RunConfig& config, const StageOptions& opt);

// Each score directory holds dev.csv and eval.csv; empty means every system
// under <out>/scores/<protocol>. A fixed threshold replaces the dev rule.
void cmd_eval(const RunConfig& config, const StageOptions& opt, const std::vector<std::filesystem::path>& score_dirs,
              std::optional<double> threshold);

void cmd_report(const RunConfig& config);

// Frame sets of one protocol split, channels in `channels` order.
[[nodiscard]] mccnn::FrameSet load_frames(const RunConfig& config, const ProtocolSpec& protocol, Split split,
                                          const std::vector<ChannelId>& channels);

[[nodiscard]] ProtocolSpec load_protocol(const RunConfig& config, const std::string& name);
[[nodiscard]] std::vector<std::string> protocol_names(const RunConfig& config);

// Entry point used by tools/mcpad; returns the process exit status.
int run(int argc, char** argv);

}  // namespace mcpad::cli
