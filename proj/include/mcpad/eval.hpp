#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcpad/dataset.hpp"
#include "mcpad/types.hpp"

namespace mcpad {

// ---- protocols -----------------------------------------------------------------

struct ProtocolSpec {
    std::string name;
    std::map<std::string, Split> assignment;  // sample_id -> split
    std::optional<AttackType> left_out;

    [[nodiscard]] std::vector<std::string> samples_in(Split split) const;
};

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kEqualThirds{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

// Hamilton apportionment of n items; ties in the remainder go to the lower
// index.
[[nodiscard]] std::vector<std::size_t> largest_remainder(std::size_t n, std::span<const double> ratios);

// Clients are grouped by category (bonafide or attack type; a client seen in
// several takes the smallest), shuffled per category from `seed`, then
// apportioned to train/dev/eval.
[[nodiscard]] ProtocolSpec make_grandtest(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed);

// Bonafide clients follow `bonafide_ratios`; every other attack category is
// split evenly between train and dev; the held-out category goes entirely to
// eval.
[[nodiscard]] ProtocolSpec make_loo(const Manifest& manifest, AttackType attack, std::uint64_t seed,
                                    const SplitRatios& bonafide_ratios = kEqualThirds);

// LOO_<type>, except that print is "LOO_prints".
[[nodiscard]] std::string loo_name(AttackType attack);
[[nodiscard]] std::optional<AttackType> loo_attack(std::string_view protocol_name);

// Throws ProtocolError when split client sets overlap or LOO containment fails.
void check_protocol(const ProtocolSpec& protocol, const Manifest& manifest);

// "sample_id,client_id,split" rows.
[[nodiscard]] std::string format_protocol(const ProtocolSpec& protocol, const Manifest& manifest);
[[nodiscard]] ProtocolSpec parse_protocol(const std::string& name, const std::string& text);

// ---- scores --------------------------------------------------------------------

struct ScoreEntry {
    double score = 0.0;  // higher = more bonafide
    Label label = Label::bonafide;
    AttackType attack_type = AttackType::none;
    std::uint32_t client_id = 0;
    std::string sample_id;
    std::size_t frame_idx = 0;

    friend bool operator==(const ScoreEntry&, const ScoreEntry&) = default;
};

using ScoreSet = std::vector<ScoreEntry>;

inline constexpr const char* kScoreHeader = "sample_id,frame_idx,score,label,attack_type";

[[nodiscard]] std::string format_scores(const ScoreSet& scores);
// client_id is not part of the file; it is left 0 unless a manifest is given.
[[nodiscard]] ScoreSet parse_scores(const std::string& text, const Manifest* manifest = nullptr);
void write_scores(const ScoreSet& scores, const std::filesystem::path& path);
[[nodiscard]] ScoreSet read_scores(const std::filesystem::path& path, const Manifest* manifest = nullptr);

// ---- metrics -------------------------------------------------------------------

// Bonafide scores sorted ascending s_1..s_N, k = floor(target*N); returns
// s_{k+1} (s_N when k = N). Decision rule: score >= threshold -> bonafide.
[[nodiscard]] double threshold_at_bpcer(const ScoreSet& dev, double target = 0.01);

struct PaiBreakdown {
    AttackType type = AttackType::none;
    std::size_t count = 0;
    std::size_t accepted = 0;  // score >= threshold
    double apcer = 0.0;        // percent accepted
    double accuracy = 0.0;     // percent rejected
};

struct SplitMetrics {
    std::size_t attacks = 0;
    std::size_t attacks_accepted = 0;
    std::size_t bonafide = 0;
    std::size_t bonafide_rejected = 0;
    double apcer = 0.0;  // percent, aggregated over all attack entries
    double bpcer = 0.0;
    double acer = 0.0;
    double apcer_max_pai = 0.0;
    std::vector<PaiBreakdown> per_pai;  // ascending attack type
};

[[nodiscard]] SplitMetrics compute_metrics(const ScoreSet& scores, double threshold);
[[nodiscard]] std::map<AttackType, double> per_pai_accuracy(const ScoreSet& scores, double threshold);

struct RocPoint {
    double threshold = 0.0;
    std::size_t attacks_accepted = 0;
    std::size_t bonafide_accepted = 0;
    double apcer = 0.0;            // fraction of attacks with score >= threshold
    double bonafide_accept = 0.0;  // 1 - BPCER
};

// Thresholds run from +inf through every distinct score (descending) to -inf.
[[nodiscard]] std::vector<RocPoint> roc(const ScoreSet& scores);

struct MetricsReport {
    std::string protocol;
    std::string system;
    double target_bpcer = 0.01;
    double threshold = 0.0;
    SplitMetrics dev;
    SplitMetrics eval;
    std::vector<RocPoint> eval_roc;
};

[[nodiscard]] MetricsReport evaluate(const ScoreSet& dev, const ScoreSet& eval, double target_bpcer = 0.01);

// Flat CSVs and a nested JSON summary.
[[nodiscard]] std::string format_metrics_csv(const MetricsReport& report);
[[nodiscard]] std::string format_per_pai_csv(const MetricsReport& report);
[[nodiscard]] std::string format_roc_csv(const std::vector<RocPoint>& points);
[[nodiscard]] std::string format_report_json(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& dir);

}  // namespace mcpad
