#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "mcpad/types.hpp"

namespace mcpad {

// Row-major feature rows with one label per row.
struct LabeledMatrix {
    std::size_t dim = 0;
    std::vector<double> x;
    std::vector<Label> y;

    [[nodiscard]] std::size_t rows() const noexcept { return y.size(); }
    [[nodiscard]] std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
    void validate() const;
};

enum class FitPopulation : std::uint8_t { bonafide_only = 0, all = 1 };

inline constexpr double kStdFloor = 1e-8;

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> std;
    FitPopulation population = FitPopulation::bonafide_only;

    [[nodiscard]] std::size_t dim() const noexcept { return mean.size(); }
    [[nodiscard]] std::vector<double> apply(std::span<const double> x) const;
};

// Population (1/N) statistics; std floored at kStdFloor.
[[nodiscard]] Standardizer standardize_fit(const LabeledMatrix& data, FitPopulation population);

struct LrOptions {
    double lambda = 0.1;
    int epochs = 300;
    double lr = 0.5;
};

struct LrModel {
    std::vector<double> w;
    double bias = 0.0;
    Standardizer standardizer;
    double lambda = 0.0;
};

// Full-batch gradient descent on mean BCE + lambda*|w|^2 from zero weights.
// A step that would raise the loss is halved until it does not, so the
// recorded losses (initial, then one per epoch) never increase.
[[nodiscard]] LrModel lr_train(const LabeledMatrix& data, const LrOptions& opt,
                               std::vector<double>* loss_trace = nullptr);

// Probability of bonafide.
[[nodiscard]] double lr_score(const LrModel& model, std::span<const double> x);

struct SvmOptions {
    double C = 1.0;
    int epochs = 300;
    double lr = 0.1;
    FitPopulation population = FitPopulation::all;
};

struct SvmModel {
    std::vector<double> w;
    double bias = 0.0;
    Standardizer standardizer;
    double C = 1.0;
};

// Full-batch sub-gradient descent on 0.5*|w|^2 + C*mean hinge with step
// lr/sqrt(epoch+1); returns the iterate with the lowest objective.
// bonafide -> +1, attack -> -1.
[[nodiscard]] SvmModel svm_train(const LabeledMatrix& data, const SvmOptions& opt);

// Raw margin w.x + b on standardized input.
[[nodiscard]] double svm_score(const SvmModel& model, std::span<const double> x);

struct ScoreNormalizer {
    double min = 0.0;
    double max = 1.0;

    [[nodiscard]] double apply(double s) const noexcept;
};

[[nodiscard]] ScoreNormalizer score_normalize_fit(std::span<const double> scores);

[[nodiscard]] double fuse_mean(std::span<const double> normalized);

// "MCLM" blob: version, kind (0 = LR, 1 = SVM), population, u32 dim, f64
// hyperparameter, bias, weights, means, stds.
using LinearModel = std::variant<LrModel, SvmModel>;

[[nodiscard]] std::vector<std::uint8_t> encode_model(const LinearModel& model);
[[nodiscard]] LinearModel decode_model(std::span<const std::uint8_t> bytes);
void write_model(const LinearModel& model, const std::filesystem::path& path);
[[nodiscard]] LinearModel read_model(const std::filesystem::path& path);

}  // namespace mcpad
