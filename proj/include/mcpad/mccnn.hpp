#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mcpad/eval.hpp"
#include "mcpad/types.hpp"

namespace mcpad::mccnn {

// ---- tensors and the tape --------------------------------------------------------

template <typename R>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<R> value;
    std::vector<R> grad;  // empty unless requires_grad
    bool requires_grad = false;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, bool with_grad = false);

    [[nodiscard]] std::size_t numel() const noexcept { return value.size(); }
    [[nodiscard]] std::size_t dim(std::size_t i) const { return shape.at(i); }
    void zero_grad();
};

template <typename R>
using TensorPtr = std::shared_ptr<Tensor<R>>;

template <typename R>
TensorPtr<R> make_tensor(std::vector<std::size_t> shape, bool requires_grad = false) {
    return std::make_shared<Tensor<R>>(std::move(shape), requires_grad);
}

// Records the backward closure of every op whose output needs a gradient.
// Outputs get a gradient buffer iff some input has one, so frozen subgraphs
// cost nothing on the way back.
template <typename R>
class Tape {
public:
    // Cross-correlation with zero padding. x: N,C,H,W  w: O,C,k,k  b: O.
    TensorPtr<R> conv2d(const TensorPtr<R>& x, const TensorPtr<R>& w, const TensorPtr<R>& b, int stride, int pad);
    // 2x2 window, stride 2; H and W must be even. Ties go to the first
    // element in row-major window order.
    TensorPtr<R> maxpool2(const TensorPtr<R>& x);
    // Max-Feature-Map over dimension 1 (channels or features): out[c] =
    // max(x[c], x[c+k]); ties go to x[c].
    TensorPtr<R> mfm(const TensorPtr<R>& x);
    TensorPtr<R> flatten(const TensorPtr<R>& x);
    // x: N,F  w: O,F  b: O
    TensorPtr<R> linear(const TensorPtr<R>& x, const TensorPtr<R>& w, const TensorPtr<R>& b);
    // Input clamped to [-40, 40].
    TensorPtr<R> sigmoid(const TensorPtr<R>& x);
    // Concatenation of N,F_i tensors along the feature dimension.
    TensorPtr<R> concat(const std::vector<TensorPtr<R>>& xs);
    // Mean over the batch of the weighted binary cross-entropy; p: N,1 with
    // p clamped to [1e-7, 1-1e-7]. y = 1 for bonafide.
    TensorPtr<R> weighted_bce(const TensorPtr<R>& p, std::span<const Label> labels, double w_bonafide,
                              double w_attack);

    // Seeds d(loss)/d(loss) = 1 and runs the recorded closures in reverse.
    void backward(const TensorPtr<R>& loss);
    void clear() { ops_.clear(); }
    [[nodiscard]] std::size_t recorded() const noexcept { return ops_.size(); }

private:
    std::vector<std::function<void()>> ops_;
};

// ---- losses ----------------------------------------------------------------------

struct ClassWeights {
    double bonafide = 1.0;
    double attack = 1.0;
};

// w_c = N / (2 N_c); an absent class gets weight 1.
[[nodiscard]] ClassWeights batch_class_weights(std::span<const Label> labels);

inline constexpr double kProbClamp = 1e-7;

// -(w_b y log p + w_a (1-y) log(1-p)) with p clamped.
[[nodiscard]] double weighted_bce(int y, double p, ClassWeights w);

// ---- model -----------------------------------------------------------------------

enum class LayerGroup : std::uint8_t { C1 = 0, B1 = 1, G1 = 2, EMB = 3, FFC = 4 };

[[nodiscard]] std::string_view to_string(LayerGroup g) noexcept;
[[nodiscard]] LayerGroup parse_layer_group(std::string_view name);

// Channel widths are pre-MFM output counts and must be even.
struct ArchConfig {
    int c1_out = 32;
    int b1_out = 32;
    int g1_out = 48;
    int c1_kernel = 5;
    int kernel = 3;
    int head_hidden = 10;
    // Each branch is flatten -> linear -> E with no conv stack.
    bool linear_only = false;

    friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

struct McCnnConfig {
    std::vector<ChannelId> channels{ChannelId::gray, ChannelId::depth, ChannelId::infrared, ChannelId::thermal};
    int input_size = 64;
    int embedding = 64;
    std::set<LayerGroup> adapt{LayerGroup::C1, LayerGroup::B1};
    ArchConfig arch;
    int epochs = 25;
    int batch_size = 32;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double flip_prob = 0.5;
    bool pretrain = true;
    int pretrain_epochs = 25;
    double target_bpcer = 0.01;
    std::uint64_t seed = 7;

    void validate() const;
    friend bool operator==(const McCnnConfig&, const McCnnConfig&) = default;
};

struct ParamBlock {
    std::string name;
    LayerGroup group = LayerGroup::FFC;
    std::optional<ChannelId> channel;  // set for DSU copies
    bool trainable = false;
};

// Parameter store plus the network's forward graph. Backbone blocks are
// shared across channels; each adapted group gets one DSU copy per non-gray
// channel. The shared backbone (and with it the gray branch) stays frozen.
template <typename R>
class Network {
public:
    Network() = default;
    // Random init from config.seed (He-normal weights, zero biases).
    explicit Network(const McCnnConfig& config);
    // Copies own their tensors; parameters are never shared between networks.
    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    [[nodiscard]] const McCnnConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::size_t block_count() const noexcept { return blocks_.size(); }
    [[nodiscard]] const ParamBlock& block(std::size_t i) const { return blocks_.at(i); }
    [[nodiscard]] Tensor<R>& tensor(std::size_t i) { return *params_.at(i); }
    [[nodiscard]] const Tensor<R>& tensor(std::size_t i) const { return *params_.at(i); }
    [[nodiscard]] std::optional<std::size_t> find(const std::string& name) const;

    // Marks trainable blocks: DSU copies and FFC, or (backbone_trainable)
    // every shared block as well.
    void set_trainable(bool backbone_trainable);
    // Copies the shared backbone groups from `other` into this network's
    // shared blocks and DSU copies. Shapes must agree.
    void load_backbone(const Network& other);

    // True when no trainable block feeds this channel's embedding.
    [[nodiscard]] bool branch_static(ChannelId c) const;

    // x: N,1,S,S with values in [0, 1]. Returns N,E.
    TensorPtr<R> branch(Tape<R>& tape, ChannelId c, const TensorPtr<R>& x) const;
    // embeddings: one N,E tensor per configured channel in order. Returns N,1.
    TensorPtr<R> head(Tape<R>& tape, const std::vector<TensorPtr<R>>& embeddings) const;
    TensorPtr<R> forward(Tape<R>& tape, const std::vector<TensorPtr<R>>& inputs) const;

    template <typename S>
    [[nodiscard]] Network<S> cast() const;

    // Blocks are added in a fixed order; used by cast and deserialization.
    void add_block(ParamBlock meta, TensorPtr<R> t);
    void set_config(const McCnnConfig& c) { config_ = c; }

private:
    [[nodiscard]] const TensorPtr<R>& param(LayerGroup g, std::optional<ChannelId> c, const char* kind) const;
    [[nodiscard]] std::optional<ChannelId> owner(LayerGroup g, ChannelId c) const;

    McCnnConfig config_;
    std::vector<ParamBlock> blocks_;
    std::vector<TensorPtr<R>> params_;
};

using McCnnModel = Network<float>;

// Gray-only network whose head is a single linear unit; used by pretraining.
[[nodiscard]] McCnnConfig pretrain_config(const McCnnConfig& config);

// ---- data and training --------------------------------------------------------------

// One aligned frame per configured channel (8-bit, S*S each, in config
// channel order).
struct Frame {
    std::vector<std::vector<std::uint8_t>> channels;
    Label label = Label::bonafide;
    AttackType attack_type = AttackType::none;
    std::string sample_id;
    std::uint32_t client_id = 0;
    std::size_t frame_idx = 0;
};

struct FrameSet {
    std::vector<ChannelId> channels;
    int size = 0;
    std::vector<Frame> frames;

    void validate() const;
    // Subset in the given channel order.
    [[nodiscard]] FrameSet select(const std::vector<ChannelId>& wanted) const;
};

struct TrainHooks {
    // Replaces the per-sample flip coin. Arguments: epoch, sample index.
    std::function<bool(int, std::size_t)> flip;
    // Sees every training batch: sample indices, their flip flags and the
    // per-channel input tensors (N,1,S,S) actually fed to the network.
    std::function<void(int, const std::vector<std::size_t>&, const std::vector<bool>&,
                       const std::vector<TensorPtr<float>>&)>
        on_batch;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double dev_loss = 0.0;
    double dev_acer = 0.0;
    double dev_threshold = 0.0;
};

struct TrainResult {
    McCnnModel model;
    int best_epoch = -1;
    std::vector<EpochLog> history;
};

// Flip coin derived only from (seed, epoch, sample index).
[[nodiscard]] bool flip_coin(std::uint64_t seed, int epoch, std::size_t index, double prob);

// Stage-1 surrogate: trains a gray-only network (backbone + 1-unit head)
// on the PAD labels. Returns that network; its backbone seeds train().
// The loss trace holds the initial loss, then one entry per epoch.
[[nodiscard]] McCnnModel pretrain_reference(const FrameSet& train, const McCnnConfig& config,
                                            std::vector<double>* loss_trace = nullptr);

// Without a pretrained network the shared backbone keeps its random init.
[[nodiscard]] TrainResult train(const FrameSet& train, const FrameSet& dev, const McCnnConfig& config,
                                const McCnnModel* pretrained, const TrainHooks& hooks = {},
                                McCnnModel* initial = nullptr);

// Probability of bonafide per frame.
[[nodiscard]] ScoreSet score_frames(const McCnnModel& model, const FrameSet& frames);

struct GradCheckOptions {
    double eps = 1e-4;
    // Entries checked per parameter block; 0 checks every entry.
    std::size_t per_block = 0;
    std::uint64_t seed = 1;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst_block;
};

// Central differences vs the tape's gradients in double precision, over the
// trainable blocks. Relative error |a-n| / max(1, |a|, |n|).
[[nodiscard]] GradCheckResult grad_check(const Network<double>& model, const FrameSet& batch,
                                         const GradCheckOptions& opt = {});

// ---- serialization ----------------------------------------------------------------

// "MCNN", version, JSON config echo, then named blocks tagged with group and
// channel, values as little-endian f32.
[[nodiscard]] std::vector<std::uint8_t> encode_model(const McCnnModel& model);
[[nodiscard]] McCnnModel decode_model(std::span<const std::uint8_t> bytes);
void write_model(const McCnnModel& model, const std::filesystem::path& path);
[[nodiscard]] McCnnModel read_model(const std::filesystem::path& path);
// Serialized bytes of one block (tags + values), for freeze checks.
[[nodiscard]] std::vector<std::uint8_t> encode_block(const McCnnModel& model, std::size_t index);

[[nodiscard]] std::string config_to_json(const McCnnConfig& config);
[[nodiscard]] McCnnConfig config_from_json(const std::string& json);

}  // namespace mcpad::mccnn
