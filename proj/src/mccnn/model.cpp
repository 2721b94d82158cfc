#include <cmath>
#include <random>

#include "mcpad/error.hpp"
#include "mcpad/mccnn.hpp"

namespace mcpad::mccnn {
namespace {

constexpr LayerGroup kBackbone[] = {LayerGroup::C1, LayerGroup::B1, LayerGroup::G1, LayerGroup::EMB};

bool is_backbone(LayerGroup g) { return g != LayerGroup::FFC; }

std::string block_name(LayerGroup g, const char* kind, std::optional<ChannelId> c) {
    std::string name = std::string(to_string(g)) + "." + kind;
    if (c) name += "@" + std::string(to_string(*c));
    return name;
}

bool uses_group(const McCnnConfig& cfg, LayerGroup g) {
    return !cfg.arch.linear_only || g == LayerGroup::EMB || g == LayerGroup::FFC;
}

}  // namespace

std::string_view to_string(LayerGroup g) noexcept {
    switch (g) {
        case LayerGroup::C1: return "C1";
        case LayerGroup::B1: return "B1";
        case LayerGroup::G1: return "G1";
        case LayerGroup::EMB: return "EMB";
        case LayerGroup::FFC: return "FFC";
    }
    return "?";
}

LayerGroup parse_layer_group(std::string_view name) {
    for (auto g : {LayerGroup::C1, LayerGroup::B1, LayerGroup::G1, LayerGroup::EMB, LayerGroup::FFC})
        if (to_string(g) == name) return g;
    throw ArgumentError("unknown layer group '" + std::string(name) + "'");
}

void McCnnConfig::validate() const {
    if (channels.empty()) throw ArgumentError("MC-CNN needs at least one channel");
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (channels[i] == ChannelId::color) throw ArgumentError("MC-CNN takes gray, not color");
        for (std::size_t j = i + 1; j < channels.size(); ++j)
            if (channels[i] == channels[j]) throw ArgumentError("MC-CNN channel listed twice");
    }
    if (adapt.contains(LayerGroup::FFC)) throw ArgumentError("FFC is always trained; leave it out of the adapt set");
    if (input_size < 8 || input_size % 8 != 0) throw ArgumentError("input size must be a positive multiple of 8");
    if (embedding < 1) throw ArgumentError("embedding dimension must be positive");
    const auto& a = arch;
    if (!a.linear_only) {
        for (int w : {a.c1_out, a.b1_out, a.g1_out})
            if (w < 2 || w % 2) throw ArgumentError("conv widths must be even and >= 2");
        if (a.c1_kernel < 1 || a.c1_kernel % 2 == 0 || a.kernel < 1 || a.kernel % 2 == 0)
            throw ArgumentError("conv kernels must be odd");
    }
    if (a.head_hidden < 0) throw ArgumentError("head width must be >= 0");
    if (epochs < 0 || pretrain_epochs < 0) throw ArgumentError("epochs must be >= 0");
    if (batch_size < 1) throw ArgumentError("batch size must be positive");
    if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ArgumentError("Adam betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ArgumentError("Adam epsilon must be positive");
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ArgumentError("flip probability must lie in [0, 1]");
    if (!(target_bpcer >= 0.0 && target_bpcer <= 1.0)) throw ArgumentError("target BPCER must lie in [0, 1]");
}

McCnnConfig pretrain_config(const McCnnConfig& config) {
    McCnnConfig c = config;
    c.channels = {ChannelId::gray};
    c.adapt.clear();
    c.arch.head_hidden = 0;
    c.epochs = config.pretrain_epochs;
    return c;
}

template <typename R>
Network<R>::Network(const McCnnConfig& config) : config_(config) {
    config_.validate();
    const auto& a = config_.arch;
    const std::size_t S = static_cast<std::size_t>(config_.input_size);
    const std::size_t E = static_cast<std::size_t>(config_.embedding);

    // Weight and bias shapes per backbone group.
    const auto shapes = [&](LayerGroup g) -> std::pair<std::vector<std::size_t>, std::size_t> {
        const auto k1 = static_cast<std::size_t>(a.c1_kernel), k = static_cast<std::size_t>(a.kernel);
        const auto c1 = static_cast<std::size_t>(a.c1_out), b1 = static_cast<std::size_t>(a.b1_out),
                   g1 = static_cast<std::size_t>(a.g1_out);
        switch (g) {
            case LayerGroup::C1: return {{c1, 1, k1, k1}, c1};
            case LayerGroup::B1: return {{b1, c1 / 2, k, k}, b1};
            case LayerGroup::G1: return {{g1, b1 / 2, k, k}, g1};
            case LayerGroup::EMB:
                if (a.linear_only) return {{E, S * S}, E};
                return {{2 * E, g1 / 2 * (S / 8) * (S / 8)}, 2 * E};
            default: break;
        }
        return {};
    };

    std::size_t stream = 0;
    const auto init = [&](const std::vector<std::size_t>& shape, std::size_t fan_in, double gain) {
        auto t = make_tensor<R>(shape);
        std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                          0x6e6eu, static_cast<std::uint32_t>(stream++)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal(0.0, std::sqrt(gain / static_cast<double>(fan_in)));
        for (auto& v : t->value) v = static_cast<R>(normal(rng));
        return t;
    };

    for (auto g : kBackbone) {
        if (!uses_group(config_, g)) continue;
        const auto [ws, bs] = shapes(g);
        std::size_t fan_in = 1;
        for (std::size_t i = 1; i < ws.size(); ++i) fan_in *= ws[i];
        add_block({block_name(g, "weight", std::nullopt), g, std::nullopt, false}, init(ws, fan_in, 2.0));
        add_block({block_name(g, "bias", std::nullopt), g, std::nullopt, false}, make_tensor<R>({bs}));
    }
    // DSU copies start as copies of the shared block.
    for (auto g : kBackbone) {
        if (!uses_group(config_, g) || !config_.adapt.contains(g)) continue;
        for (auto c : config_.channels) {
            if (c == ChannelId::gray) continue;
            for (const char* kind : {"weight", "bias"}) {
                const auto src = *find(block_name(g, kind, std::nullopt));
                add_block({block_name(g, kind, c), g, c, false}, std::make_shared<Tensor<R>>(*params_[src]));
            }
        }
    }
    const std::size_t head_in = config_.channels.size() * E;
    if (a.head_hidden == 0) {
        add_block({"FFC.fc.weight", LayerGroup::FFC, std::nullopt, false}, init({1, head_in}, head_in, 1.0));
        add_block({"FFC.fc.bias", LayerGroup::FFC, std::nullopt, false}, make_tensor<R>({1}));
    } else {
        const auto h = static_cast<std::size_t>(a.head_hidden);
        add_block({"FFC.fc1.weight", LayerGroup::FFC, std::nullopt, false}, init({h, head_in}, head_in, 1.0));
        add_block({"FFC.fc1.bias", LayerGroup::FFC, std::nullopt, false}, make_tensor<R>({h}));
        add_block({"FFC.fc2.weight", LayerGroup::FFC, std::nullopt, false}, init({1, h}, h, 1.0));
        add_block({"FFC.fc2.bias", LayerGroup::FFC, std::nullopt, false}, make_tensor<R>({1}));
    }
    set_trainable(false);
}

template <typename R>
Network<R>::Network(const Network& other) : config_(other.config_), blocks_(other.blocks_) {
    for (const auto& t : other.params_) params_.push_back(std::make_shared<Tensor<R>>(*t));
}

template <typename R>
Network<R>& Network<R>::operator=(const Network& other) {
    if (this != &other) *this = Network(other);
    return *this;
}

template <typename R>
void Network<R>::add_block(ParamBlock meta, TensorPtr<R> t) {
    if (find(meta.name)) throw ArgumentError("duplicate parameter block '" + meta.name + "'");
    blocks_.push_back(std::move(meta));
    params_.push_back(std::move(t));
}

template <typename R>
std::optional<std::size_t> Network<R>::find(const std::string& name) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
        if (blocks_[i].name == name) return i;
    return std::nullopt;
}

template <typename R>
void Network<R>::set_trainable(bool backbone_trainable) {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        auto& b = blocks_[i];
        b.trainable = b.group == LayerGroup::FFC || b.channel.has_value() || backbone_trainable;
        auto& t = *params_[i];
        t.requires_grad = b.trainable;
        t.grad.assign(b.trainable ? t.numel() : 0, R(0));
    }
}

template <typename R>
void Network<R>::load_backbone(const Network& other) {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& b = blocks_[i];
        if (!is_backbone(b.group)) continue;
        const auto src_name = block_name(b.group, b.name.find(".weight") != std::string::npos ? "weight" : "bias",
                                         std::nullopt);
        const auto src = other.find(src_name);
        if (!src) throw ArgumentError("pretrained network lacks block '" + src_name + "'");
        const auto& from = other.tensor(*src);
        if (from.shape != params_[i]->shape) throw ShapeError("pretrained block '" + src_name + "' has another shape");
        params_[i]->value = from.value;
    }
}

template <typename R>
std::optional<ChannelId> Network<R>::owner(LayerGroup g, ChannelId c) const {
    if (c != ChannelId::gray && config_.adapt.contains(g)) return c;
    return std::nullopt;
}

template <typename R>
const TensorPtr<R>& Network<R>::param(LayerGroup g, std::optional<ChannelId> c, const char* kind) const {
    const auto i = find(block_name(g, kind, c));
    if (!i) throw ArgumentError("network has no block '" + block_name(g, kind, c) + "'");
    return params_[*i];
}

template <typename R>
bool Network<R>::branch_static(ChannelId c) const {
    for (auto g : kBackbone) {
        if (!uses_group(config_, g)) continue;
        if (param(g, owner(g, c), "weight")->requires_grad || param(g, owner(g, c), "bias")->requires_grad)
            return false;
    }
    return true;
}

template <typename R>
TensorPtr<R> Network<R>::branch(Tape<R>& tape, ChannelId c, const TensorPtr<R>& x) const {
    const auto S = static_cast<std::size_t>(config_.input_size);
    if (!x || x->shape.size() != 4 || x->dim(1) != 1 || x->dim(2) != S || x->dim(3) != S)
        throw ShapeError("branch input must be N x 1 x " + std::to_string(S) + " x " + std::to_string(S));
    bool known = false;
    for (auto ch : config_.channels) known = known || ch == c;
    if (!known) throw ArgumentError("channel '" + std::string(mcpad::to_string(c)) + "' is not configured");

    const auto w = [&](LayerGroup g) { return param(g, owner(g, c), "weight"); };
    const auto b = [&](LayerGroup g) { return param(g, owner(g, c), "bias"); };
    if (config_.arch.linear_only)
        return tape.linear(tape.flatten(x), w(LayerGroup::EMB), b(LayerGroup::EMB));

    auto h = x;
    const int p1 = config_.arch.c1_kernel / 2, p = config_.arch.kernel / 2;
    h = tape.maxpool2(tape.mfm(tape.conv2d(h, w(LayerGroup::C1), b(LayerGroup::C1), 1, p1)));
    h = tape.maxpool2(tape.mfm(tape.conv2d(h, w(LayerGroup::B1), b(LayerGroup::B1), 1, p)));
    h = tape.maxpool2(tape.mfm(tape.conv2d(h, w(LayerGroup::G1), b(LayerGroup::G1), 1, p)));
    return tape.mfm(tape.linear(tape.flatten(h), w(LayerGroup::EMB), b(LayerGroup::EMB)));
}

template <typename R>
TensorPtr<R> Network<R>::head(Tape<R>& tape, const std::vector<TensorPtr<R>>& embeddings) const {
    if (embeddings.size() != config_.channels.size())
        throw ArgumentError("head needs one embedding per configured channel");
    auto z = tape.concat(embeddings);
    if (config_.arch.head_hidden == 0)
        return tape.sigmoid(tape.linear(z, param(LayerGroup::FFC, std::nullopt, "fc.weight"),
                                        param(LayerGroup::FFC, std::nullopt, "fc.bias")));
    z = tape.sigmoid(tape.linear(z, param(LayerGroup::FFC, std::nullopt, "fc1.weight"),
                                 param(LayerGroup::FFC, std::nullopt, "fc1.bias")));
    return tape.sigmoid(tape.linear(z, param(LayerGroup::FFC, std::nullopt, "fc2.weight"),
                                    param(LayerGroup::FFC, std::nullopt, "fc2.bias")));
}

template <typename R>
TensorPtr<R> Network<R>::forward(Tape<R>& tape, const std::vector<TensorPtr<R>>& inputs) const {
    if (inputs.size() != config_.channels.size())
        throw ArgumentError("forward needs " + std::to_string(config_.channels.size()) + " channel inputs, got " +
                            std::to_string(inputs.size()));
    std::vector<TensorPtr<R>> emb;
    for (std::size_t i = 0; i < inputs.size(); ++i) emb.push_back(branch(tape, config_.channels[i], inputs[i]));
    return head(tape, emb);
}

template <typename R>
template <typename S>
Network<S> Network<R>::cast() const {
    Network<S> out;
    out.set_config(config_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& src = *params_[i];
        auto t = make_tensor<S>(src.shape, src.requires_grad);
        for (std::size_t j = 0; j < src.numel(); ++j) t->value[j] = static_cast<S>(src.value[j]);
        out.add_block(blocks_[i], t);
    }
    return out;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;

}  // namespace mcpad::mccnn
