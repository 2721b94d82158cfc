#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "mcpad/error.hpp"
#include "mcpad/mccnn.hpp"

namespace mcpad::mccnn {
namespace {

constexpr std::size_t kScoreBatch = 64;

// Every step allocates and frees multi-megabyte activation buffers. With
// glibc's defaults each of them is a fresh mmap and the page faults cost
// about as much as the arithmetic, so keep freed memory in the heap.
void keep_heap() {
#if defined(__GLIBC__)
    static std::once_flag once;
    std::call_once(once, [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
    });
#endif
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32), tag};
    return std::mt19937_64(seq);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto rng = stream_rng(seed, static_cast<std::uint64_t>(epoch), 0, 0x5f1u);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    return order;
}

// N,1,S,S input for channel slot `c`, mirrored left-right where flips[i].
template <typename R>
TensorPtr<R> channel_input(const FrameSet& set, std::size_t c, const std::vector<std::size_t>& idx,
                           const std::vector<bool>& flips) {
    const auto S = static_cast<std::size_t>(set.size);
    auto t = make_tensor<R>({idx.size(), 1, S, S});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& px = set.frames[idx[i]].channels[c];
        R* dst = t->value.data() + i * S * S;
        for (std::size_t y = 0; y < S; ++y)
            for (std::size_t x = 0; x < S; ++x) {
                const std::size_t sx = flips[i] ? S - 1 - x : x;
                dst[y * S + x] = static_cast<R>(px[y * S + sx]) / R(255);
            }
    }
    return t;
}

// Embeddings of branches without trainable parameters never change during
// a run, so they are computed once per (frame, flip).
class EmbeddingCache {
public:
    EmbeddingCache(const McCnnModel& model, const FrameSet& set) : model_(model), set_(set) {}

    TensorPtr<float> get(std::size_t slot, const std::vector<std::size_t>& idx, const std::vector<bool>& flips) {
        const auto c = model_.config().channels[slot];
        const auto E = static_cast<std::size_t>(model_.config().embedding);
        std::vector<std::size_t> missing;
        std::vector<bool> missing_flips;
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (!cache_.contains(key(slot, idx[i], flips[i]))) {
                missing.push_back(idx[i]);
                missing_flips.push_back(flips[i]);
            }
        for (std::size_t start = 0; start < missing.size(); start += kScoreBatch) {
            const std::size_t end = std::min(missing.size(), start + kScoreBatch);
            const std::vector<std::size_t> part(missing.begin() + start, missing.begin() + end);
            const std::vector<bool> part_flips(missing_flips.begin() + start, missing_flips.begin() + end);
            Tape<float> tape;
            const auto emb = model_.branch(tape, c, channel_input<float>(set_, slot, part, part_flips));
            for (std::size_t i = 0; i < part.size(); ++i)
                cache_[key(slot, part[i], part_flips[i])].assign(emb->value.begin() + i * E,
                                                                 emb->value.begin() + (i + 1) * E);
        }
        auto out = make_tensor<float>({idx.size(), E});
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto& v = cache_.at(key(slot, idx[i], flips[i]));
            std::copy(v.begin(), v.end(), out->value.begin() + i * E);
        }
        return out;
    }

private:
    static std::uint64_t key(std::size_t slot, std::size_t frame, bool flip) {
        return (static_cast<std::uint64_t>(frame) << 8) | (slot << 1) | (flip ? 1u : 0u);
    }

    const McCnnModel& model_;
    const FrameSet& set_;
    std::map<std::uint64_t, std::vector<float>> cache_;
};

TensorPtr<float> forward_batch(Tape<float>& tape, const McCnnModel& model, const FrameSet& set,
                               const std::vector<std::size_t>& idx, const std::vector<bool>& flips,
                               EmbeddingCache* cache, std::vector<TensorPtr<float>>* inputs_out = nullptr) {
    const auto& channels = model.config().channels;
    std::vector<TensorPtr<float>> emb;
    for (std::size_t s = 0; s < channels.size(); ++s) {
        const bool cached = cache && model.branch_static(channels[s]);
        if (inputs_out || !cached) {
            auto x = channel_input<float>(set, s, idx, flips);
            if (inputs_out) inputs_out->push_back(x);
            if (!cached) {
                emb.push_back(model.branch(tape, channels[s], x));
                continue;
            }
        }
        emb.push_back(cache->get(s, idx, flips));
    }
    return model.head(tape, emb);
}

std::vector<float> predict(const McCnnModel& model, const FrameSet& set, EmbeddingCache* cache) {
    std::vector<float> out;
    out.reserve(set.frames.size());
    for (std::size_t start = 0; start < set.frames.size(); start += kScoreBatch) {
        const std::size_t end = std::min(set.frames.size(), start + kScoreBatch);
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < end; ++i) idx.push_back(i);
        Tape<float> tape;
        const auto p = forward_batch(tape, model, set, idx, std::vector<bool>(idx.size(), false), cache);
        out.insert(out.end(), p->value.begin(), p->value.end());
    }
    return out;
}

ScoreSet to_scores(const FrameSet& set, const std::vector<float>& p) {
    ScoreSet out;
    out.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& f = set.frames[i];
        out.push_back({static_cast<double>(p[i]), f.label, f.attack_type, f.client_id, f.sample_id, f.frame_idx});
    }
    return out;
}

std::vector<Label> labels_of(const FrameSet& set) {
    std::vector<Label> out;
    for (const auto& f : set.frames) out.push_back(f.label);
    return out;
}

// Class-weighted BCE over a whole set, weights from the set's own counts.
double set_loss(const std::vector<float>& p, const std::vector<Label>& labels) {
    const auto w = batch_class_weights(labels);
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        total += weighted_bce(labels[i] == Label::bonafide ? 1 : 0, static_cast<double>(p[i]), w);
    return p.empty() ? 0.0 : total / static_cast<double>(p.size());
}

class Adam {
public:
    Adam(McCnnModel& model, const McCnnConfig& cfg) : model_(model), cfg_(cfg) {
        for (std::size_t i = 0; i < model.block_count(); ++i)
            if (model.block(i).trainable) {
                blocks_.push_back(i);
                m_.emplace_back(model.tensor(i).numel(), 0.0f);
                v_.emplace_back(model.tensor(i).numel(), 0.0f);
            }
    }

    void zero_grad() {
        for (auto i : blocks_) model_.tensor(i).zero_grad();
    }

    void step() {
        ++t_;
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            auto& t = model_.tensor(blocks_[k]);
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t j = 0; j < t.numel(); ++j) {
                const double g = t.grad[j];
                m[j] = static_cast<float>(b1 * m[j] + (1.0 - b1) * g);
                v[j] = static_cast<float>(b2 * v[j] + (1.0 - b2) * g * g);
                const double mh = m[j] / c1, vh = v[j] / c2;
                t.value[j] = static_cast<float>(t.value[j] - cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
            }
        }
    }

private:
    McCnnModel& model_;
    const McCnnConfig& cfg_;
    std::vector<std::size_t> blocks_;
    std::vector<std::vector<float>> m_, v_;
    int t_ = 0;
};

// One pass over `set` in the epoch's shuffled order; returns the mean batch
// loss.
double run_epoch(McCnnModel& model, Adam& adam, const FrameSet& set, const McCnnConfig& cfg, int epoch,
                 EmbeddingCache& cache, const TrainHooks& hooks) {
    const auto order = epoch_order(set.frames.size(), cfg.seed, epoch);
    const auto B = static_cast<std::size_t>(cfg.batch_size);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += B) {
        const std::vector<std::size_t> idx(order.begin() + start, order.begin() + std::min(order.size(), start + B));
        std::vector<bool> flips;
        std::vector<Label> labels;
        for (auto i : idx) {
            flips.push_back(hooks.flip ? hooks.flip(epoch, i) : flip_coin(cfg.seed, epoch, i, cfg.flip_prob));
            labels.push_back(set.frames[i].label);
        }
        adam.zero_grad();
        Tape<float> tape;
        std::vector<TensorPtr<float>> inputs;
        const auto p = forward_batch(tape, model, set, idx, flips, &cache, hooks.on_batch ? &inputs : nullptr);
        if (hooks.on_batch) hooks.on_batch(epoch, idx, flips, inputs);
        const auto w = batch_class_weights(labels);
        const auto loss = tape.weighted_bce(p, labels, w.bonafide, w.attack);
        tape.backward(loss);
        adam.step();
        total += loss->value[0];
        ++batches;
    }
    return batches ? total / static_cast<double>(batches) : 0.0;
}

void require_both_classes(const FrameSet& set, const char* what) {
    bool bf = false, at = false;
    for (const auto& f : set.frames) (f.label == Label::bonafide ? bf : at) = true;
    if (!bf || !at) throw FitError(std::string(what) + " needs both bonafide and attack frames");
}

}  // namespace

void FrameSet::validate() const {
    if (size <= 0) throw ArgumentError("frame set has no frame size");
    const auto px = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
    for (const auto& f : frames) {
        if (f.channels.size() != channels.size()) throw ArgumentError("frame '" + f.sample_id + "' misses channels");
        for (const auto& c : f.channels)
            if (c.size() != px) throw ArgumentError("frame '" + f.sample_id + "' has the wrong size");
    }
}

FrameSet FrameSet::select(const std::vector<ChannelId>& wanted) const {
    std::vector<std::size_t> slots;
    for (auto c : wanted) {
        const auto it = std::find(channels.begin(), channels.end(), c);
        if (it == channels.end())
            throw ArgumentError("frame set lacks channel '" + std::string(mcpad::to_string(c)) + "'");
        slots.push_back(static_cast<std::size_t>(it - channels.begin()));
    }
    FrameSet out;
    out.channels = wanted;
    out.size = size;
    out.frames.reserve(frames.size());
    for (const auto& f : frames) {
        Frame g = f;
        g.channels.clear();
        for (auto s : slots) g.channels.push_back(f.channels[s]);
        out.frames.push_back(std::move(g));
    }
    return out;
}

bool flip_coin(std::uint64_t seed, int epoch, std::size_t index, double prob) {
    auto rng = stream_rng(seed, static_cast<std::uint64_t>(epoch), index, 0xf11bu);
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return u < prob;
}

McCnnModel pretrain_reference(const FrameSet& train, const McCnnConfig& config, std::vector<double>* loss_trace) {
    keep_heap();
    const auto cfg = pretrain_config(config);
    const auto set = train.select(cfg.channels);
    set.validate();
    require_both_classes(set, "pretraining");
    if (set.size != cfg.input_size) throw ShapeError("frames do not match the model input size");

    McCnnModel model(cfg);
    model.set_trainable(true);
    Adam adam(model, cfg);
    EmbeddingCache cache(model, set);
    const auto labels = labels_of(set);
    if (loss_trace) loss_trace->assign(1, set_loss(predict(model, set, nullptr), labels));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        (void)run_epoch(model, adam, set, cfg, epoch, cache, {});
        if (loss_trace) loss_trace->push_back(set_loss(predict(model, set, nullptr), labels));
    }
    model.set_trainable(false);
    return model;
}

TrainResult train(const FrameSet& train_set, const FrameSet& dev_set, const McCnnConfig& config,
                  const McCnnModel* pretrained, const TrainHooks& hooks, McCnnModel* initial) {
    keep_heap();
    config.validate();
    const auto tr = train_set.select(config.channels);
    const auto dv = dev_set.select(config.channels);
    tr.validate();
    dv.validate();
    require_both_classes(tr, "training");
    if (dv.frames.empty()) throw FitError("model selection needs dev frames");
    if (tr.size != config.input_size) throw ShapeError("frames do not match the model input size");

    McCnnModel model(config);
    if (pretrained) model.load_backbone(*pretrained);
    model.set_trainable(false);
    if (initial) *initial = model;

    Adam adam(model, config);
    EmbeddingCache train_cache(model, tr), dev_cache(model, dv);
    const auto dev_labels = labels_of(dv);

    TrainResult result;
    result.model = model;
    double best_acer = 0.0, best_loss = 0.0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        EpochLog log;
        log.epoch = epoch;
        log.train_loss = run_epoch(model, adam, tr, config, epoch, train_cache, hooks);
        const auto p = predict(model, dv, &dev_cache);
        const auto scores = to_scores(dv, p);
        log.dev_loss = set_loss(p, dev_labels);
        bool has_bonafide = false;
        for (auto l : dev_labels) has_bonafide = has_bonafide || l == Label::bonafide;
        if (has_bonafide) {
            log.dev_threshold = threshold_at_bpcer(scores, config.target_bpcer);
            log.dev_acer = compute_metrics(scores, log.dev_threshold).acer;
        }
        result.history.push_back(log);
        const bool better = result.best_epoch < 0 || log.dev_acer < best_acer ||
                            (log.dev_acer == best_acer && log.dev_loss < best_loss);
        if (better) {
            result.best_epoch = epoch;
            best_acer = log.dev_acer;
            best_loss = log.dev_loss;
            result.model = model;
        }
    }
    result.model.set_trainable(false);
    return result;
}

ScoreSet score_frames(const McCnnModel& model, const FrameSet& frames) {
    const auto set = frames.select(model.config().channels);
    set.validate();
    if (set.size != model.config().input_size) throw ShapeError("frames do not match the model input size");
    return to_scores(set, predict(model, set, nullptr));
}

GradCheckResult grad_check(const Network<double>& source, const FrameSet& batch, const GradCheckOptions& opt) {
    if (!(opt.eps > 0.0)) throw ArgumentError("finite-difference step must be positive");
    Network<double> model = source;
    const auto set = batch.select(model.config().channels);
    set.validate();
    if (set.frames.empty()) throw ArgumentError("gradient check needs a nonempty batch");

    std::vector<std::size_t> idx(set.frames.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::vector<bool> no_flip(idx.size(), false);
    std::vector<TensorPtr<double>> inputs;
    for (std::size_t s = 0; s < set.channels.size(); ++s) inputs.push_back(channel_input<double>(set, s, idx, no_flip));
    const auto labels = labels_of(set);
    const auto w = batch_class_weights(labels);

    const auto loss_value = [&] {
        Tape<double> tape;
        const double v = tape.weighted_bce(model.forward(tape, inputs), labels, w.bonafide, w.attack)->value[0];
        tape.clear();
        return v;
    };

    for (std::size_t b = 0; b < model.block_count(); ++b) model.tensor(b).zero_grad();
    {
        Tape<double> tape;
        tape.backward(tape.weighted_bce(model.forward(tape, inputs), labels, w.bonafide, w.attack));
    }

    GradCheckResult result;
    auto rng = stream_rng(opt.seed, 0, 0, 0x9cu);
    for (std::size_t b = 0; b < model.block_count(); ++b) {
        if (!model.block(b).trainable) continue;
        auto& t = model.tensor(b);
        std::vector<std::size_t> entries(t.numel());
        for (std::size_t j = 0; j < entries.size(); ++j) entries[j] = j;
        if (opt.per_block && opt.per_block < entries.size()) {
            for (std::size_t j = 0; j < opt.per_block; ++j)
                std::swap(entries[j], entries[j + static_cast<std::size_t>(rng() % (entries.size() - j))]);
            entries.resize(opt.per_block);
        }
        for (auto j : entries) {
            const double orig = t.value[j];
            t.value[j] = orig + opt.eps;
            const double up = loss_value();
            t.value[j] = orig - opt.eps;
            const double down = loss_value();
            t.value[j] = orig;
            const double numeric = (up - down) / (2.0 * opt.eps);
            const double analytic = t.grad[j];
            const double rel =
                std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
            ++result.checked;
            if (result.worst_block.empty() || rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_block = model.block(b).name;
            }
        }
    }
    return result;
}

}  // namespace mcpad::mccnn
