#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "mcpad/error.hpp"
#include "mcpad/mccnn.hpp"
#include "test_util.hpp"

using namespace mcpad;
using namespace mcpad::mccnn;

namespace {

using TP = TensorPtr<double>;

TP leaf(std::vector<std::size_t> shape, std::mt19937_64& rng, double scale = 1.0) {
    auto t = make_tensor<double>(std::move(shape), true);
    std::normal_distribution<double> n(0.0, scale);
    for (auto& v : t->value) v = n(rng);
    return t;
}

// Max relative error between tape gradients and central differences of
// L = sum_j r_j * out_j with fixed random r. `build` must return a tensor
// with batch size 1 (or a scalar).
double op_grad_error(const std::vector<TP>& leaves, const std::function<TP(Tape<double>&)>& build,
                     double eps = 1e-6) {
    std::mt19937_64 rng(1234);
    Tape<double> probe;
    const auto out0 = build(probe);
    probe.clear();
    auto r = make_tensor<double>({1, out0->numel()});
    for (auto& v : r->value) v = std::normal_distribution<double>()(rng);
    auto zb = make_tensor<double>({1});
    const auto loss = [&](Tape<double>& t) { return t.linear(t.flatten(build(t)), r, zb); };
    const auto value = [&] {
        Tape<double> t;
        return loss(t)->value[0];
    };
    for (const auto& l : leaves) l->zero_grad();
    {
        Tape<double> t;
        t.backward(loss(t));
    }
    double worst = 0.0;
    for (const auto& l : leaves)
        for (std::size_t j = 0; j < l->numel(); ++j) {
            const double orig = l->value[j];
            l->value[j] = orig + eps;
            const double up = value();
            l->value[j] = orig - eps;
            const double down = value();
            l->value[j] = orig;
            const double num = (up - down) / (2 * eps);
            const double a = l->grad[j];
            worst = std::max(worst, std::abs(a - num) / std::max({1.0, std::abs(a), std::abs(num)}));
        }
    return worst;
}

McCnnConfig tiny_config(std::vector<ChannelId> channels = {ChannelId::gray, ChannelId::depth}) {
    McCnnConfig c;
    c.channels = std::move(channels);
    c.input_size = 16;
    c.embedding = 8;
    c.arch.c1_out = 4;
    c.arch.b1_out = 4;
    c.arch.g1_out = 4;
    c.arch.c1_kernel = 3;
    c.arch.kernel = 3;
    c.arch.head_hidden = 4;
    c.epochs = 2;
    c.pretrain_epochs = 2;
    c.batch_size = 4;
    c.lr = 1e-3;
    return c;
}

// Bonafide frames are brighter in the depth channel; gray is noise for both.
FrameSet toy_frames(const std::vector<ChannelId>& channels, int size, std::size_t n, std::uint64_t seed,
                    bool gray_signal = false) {
    std::mt19937_64 rng(seed);
    FrameSet set;
    set.channels = channels;
    set.size = size;
    for (std::size_t i = 0; i < n; ++i) {
        Frame f;
        f.label = i % 2 ? Label::attack : Label::bonafide;
        f.attack_type = f.label == Label::attack ? AttackType::print : AttackType::none;
        f.sample_id = "s" + std::to_string(i / 2);
        f.client_id = static_cast<std::uint32_t>(i / 2);
        f.frame_idx = i % 2;
        for (auto c : channels) {
            std::vector<std::uint8_t> px(static_cast<std::size_t>(size * size));
            const bool signal = c == ChannelId::depth || (gray_signal && c == ChannelId::gray);
            const int base = signal && f.label == Label::bonafide ? 170 : 80;
            for (auto& v : px) v = static_cast<std::uint8_t>(base + static_cast<int>(rng() % 60));
            f.channels.push_back(std::move(px));
        }
        set.frames.push_back(std::move(f));
    }
    return set;
}

std::vector<std::uint8_t> block_bytes(const McCnnModel& m, const std::string& name) {
    return encode_block(m, *m.find(name));
}

}  // namespace

TEST_CASE("MFM forward and gradient routing") {
    Tape<double> tape;
    auto x = make_tensor<double>({1, 4}, true);
    x->value = {1, -2, 0, 3};
    const auto y = tape.mfm(x);
    CHECK(y->value == std::vector<double>{1, 3});

    std::mt19937_64 rng(3);
    auto img = leaf({1, 4, 3, 3}, rng);
    const std::size_t half = 2 * 9;
    for (std::size_t j = 0; j < half; ++j) {
        Tape<double> t;
        auto out = t.mfm(img);
        CHECK(out->value[j] == std::max(img->value[j], img->value[j + half]));
        auto sel = make_tensor<double>({1, half});
        sel->value[j] = 1.0;
        img->zero_grad();
        t.backward(t.linear(t.flatten(out), sel, make_tensor<double>({1})));
        int nonzero = 0;
        double mass = 0;
        for (double g : img->grad) {
            nonzero += g != 0.0;
            mass += g;
        }
        CHECK(nonzero == 1);
        CHECK(mass == 1.0);
    }

    // Identical halves: everything goes to the first.
    auto dup = make_tensor<double>({1, 6}, true);
    dup->value = {0.5, -1, 2, 0.5, -1, 2};
    Tape<double> t;
    auto sel = make_tensor<double>({1, 3});
    sel->value = {1, 1, 1};
    t.backward(t.linear(t.flatten(t.mfm(dup)), sel, make_tensor<double>({1})));
    CHECK(dup->grad == std::vector<double>{1, 1, 1, 0, 0, 0});

    CHECK_THROWS_AS((void)tape.mfm(make_tensor<double>({1, 3})), ShapeError);
}

TEST_CASE("conv2d by hand") {
    Tape<double> tape;
    auto x = make_tensor<double>({1, 1, 4, 4});
    for (std::size_t i = 0; i < 16; ++i) x->value[i] = static_cast<double>(i) * 1.5;
    auto id = make_tensor<double>({1, 1, 1, 1});
    id->value = {1.0};
    CHECK(tape.conv2d(x, id, make_tensor<double>({1}), 1, 0)->value == x->value);

    auto c = make_tensor<double>({1, 1, 5, 5});
    std::fill(c->value.begin(), c->value.end(), 2.5);
    auto ones = make_tensor<double>({1, 1, 3, 3});
    std::fill(ones->value.begin(), ones->value.end(), 1.0);
    const auto y = tape.conv2d(c, ones, make_tensor<double>({1}), 1, 1);
    REQUIRE(y->shape == std::vector<std::size_t>{1, 1, 5, 5});
    CHECK(y->value[2 * 5 + 2] == 22.5);
    CHECK(y->value[0] == 10.0);  // corner sees 4 taps
    CHECK_THROWS_AS((void)tape.conv2d(c, make_tensor<double>({1, 2, 3, 3}), make_tensor<double>({1}), 1, 1),
                    ShapeError);
}

TEST_CASE("every op matches central differences") {
    std::mt19937_64 rng(7);
    SUBCASE("conv2d stride 1") {
        auto x = leaf({1, 2, 5, 5}, rng), w = leaf({3, 2, 3, 3}, rng), b = leaf({3}, rng);
        CHECK(op_grad_error({x, w, b}, [&](Tape<double>& t) { return t.conv2d(x, w, b, 1, 1); }) < 1e-4);
    }
    SUBCASE("conv2d stride 2, no padding") {
        auto x = leaf({1, 2, 7, 6}, rng), w = leaf({2, 2, 3, 3}, rng), b = leaf({2}, rng);
        CHECK(op_grad_error({x, w, b}, [&](Tape<double>& t) { return t.conv2d(x, w, b, 2, 0); }) < 1e-4);
    }
    SUBCASE("conv2d 5x5, padding 2") {
        auto x = leaf({1, 1, 6, 6}, rng), w = leaf({2, 1, 5, 5}, rng), b = leaf({2}, rng);
        CHECK(op_grad_error({x, w, b}, [&](Tape<double>& t) { return t.conv2d(x, w, b, 1, 2); }) < 1e-4);
    }
    SUBCASE("maxpool2") {
        auto x = leaf({1, 3, 4, 6}, rng);
        CHECK(op_grad_error({x}, [&](Tape<double>& t) { return t.maxpool2(x); }) < 1e-4);
    }
    SUBCASE("mfm") {
        auto x = leaf({1, 4, 3, 3}, rng);
        CHECK(op_grad_error({x}, [&](Tape<double>& t) { return t.mfm(x); }) < 1e-5);
        auto v = leaf({1, 6}, rng);
        CHECK(op_grad_error({v}, [&](Tape<double>& t) { return t.mfm(v); }) < 1e-5);
    }
    SUBCASE("linear") {
        auto x = leaf({1, 5}, rng), w = leaf({3, 5}, rng), b = leaf({3}, rng);
        CHECK(op_grad_error({x, w, b}, [&](Tape<double>& t) { return t.linear(x, w, b); }) < 1e-4);
    }
    SUBCASE("sigmoid") {
        auto x = leaf({1, 9}, rng, 4.0);
        x->value[0] = 45.0;
        x->value[1] = -60.0;
        CHECK(op_grad_error({x}, [&](Tape<double>& t) { return t.sigmoid(x); }) < 1e-4);
    }
    SUBCASE("concat") {
        auto a = leaf({1, 3}, rng), b = leaf({1, 4}, rng);
        CHECK(op_grad_error({a, b}, [&](Tape<double>& t) { return t.concat({a, b}); }) < 1e-4);
    }
    SUBCASE("weighted bce over a batch") {
        auto x = leaf({4, 1}, rng);
        const std::vector<Label> y{Label::bonafide, Label::attack, Label::attack, Label::attack};
        const auto w = batch_class_weights(y);
        CHECK(op_grad_error({x}, [&](Tape<double>& t) {
                  return t.weighted_bce(t.sigmoid(x), y, w.bonafide, w.attack);
              }) < 1e-4);
    }
}

TEST_CASE("class weights and loss by hand") {
    std::vector<Label> batch(32, Label::attack);
    std::fill(batch.begin(), batch.begin() + 8, Label::bonafide);
    auto w = batch_class_weights(batch);
    CHECK(w.bonafide == 2.0);
    CHECK(w.attack == doctest::Approx(2.0 / 3.0));
    std::vector<Label> balanced{Label::bonafide, Label::attack};
    w = batch_class_weights(balanced);
    CHECK(w.bonafide == 1.0);
    CHECK(w.attack == 1.0);
    std::vector<Label> attacks(32, Label::attack);
    w = batch_class_weights(attacks);
    CHECK(w.bonafide == 1.0);
    CHECK(w.attack == 0.5);

    CHECK(weighted_bce(1, 1.0, {}) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(weighted_bce(0, 0.5, {}) == doctest::Approx(std::log(2.0)));
    for (double p : {0.1, 0.37, 0.9})
        for (int y : {0, 1})
            CHECK(weighted_bce(y, p, {}) == doctest::Approx(-(y * std::log(p) + (1 - y) * std::log(1 - p))));
    CHECK(std::isfinite(weighted_bce(1, 0.0, {})));
}

TEST_CASE("head width scales with the channel count") {
    const std::vector<ChannelId> all{ChannelId::gray, ChannelId::depth, ChannelId::infrared, ChannelId::thermal};
    std::mt19937_64 rng(2);
    for (unsigned mask = 1; mask < 16; ++mask) {
        std::vector<ChannelId> ch;
        for (unsigned i = 0; i < 4; ++i)
            if (mask & (1u << i)) ch.push_back(all[i]);
        auto cfg = tiny_config(ch);
        const McCnnModel m(cfg);
        const auto& w = m.tensor(*m.find("FFC.fc1.weight"));
        CHECK(w.dim(1) == ch.size() * 8);
        Tape<float> tape;
        std::vector<TensorPtr<float>> in;
        for (std::size_t c = 0; c < ch.size(); ++c) {
            auto x = make_tensor<float>({3, 1, 16, 16});
            for (auto& v : x->value) v = static_cast<float>(rng() % 256) / 255.0f;
            in.push_back(x);
        }
        const auto p = m.forward(tape, in);
        REQUIRE(p->shape == std::vector<std::size_t>{3, 1});
        for (float v : p->value) CHECK((v > 0.0f && v < 1.0f));
    }
    McCnnConfig def;
    const McCnnModel big(def);
    CHECK(big.tensor(*big.find("FFC.fc1.weight")).dim(1) == 256);
}

TEST_CASE("DSU layout") {
    auto cfg = tiny_config({ChannelId::gray, ChannelId::depth, ChannelId::thermal});
    cfg.adapt = {LayerGroup::C1, LayerGroup::B1};
    const McCnnModel m(cfg);
    CHECK(m.find("C1.weight"));
    CHECK(m.find("C1.weight@depth"));
    CHECK(m.find("B1.bias@thermal"));
    CHECK(!m.find("C1.weight@gray"));
    CHECK(!m.find("G1.weight@depth"));
    CHECK(!m.find("EMB.weight@depth"));
    for (std::size_t i = 0; i < m.block_count(); ++i) {
        const auto& b = m.block(i);
        CHECK(b.trainable == (b.group == LayerGroup::FFC || b.channel.has_value()));
    }
    CHECK(m.branch_static(ChannelId::gray));
    CHECK(!m.branch_static(ChannelId::depth));

    cfg.adapt.clear();
    const McCnnModel shared(cfg);
    Tape<float> tape;
    auto x = make_tensor<float>({2, 1, 16, 16});
    std::mt19937 rng(4);
    for (auto& v : x->value) v = static_cast<float>(rng() % 256) / 255.0f;
    CHECK(shared.branch(tape, ChannelId::gray, x)->value == shared.branch(tape, ChannelId::depth, x)->value);
    CHECK(shared.branch(tape, ChannelId::thermal, x)->value.size() == 2 * 8);
    CHECK_THROWS_AS((void)shared.branch(tape, ChannelId::infrared, x), ArgumentError);
    CHECK_THROWS_AS((void)shared.branch(tape, ChannelId::gray, make_tensor<float>({2, 1, 8, 8})), ShapeError);

    auto bad = cfg;
    bad.adapt = {LayerGroup::FFC};
    CHECK_THROWS_AS((void)McCnnModel(bad), ArgumentError);
}

TEST_CASE("network gradients match central differences") {
    auto cfg = tiny_config();
    cfg.adapt = {LayerGroup::C1, LayerGroup::G1};
    const auto batch = toy_frames(cfg.channels, 16, 2, 3);
    const auto net = Network<double>(cfg);
    const auto r = grad_check(net, batch, {1e-4, 12, 1});
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < 1e-3);

    auto all = net;
    all.set_trainable(true);
    CHECK(grad_check(all, batch, {1e-4, 6, 2}).max_rel_error < 1e-3);

    auto zeros = batch;
    for (auto& f : zeros.frames)
        for (auto& c : f.channels) std::fill(c.begin(), c.end(), 0);
    const auto z = grad_check(all, zeros, {1e-4, 6, 3});
    // Zero input and zero biases put every MFM pair on a tie, where the
    // function has a kink; only finiteness is meaningful there.
    CHECK(std::isfinite(z.max_rel_error));

    auto lin = tiny_config();
    lin.arch.linear_only = true;
    lin.adapt = {LayerGroup::EMB};
    auto lnet = Network<double>(lin);
    lnet.set_trainable(true);
    CHECK(grad_check(lnet, batch, {1e-4, 0, 1}).max_rel_error < 1e-7);
}

TEST_CASE("flip coins are per sample and shared by every channel") {
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(flip_coin(7, 3, i, 0.5) == flip_coin(7, 3, i, 0.5));
        CHECK(!flip_coin(7, 3, i, 0.0));
        CHECK(flip_coin(7, 3, i, 1.0));
    }
    int heads = 0;
    for (std::size_t i = 0; i < 2000; ++i) heads += flip_coin(1, 0, i, 0.5);
    CHECK(heads > 900);
    CHECK(heads < 1100);

    auto cfg = tiny_config({ChannelId::gray, ChannelId::depth, ChannelId::thermal});
    cfg.epochs = 1;
    const auto train_set = toy_frames(cfg.channels, 16, 12, 5);
    const auto dev_set = toy_frames(cfg.channels, 16, 6, 6);
    std::vector<std::pair<int, std::size_t>> coin_calls;
    TrainHooks hooks;
    hooks.flip = [&](int epoch, std::size_t i) {
        coin_calls.emplace_back(epoch, i);
        return i % 3 == 0;
    };
    std::size_t checked = 0;
    hooks.on_batch = [&](int, const std::vector<std::size_t>& idx, const std::vector<bool>& flips,
                         const std::vector<TensorPtr<float>>& inputs) {
        REQUIRE(inputs.size() == 3);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            CHECK(flips[k] == (idx[k] % 3 == 0));
            for (std::size_t c = 0; c < 3; ++c) {
                const auto& px = train_set.frames[idx[k]].channels[c];
                const float* in = inputs[c]->value.data() + k * 256;
                for (std::size_t y = 0; y < 16; ++y)
                    for (std::size_t x = 0; x < 16; ++x) {
                        const std::size_t sx = flips[k] ? 15 - x : x;
                        CHECK(in[y * 16 + x] == static_cast<float>(px[y * 16 + sx]) / 255.0f);
                    }
                ++checked;
            }
        }
    };
    (void)train(train_set, dev_set, cfg, nullptr, hooks);
    CHECK(coin_calls.size() == train_set.frames.size());
    CHECK(checked == 3 * train_set.frames.size());
}

TEST_CASE("training freezes everything outside the adapt set") {
    auto cfg = tiny_config({ChannelId::gray, ChannelId::depth, ChannelId::thermal});
    const auto tr = toy_frames(cfg.channels, 16, 16, 8);
    const auto dv = toy_frames(cfg.channels, 16, 8, 9);
    McCnnModel init;
    const auto res = train(tr, dv, cfg, nullptr, {}, &init);
    for (std::size_t i = 0; i < init.block_count(); ++i) {
        const auto& b = init.block(i);
        const bool same = block_bytes(init, b.name) == block_bytes(res.model, b.name);
        if (b.trainable)
            CHECK_MESSAGE(!same, b.name);
        else
            CHECK_MESSAGE(same, b.name);
    }

    cfg.adapt.clear();
    McCnnModel init2;
    const auto only_head = train(tr, dv, cfg, nullptr, {}, &init2);
    for (std::size_t i = 0; i < init2.block_count(); ++i)
        CHECK((encode_block(init2, i) == encode_block(only_head.model, i)) ==
              (init2.block(i).group != LayerGroup::FFC));
}

TEST_CASE("adapted channels diverge from the gray branch") {
    auto cfg = tiny_config();
    cfg.adapt = {LayerGroup::C1};
    cfg.epochs = 3;
    const auto tr = toy_frames(cfg.channels, 16, 16, 10);
    const auto res = train(tr, tr, cfg, nullptr);
    Tape<float> tape;
    auto x = make_tensor<float>({1, 1, 16, 16});
    for (std::size_t i = 0; i < x->numel(); ++i) x->value[i] = static_cast<float>(tr.frames[0].channels[0][i]) / 255.0f;
    CHECK(res.model.branch(tape, ChannelId::gray, x)->value != res.model.branch(tape, ChannelId::depth, x)->value);
}

TEST_CASE("pretraining halves the loss and is deterministic") {
    auto cfg = tiny_config({ChannelId::gray});
    cfg.pretrain_epochs = 25;
    cfg.lr = 3e-3;
    const auto tr = toy_frames(cfg.channels, 16, 32, 11, true);
    std::vector<double> trace;
    const auto a = pretrain_reference(tr, cfg, &trace);
    REQUIRE(trace.size() == 26);
    CHECK(trace.back() <= 0.5 * trace.front());
    const auto b = pretrain_reference(tr, cfg);
    CHECK(encode_model(a) == encode_model(b));

    const McCnnModel full(cfg);
    for (std::size_t i = 0; i < full.block_count(); ++i) {
        const auto& blk = full.block(i);
        if (blk.group == LayerGroup::FFC) continue;
        const auto j = a.find(blk.name);
        REQUIRE(j);
        CHECK(a.tensor(*j).shape == full.tensor(i).shape);
    }

    auto one = tr;
    for (auto& f : one.frames) f.label = Label::bonafide, f.attack_type = AttackType::none;
    CHECK_THROWS_AS((void)pretrain_reference(one, cfg), FitError);
    CHECK_THROWS_AS((void)train(one, tr, tiny_config({ChannelId::gray}), nullptr), FitError);
}

TEST_CASE("training and scoring are deterministic") {
    auto cfg = tiny_config();
    const auto tr = toy_frames(cfg.channels, 16, 16, 12);
    const auto dv = toy_frames(cfg.channels, 16, 8, 13);
    const auto pre = pretrain_reference(tr, cfg);
    const auto a = train(tr, dv, cfg, &pre);
    const auto b = train(tr, dv, cfg, &pre);
    CHECK(encode_model(a.model) == encode_model(b.model));
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.history.size() == static_cast<std::size_t>(cfg.epochs));
    CHECK(score_frames(a.model, dv) == score_frames(b.model, dv));
}

TEST_CASE("model serialization") {
    auto cfg = tiny_config({ChannelId::gray, ChannelId::infrared});
    cfg.adapt = {LayerGroup::B1, LayerGroup::EMB};
    const McCnnModel m(cfg);
    const auto bytes = encode_model(m);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MCNN");
    const auto back = decode_model(bytes);
    CHECK(back.config() == cfg);
    CHECK(encode_model(back) == bytes);
    for (std::size_t i = 0; i < m.block_count(); ++i) CHECK(back.tensor(i).value == m.tensor(i).value);

    test::TempDir dir;
    write_model(m, dir.path / "m.mcnn");
    CHECK(encode_model(read_model(dir.path / "m.mcnn")) == bytes);

    auto cut = bytes;
    cut.resize(cut.size() - 3);
    CHECK_THROWS_AS((void)decode_model(cut), FormatError);
    auto extra = bytes;
    extra.push_back(1);
    CHECK_THROWS_AS((void)decode_model(extra), FormatError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS((void)decode_model(magic), FormatError);

    CHECK(config_from_json(config_to_json(cfg)) == cfg);
    CHECK_THROWS_AS((void)config_from_json("{\"bogus\": 1}"), ArgumentError);
}
