#include <doctest.h>

#include <cmath>
#include <random>

#include "mcpad/error.hpp"
#include "mcpad/preprocess.hpp"

using namespace mcpad;

namespace {

Landmarks landmarks_of(const AlignTargets& t) { return {t.left_eye, t.right_eye, t.mouth}; }

Landmarks map(const Landmarks& l, double s, double theta, double tx, double ty) {
    const auto f = [&](Point2 p) {
        return Point2{s * (std::cos(theta) * p.x - std::sin(theta) * p.y) + tx,
                      s * (std::sin(theta) * p.x + std::cos(theta) * p.y) + ty};
    };
    return {f(l.left_eye), f(l.right_eye), f(l.mouth)};
}

}  // namespace

TEST_CASE("similarity fit closed-form cases") {
    const auto t = AlignTargets::for_size(128);
    const auto id = estimate_similarity(landmarks_of(t), t);
    CHECK(id.transform.scale() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(id.transform.rotation()) < 1e-9);
    CHECK(std::abs(id.transform.tx) < 1e-9);
    CHECK(std::abs(id.transform.ty) < 1e-9);
    CHECK(id.residual < 1e-9);

    const auto shifted = estimate_similarity(map(landmarks_of(t), 1, 0, 10, 5), t);
    CHECK(shifted.transform.scale() == doctest::Approx(1.0));
    CHECK(shifted.transform.tx == doctest::Approx(-10.0));
    CHECK(shifted.transform.ty == doctest::Approx(-5.0));

    const auto doubled = estimate_similarity(map(landmarks_of(t), 2, 0, 0, 0), t);
    CHECK(doubled.transform.scale() == doctest::Approx(0.5));
}

TEST_CASE("similarity fit is exact for any similarity image of the targets") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> s(0.3, 3.0), th(-3.0, 3.0), tr(-50, 50);
    const auto t = AlignTargets::for_size(64);
    for (int i = 0; i < 200; ++i) {
        const double sc = s(rng), theta = th(rng), tx = tr(rng), ty = tr(rng);
        const auto src = map(landmarks_of(t), sc, theta, tx, ty);
        const auto fit = estimate_similarity(src, t);
        CHECK(fit.residual < 1e-8);
        CHECK(fit.transform.scale() == doctest::Approx(1.0 / sc).epsilon(1e-9));
        const auto back = fit.transform.apply(src.mouth);
        CHECK(back.x == doctest::Approx(t.mouth.x));
        CHECK(back.y == doctest::Approx(t.mouth.y));
    }
}

TEST_CASE("degenerate landmarks are rejected") {
    const auto t = AlignTargets::for_size(64);
    Landmarks same{{5, 5}, {5, 5}, {5, 5}};
    CHECK_THROWS((void)estimate_similarity(same, t));
}

TEST_CASE("bilinear sampling by hand") {
    ImageF img(2, 2);
    img.at(0, 0) = 0;
    img.at(1, 0) = 255;
    img.at(0, 1) = 0;
    img.at(1, 1) = 255;
    CHECK(sample_bilinear(img, 0.5, 0.0) == 127.5);
    CHECK(sample_bilinear(img, 0.5, 0.5) == 127.5);
    CHECK(sample_bilinear(img, 1.0, 1.0) == 255.0);
    // Right-hand taps fall outside and read as zero.
    CHECK(sample_bilinear(img, 1.5, 0.0) == 127.5);
    CHECK(sample_bilinear(img, -1.0, 0.0) == 0.0);
}

TEST_CASE("warp identity and constant images") {
    std::mt19937 rng(5);
    ImageF img(16, 16);
    for (auto& v : img.data) v = rng() % 256;
    CHECK(warp(img, Similarity{}, 16) == img);

    ImageF flat(32, 32, 1, 77.0);
    Similarity t{0.9 * std::cos(0.2), 0.9 * std::sin(0.2), 2.0, 1.0};
    const auto out = warp(flat, t, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            const auto p = t.inverse().apply({double(x), double(y)});
            if (p.x >= 0 && p.y >= 0 && p.x <= 30 && p.y <= 30) CHECK(out.at(x, y) == doctest::Approx(77.0));
        }
}

TEST_CASE("grayscale conversion") {
    ImageF rgb(3, 1, 3);
    const double px[3][3] = {{255, 255, 255}, {0, 0, 0}, {255, 0, 0}};
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) rgb.at(i, 0, c) = px[i][c];
    const auto g = to_gray(rgb);
    CHECK(g.at(0, 0) == 255);
    CHECK(g.at(1, 0) == 0);
    CHECK(g.at(2, 0) == 76);
}

TEST_CASE("MAD fit and normalization by hand") {
    ImageF v(3, 1);
    v.data = {10, 20, 30};
    const auto p = mad_fit(v);
    CHECK(p.median == 20);
    CHECK(p.mad == 10);
    const auto out = mad_normalize(v, p);
    CHECK(out.data == std::vector<std::uint8_t>{96, 128, 160});

    ImageF w(4, 1);
    w.data = {0, 0, 0, 100};
    const auto q = mad_fit(w);
    CHECK(q.median == 0);
    CHECK(q.mad == 0);
    CHECK(mad_normalize(w, q).data == std::vector<std::uint8_t>(4, 128));

    ImageF flat(5, 5, 1, 900.0);
    CHECK(mad_fit(flat).mad == 0);
    CHECK(mad_normalize(flat, mad_fit(flat)).data == std::vector<std::uint8_t>(25, 128));
}

TEST_CASE("MAD normalization is byte-invariant under positive affine maps") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> a_dist(0.01, 50.0), b_dist(-1000.0, 1000.0);
    for (int trial = 0; trial < 300; ++trial) {
        ImageF img(9, 7);
        const int spread = 1 + static_cast<int>(rng() % 4000);
        for (auto& x : img.data) x = static_cast<double>(rng() % spread);
        const auto ref = mad_normalize(img, mad_fit(img));
        const double a = a_dist(rng), b = b_dist(rng);
        ImageF mapped = img;
        for (auto& x : mapped.data) x = a * x + b;
        CHECK(mad_normalize(mapped, mad_fit(mapped)) == ref);
    }
}

TEST_CASE("preprocess_sample output shape") {
    SynthConfig c;
    c.bonafide_clients = 1;
    c.attack_categories = {{AttackType::print, 1}};
    c.frames_per_sample = 12;
    c.image_size = 48;
    const auto ds = synth_generate(c);
    const auto targets = AlignTargets::for_size(32);
    PreprocessOptions opt;
    opt.frames_per_video = 5;
    const auto r = preprocess_sample(ds.samples[0], ds.landmarks[0], targets, opt);
    CHECK(r.dropped_frames == 0);
    REQUIRE(r.sample.channels.size() == 4);
    for (const auto& st : r.sample.channels) {
        CHECK(st.width == 32);
        CHECK(st.height == 32);
        CHECK(st.frame_count == 5);
        CHECK(st.bit_depth == 8);
    }
    CHECK(r.sample.channels[0].channel == ChannelId::gray);

    // Dropping landmarks drops frames; losing all of them is an error.
    auto partial = ds.landmarks[0];
    partial.erase(partial.begin());
    CHECK(preprocess_sample(ds.samples[0], partial, targets, opt).dropped_frames == 1);
    CHECK_THROWS_AS((void)preprocess_sample(ds.samples[0], {}, targets, opt), SampleError);
}

TEST_CASE("preprocess with landmarks on the targets keeps the grayscale frame") {
    MultiChannelSample raw;
    FrameStack color{ChannelId::color, 32, 32, 1, 8, {}};
    std::mt19937 rng(2);
    for (int i = 0; i < 32 * 32 * 3; ++i) color.values.push_back(static_cast<std::uint16_t>(rng() % 256));
    FrameStack depth{ChannelId::depth, 32, 32, 1, 16, std::vector<std::uint16_t>(32 * 32, 1234)};
    raw.channels = {color, depth};
    const auto targets = AlignTargets::for_size(32);
    const auto r = preprocess_sample(raw, {{0, landmarks_of(targets)}}, targets);
    const auto gray = to_gray(image_from_values(color.frame(0), 32, 32, 3));
    const auto& g = r.sample.at(ChannelId::gray);
    for (std::size_t i = 0; i < gray.data.size(); ++i) CHECK(g.values[i] == gray.data[i]);
    // Planar depth: MAD zero, so every byte is 128.
    for (auto v : r.sample.at(ChannelId::depth).values) CHECK(v == 128);
}

TEST_CASE("300-frame sample keeps 50 frames in every channel") {
    MultiChannelSample raw;
    raw.channels.push_back({ChannelId::color, 8, 8, 300, 8, std::vector<std::uint16_t>(8 * 8 * 3 * 300, 100)});
    raw.channels.push_back({ChannelId::thermal, 8, 8, 300, 16, std::vector<std::uint16_t>(8 * 8 * 300, 3000)});
    AlignTargets t = AlignTargets::for_size(8);
    std::vector<FrameLandmarks> lm;
    for (std::size_t i = 0; i < 300; ++i) lm.push_back({i, landmarks_of(t)});
    const auto r = preprocess_sample(raw, lm, t);
    for (const auto& st : r.sample.channels) CHECK(st.frame_count == 50);
}
