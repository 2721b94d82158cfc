#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mcpad/classical.hpp"
#include "mcpad/error.hpp"
#include "test_util.hpp"

using namespace mcpad;

namespace {

LabeledMatrix blobs(std::uint64_t seed, std::size_t per_class, double separation) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    LabeledMatrix m;
    m.dim = 2;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const bool bf = i % 2 == 0;
        m.x.push_back(n(rng) + (bf ? separation / 2 : -separation / 2));
        m.x.push_back(n(rng) * 3.0 + 10.0);
        m.y.push_back(bf ? Label::bonafide : Label::attack);
    }
    return m;
}

}  // namespace

TEST_CASE("standardizer by hand") {
    LabeledMatrix m;
    m.dim = 2;
    m.x = {0, 5, 2, 5, 100, -3};
    m.y = {Label::bonafide, Label::bonafide, Label::attack};
    const auto s = standardize_fit(m, FitPopulation::bonafide_only);
    CHECK(s.mean[0] == 1.0);
    CHECK(s.std[0] == 1.0);
    CHECK(s.mean[1] == 5.0);
    CHECK(s.std[1] == kStdFloor);

    // Attack rows never enter a bonafide-only fit.
    std::mt19937 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        LabeledMatrix more = m;
        for (int k = 0; k < 5; ++k) {
            more.x.push_back(rng() % 1000);
            more.x.push_back(rng() % 1000);
            more.y.push_back(Label::attack);
        }
        const auto t = standardize_fit(more, FitPopulation::bonafide_only);
        CHECK(t.mean == s.mean);
        CHECK(t.std == s.std);
    }

    const auto all = standardize_fit(m, FitPopulation::all);
    CHECK(all.mean[0] == doctest::Approx(34.0));

    LabeledMatrix one;
    one.dim = 1;
    one.x = {1.0, 2.0};
    one.y = {Label::bonafide, Label::attack};
    CHECK_THROWS_AS((void)standardize_fit(one, FitPopulation::bonafide_only), FitError);
}

TEST_CASE("LR before training scores one half") {
    LrModel m;
    m.w = {0.0, 0.0};
    m.standardizer.mean = {0.0, 0.0};
    m.standardizer.std = {1.0, 1.0};
    CHECK(lr_score(m, std::vector<double>{3.0, -4.0}) == 0.5);
    CHECK_THROWS_AS((void)lr_score(m, std::vector<double>{1.0}), ArgumentError);

    auto trained = lr_train(blobs(1, 20, 6), LrOptions{0.1, 0, 0.5});
    CHECK(lr_score(trained, std::vector<double>{1.0, 2.0}) == 0.5);
}

TEST_CASE("LR separates two blobs six sigma apart") {
    const auto data = blobs(2, 100, 6.0);
    std::vector<double> trace;
    const auto m = lr_train(data, LrOptions{}, &trace);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const double p = lr_score(m, data.row(i));
        correct += (p >= 0.5) == (data.y[i] == Label::bonafide);
    }
    CHECK(correct == data.rows());
    REQUIRE(trace.size() == static_cast<std::size_t>(LrOptions{}.epochs) + 1);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
}

TEST_CASE("LR loss never increases, even with an aggressive step") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        LabeledMatrix m;
        m.dim = 4;
        for (int i = 0; i < 60; ++i) {
            for (int d = 0; d < 4; ++d) m.x.push_back(std::normal_distribution<double>()(rng));
            m.y.push_back(rng() % 2 ? Label::bonafide : Label::attack);
        }
        std::vector<double> trace;
        (void)lr_train(m, LrOptions{0.01, 100, 50.0}, &trace);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
    }
}

TEST_CASE("LR regularization shrinks weights") {
    const auto data = blobs(4, 50, 3.0);
    double prev = 1e300;
    for (double lambda : {0.01, 1.0, 100.0}) {
        const auto m = lr_train(data, LrOptions{lambda, 300, 0.5});
        double norm = 0;
        for (double w : m.w) norm += w * w;
        CHECK(norm < prev);
        prev = norm;
    }
}

TEST_CASE("LR needs both classes") {
    LabeledMatrix m;
    m.dim = 1;
    m.x = {1, 2, 3};
    m.y = {Label::bonafide, Label::bonafide, Label::bonafide};
    CHECK_THROWS_AS((void)lr_train(m, LrOptions{}), FitError);
    CHECK_THROWS_AS((void)svm_train(m, SvmOptions{}), FitError);
}

TEST_CASE("SVM max-margin boundary in 1-D") {
    LabeledMatrix m;
    m.dim = 1;
    m.x = {-1.0, 1.0};
    m.y = {Label::attack, Label::bonafide};
    SvmOptions opt;
    opt.C = 100.0;
    opt.epochs = 2000;
    const auto s = svm_train(m, opt);
    // Boundary where w*z + b = 0 in standardized space; standardization over
    // both rows is the identity here.
    const double boundary = -s.bias / s.w[0];
    CHECK(std::abs(boundary) <= 0.1);
    CHECK(svm_score(s, std::vector<double>{1.0}) > 0);
    CHECK(svm_score(s, std::vector<double>{-1.0}) < 0);

    LabeledMatrix flipped = m;
    flipped.y = {Label::bonafide, Label::attack};
    const auto f = svm_train(flipped, opt);
    CHECK(f.w[0] == doctest::Approx(-s.w[0]).epsilon(0.05));
}

TEST_CASE("SVM raw margin") {
    SvmModel m;
    m.w = {1.0, 0.0};
    m.standardizer.mean = {0.0, 0.0};
    m.standardizer.std = {1.0, 1.0};
    CHECK(svm_score(m, std::vector<double>{2.0, 0.0}) == 2.0);
}

TEST_CASE("decisions are invariant to per-dimension positive rescaling") {
    const auto data = blobs(5, 60, 2.0);
    LabeledMatrix scaled = data;
    for (std::size_t i = 0; i < scaled.rows(); ++i) {
        scaled.x[i * 2] *= 8.0;
        scaled.x[i * 2 + 1] *= 0.25;
    }
    const auto a = lr_train(data, LrOptions{});
    const auto b = lr_train(scaled, LrOptions{});
    const auto sa = svm_train(data, SvmOptions{});
    const auto sb = svm_train(scaled, SvmOptions{});
    for (std::size_t i = 0; i < data.rows(); ++i) {
        CHECK((lr_score(a, data.row(i)) >= 0.5) == (lr_score(b, scaled.row(i)) >= 0.5));
        CHECK((svm_score(sa, data.row(i)) >= 0) == (svm_score(sb, scaled.row(i)) >= 0));
    }
}

TEST_CASE("score normalization and fusion") {
    const std::vector<double> fit{0.0, 10.0};
    const auto n = score_normalize_fit(fit);
    CHECK(n.apply(5.0) == 0.5);
    CHECK(n.apply(20.0) == 1.0);
    CHECK(n.apply(-3.0) == 0.0);
    CHECK_THROWS_AS((void)score_normalize_fit(std::vector<double>{2.0, 2.0}), FitError);

    std::mt19937 rng(6);
    std::vector<double> raw(50);
    for (auto& v : raw) v = std::uniform_real_distribution<double>(-5, 5)(rng);
    const auto nr = score_normalize_fit(raw);
    for (std::size_t i = 0; i < raw.size(); ++i)
        for (std::size_t j = 0; j < raw.size(); ++j)
            if (raw[i] < raw[j]) CHECK(nr.apply(raw[i]) < nr.apply(raw[j]));

    CHECK(fuse_mean(std::vector<double>{0.2, 0.4, 0.6, 0.8}) == doctest::Approx(0.5));
    CHECK(fuse_mean(std::vector<double>{0.3}) == 0.3);
    CHECK(fuse_mean(std::vector<double>{0.7, 0.7, 0.7}) == doctest::Approx(0.7));
    CHECK_THROWS_AS((void)fuse_mean(std::vector<double>{}), ArgumentError);
    CHECK_THROWS_AS((void)fuse_mean(std::vector<double>{1.5}), ArgumentError);

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(1 + rng() % 6);
        for (auto& v : s) v = std::uniform_real_distribution<double>(0, 1)(rng);
        const double f = fuse_mean(s);
        CHECK(f >= *std::min_element(s.begin(), s.end()) - 1e-15);
        CHECK(f <= *std::max_element(s.begin(), s.end()) + 1e-15);
        std::shuffle(s.begin(), s.end(), rng);
        CHECK(fuse_mean(s) == doctest::Approx(f).epsilon(1e-15));
    }
}

TEST_CASE("linear model blobs round trip") {
    const auto data = blobs(7, 20, 4.0);
    const LinearModel lr = lr_train(data, LrOptions{});
    const LinearModel svm = svm_train(data, SvmOptions{});
    test::TempDir dir;
    for (const auto& m : {lr, svm}) {
        const auto bytes = encode_model(m);
        CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MCLM");
        CHECK(encode_model(decode_model(bytes)) == bytes);
        write_model(m, dir.path / "m.mclm");
        CHECK(encode_model(read_model(dir.path / "m.mclm")) == bytes);
        auto cut = bytes;
        cut.pop_back();
        CHECK_THROWS_AS((void)decode_model(cut), FormatError);
    }
    const auto back = std::get<LrModel>(decode_model(encode_model(lr)));
    for (std::size_t i = 0; i < data.rows(); ++i)
        CHECK(lr_score(back, data.row(i)) == lr_score(std::get<LrModel>(lr), data.row(i)));
}
