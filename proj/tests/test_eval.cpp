#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mcpad/error.hpp"
#include "mcpad/eval.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mcpad;

namespace {

ScoreEntry bf(double s) { return {s, Label::bonafide, AttackType::none, 0, "b", 0}; }
ScoreEntry atk(double s, AttackType t = AttackType::print) { return {s, Label::attack, t, 0, "a", 0}; }

Manifest category_manifest(std::uint32_t bonafide, std::vector<std::pair<AttackType, std::uint32_t>> attacks) {
    Manifest m;
    std::uint32_t client = 0;
    const auto add = [&](AttackType t, std::uint32_t n) {
        for (std::uint32_t i = 0; i < n; ++i, ++client) {
            SampleMeta meta{"c" + std::to_string(client), client, t == AttackType::none ? Label::bonafide : Label::attack,
                            t, 1};
            m.entries.push_back({meta.sample_id + ".mcpd", meta});
        }
    };
    add(AttackType::none, bonafide);
    for (auto [t, n] : attacks) add(t, n);
    return m;
}

std::map<Split, std::set<std::uint32_t>> clients_per_split(const ProtocolSpec& p, const Manifest& m) {
    std::map<Split, std::set<std::uint32_t>> out;
    for (const auto& e : m.entries) out[p.assignment.at(e.meta.sample_id)].insert(e.meta.client_id);
    return out;
}

}  // namespace

TEST_CASE("largest remainder apportionment") {
    const std::vector<double> thirds{1.0 / 3, 1.0 / 3, 1.0 / 3};
    CHECK(largest_remainder(10, thirds) == std::vector<std::size_t>{4, 3, 3});
    CHECK(largest_remainder(9, thirds) == std::vector<std::size_t>{3, 3, 3});
    CHECK(largest_remainder(11, thirds) == std::vector<std::size_t>{4, 4, 3});
    CHECK(largest_remainder(7, std::vector<double>{0.5, 0.5}) == std::vector<std::size_t>{4, 3});
    std::mt19937 rng(1);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> r(1 + rng() % 5);
        for (auto& v : r) v = rng() % 10;
        r[0] += 1;
        const std::size_t n = rng() % 100;
        const auto sizes = largest_remainder(n, r);
        CHECK(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == n);
        double sum = std::accumulate(r.begin(), r.end(), 0.0);
        for (std::size_t k = 0; k < r.size(); ++k) CHECK(std::abs(sizes[k] - n * r[k] / sum) < 1.0);
    }
}

TEST_CASE("grandtest splits clients evenly and disjointly") {
    const auto m = category_manifest(9, {{AttackType::print, 10}});
    const auto p = make_grandtest(m, kEqualThirds, 7);
    CHECK(oracle::protocol_violation(p, m).empty());
    check_protocol(p, m);
    const auto cs = clients_per_split(p, m);
    std::map<Split, int> bf, pr;
    for (const auto& e : m.entries) {
        const auto s = p.assignment.at(e.meta.sample_id);
        (e.meta.label == Label::bonafide ? bf : pr)[s] += 1;
    }
    CHECK(bf[Split::train] == 3);
    CHECK(bf[Split::dev] == 3);
    CHECK(bf[Split::eval] == 3);
    CHECK(pr[Split::train] == 4);
    CHECK(pr[Split::dev] == 3);
    CHECK(pr[Split::eval] == 3);
    CHECK(make_grandtest(m, kEqualThirds, 7).assignment == p.assignment);

    CHECK_THROWS_AS((void)make_grandtest(category_manifest(2, {{AttackType::print, 5}}), kEqualThirds, 1),
                    ProtocolError);
}

TEST_CASE("LOO composition") {
    const auto m = category_manifest(9, {{AttackType::print, 4}, {AttackType::replay, 4}, {AttackType::rigidmask, 4}});
    const auto p = make_loo(m, AttackType::print, 3);
    CHECK(p.name == "LOO_prints");
    CHECK(oracle::protocol_violation(p, m).empty());
    std::set<AttackType> train_dev_attacks, eval_attacks;
    for (const auto& e : m.entries) {
        const auto s = p.assignment.at(e.meta.sample_id);
        if (e.meta.label != Label::attack) continue;
        (s == Split::eval ? eval_attacks : train_dev_attacks).insert(e.meta.attack_type);
    }
    CHECK(train_dev_attacks == std::set<AttackType>{AttackType::replay, AttackType::rigidmask});
    CHECK(eval_attacks == std::set<AttackType>{AttackType::print});
    CHECK_THROWS_AS((void)make_loo(m, AttackType::glasses, 3), ProtocolError);
}

TEST_CASE("LOO protocol names") {
    std::vector<std::string> names;
    for (auto t : kAttackTypes) names.push_back(loo_name(t));
    CHECK(names == std::vector<std::string>{"LOO_glasses", "LOO_fakehead", "LOO_prints", "LOO_replay",
                                            "LOO_rigidmask", "LOO_flexiblemask", "LOO_papermask"});
    for (auto t : kAttackTypes) CHECK(loo_attack(loo_name(t)) == t);
    CHECK(!loo_attack("grandtest").has_value());
}

TEST_CASE("protocol invariants over random manifests") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = oracle::random_manifest(rng);
        const auto seed = rng();
        const auto g = make_grandtest(m, kEqualThirds, seed);
        CHECK(oracle::protocol_violation(g, m).empty());
        std::set<AttackType> present;
        for (const auto& e : m.entries)
            if (e.meta.label == Label::attack) present.insert(e.meta.attack_type);
        for (auto t : present) {
            const auto l = make_loo(m, t, seed);
            CHECK(oracle::protocol_violation(l, m).empty());
            CHECK(l.left_out == t);
        }
    }
}

TEST_CASE("check_protocol catches violations") {
    const auto m = category_manifest(6, {{AttackType::print, 3}, {AttackType::replay, 3}});
    auto p = make_loo(m, AttackType::print, 1);
    for (auto& [id, split] : p.assignment)
        if (m.find(id).meta.attack_type == AttackType::replay) {
            split = Split::eval;
            break;
        }
    CHECK_THROWS_AS(check_protocol(p, m), ProtocolError);
}

TEST_CASE("protocol text round trip") {
    const auto m = category_manifest(6, {{AttackType::print, 3}});
    const auto p = make_grandtest(m, kEqualThirds, 2);
    const auto back = parse_protocol("grandtest", format_protocol(p, m));
    CHECK(back.assignment == p.assignment);
}

TEST_CASE("threshold at BPCER by hand") {
    ScoreSet dev;
    for (int i = 1; i <= 100; ++i) dev.push_back(bf(i / 100.0));
    dev.push_back(atk(0.5));
    const double t = threshold_at_bpcer(dev, 0.01);
    CHECK(t == 0.02);
    CHECK(compute_metrics(dev, t).bpcer == doctest::Approx(1.0));
    CHECK(threshold_at_bpcer(dev, 0.0) == 0.01);

    ScoreSet same{bf(0.4), bf(0.4), bf(0.4), atk(0.1)};
    CHECK(threshold_at_bpcer(same, 0.01) == 0.4);
    CHECK(compute_metrics(same, 0.4).bpcer == 0.0);
    CHECK(threshold_at_bpcer({bf(0.1), bf(0.2)}, 1.0) == 0.2);
    CHECK_THROWS_AS((void)threshold_at_bpcer({atk(0.3)}, 0.01), MetricError);
}

TEST_CASE("metrics by hand") {
    const ScoreSet s{atk(0.1), atk(0.6), atk(0.3), bf(0.9), bf(0.8)};
    const auto m = compute_metrics(s, 0.5);
    CHECK(m.apcer == doctest::Approx(100.0 / 3));
    CHECK(m.bpcer == 0.0);
    CHECK(m.acer == doctest::Approx(50.0 / 3));
    CHECK(m.acer == (m.apcer + m.bpcer) / 2);

    const auto low = compute_metrics(s, 0.0);
    CHECK(low.bpcer == 0.0);
    CHECK(low.apcer == 100.0);
    CHECK(compute_metrics({atk(0.1), bf(0.9)}, 0.5).acer == 0.0);
}

TEST_CASE("per-PAI accuracy by hand") {
    const ScoreSet s{atk(0.6, AttackType::replay), atk(0.4, AttackType::replay), atk(0.1, AttackType::print), bf(0.9)};
    const auto acc = per_pai_accuracy(s, 0.5);
    CHECK(acc.at(AttackType::replay) == 50.0);
    CHECK(acc.at(AttackType::print) == 100.0);
    CHECK(acc.count(AttackType::glasses) == 0);
    const auto m = compute_metrics(s, 0.5);
    CHECK(m.apcer_max_pai == 50.0);
}

TEST_CASE("ROC agrees with a brute-force count") {
    std::mt19937_64 rng(5);
    ScoreSet s;
    for (int i = 0; i < 1000; ++i) {
        const bool a = rng() % 2;
        s.push_back(a ? atk(std::uniform_real_distribution<double>(0, 1)(rng))
                      : bf(std::uniform_real_distribution<double>(0.2, 1.2)(rng)));
    }
    const auto r = roc(s);
    const auto o = oracle::roc(s);
    REQUIRE(r.size() == o.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(r[i].threshold == o[i].t);
        CHECK(r[i].attacks_accepted == o[i].a);
        CHECK(r[i].bonafide_accepted == o[i].b);
    }
    for (std::size_t i = 1; i < r.size(); ++i) {
        CHECK(r[i].apcer >= r[i - 1].apcer);
        CHECK(r[i].bonafide_accept >= r[i - 1].bonafide_accept);
    }

    const auto sep = roc({atk(0.1), atk(0.2), bf(0.8), bf(0.9)});
    bool through = false;
    for (const auto& p : sep) through |= p.apcer == 0.0 && p.bonafide_accept == 1.0;
    CHECK(through);
    CHECK_THROWS_AS((void)roc({bf(0.2)}), MetricError);
}

TEST_CASE("negated scores reflect the ROC") {
    std::mt19937_64 rng(6);
    auto s = oracle::random_scores(rng, 200);
    auto neg = s;
    for (auto& e : neg) e.score = -e.score;
    const auto r = roc(s), n = roc(neg);
    REQUIRE(r.size() == n.size());
    // Accepting score >= t on the negation rejects score > -t on the
    // original; the interior points mirror with the tie group moved.
    const auto na = static_cast<double>(r.back().attacks_accepted), nb = static_cast<double>(r.back().bonafide_accepted);
    for (std::size_t i = 1; i + 1 < r.size(); ++i) {
        const auto& p = r[i];
        const auto& q = n[n.size() - 1 - i];
        std::size_t ta = 0, tb = 0;
        for (const auto& e : s)
            if (e.score == p.threshold) (e.label == Label::attack ? ta : tb) += 1;
        CHECK(q.attacks_accepted == na - p.attacks_accepted + ta);
        CHECK(q.bonafide_accepted == nb - p.bonafide_accepted + tb);
    }
}

TEST_CASE("metrics agree with the counting oracle on random score sets") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = oracle::random_scores(rng);
        const double target = (rng() % 20) / 100.0;
        const double t = threshold_at_bpcer(s, target);
        CHECK(t == oracle::threshold(s, target));
        const auto m = compute_metrics(s, t);
        const auto c = oracle::count(s, t);
        CHECK(m.attacks == c.attacks);
        CHECK(m.attacks_accepted == c.attacks_accepted);
        CHECK(m.bonafide == c.bonafide);
        CHECK(m.bonafide_rejected == c.bonafide_rejected);
        CHECK(m.bpcer <= 100.0 * target + 1e-9);
        CHECK(m.per_pai.size() == c.per_pai.size());
        for (const auto& p : m.per_pai) {
            CHECK(p.count == c.per_pai.at(p.type).first);
            CHECK(p.accepted == c.per_pai.at(p.type).second);
        }
    }
}

TEST_CASE("metrics invariant under strictly increasing transforms") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = oracle::random_scores(rng, 300);
        const double t = threshold_at_bpcer(s, 0.05);
        auto f = [](double v) { return std::exp(3.0 * v) - 7.0; };
        auto mapped = s;
        for (auto& e : mapped) e.score = f(e.score);
        const auto a = compute_metrics(s, t), b = compute_metrics(mapped, f(t));
        CHECK(a.attacks_accepted == b.attacks_accepted);
        CHECK(a.bonafide_rejected == b.bonafide_rejected);
        CHECK(threshold_at_bpcer(mapped, 0.05) == f(t));
    }
}

TEST_CASE("score files and reports") {
    ScoreSet s{atk(0.1), atk(0.6), atk(0.3), bf(0.9), bf(0.8)};
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i].sample_id = "x" + std::to_string(i);
        s[i].frame_idx = i;
    }
    const auto text = format_scores(s);
    CHECK(text.rfind(kScoreHeader, 0) == 0);
    CHECK(parse_scores(text) == s);

    const auto r = evaluate(s, s, 0.01);
    test::TempDir dir;
    write_report(r, dir.path);
    for (const char* f : {"metrics.csv", "per_pai.csv", "roc.csv", "report.json"})
        CHECK(std::filesystem::exists(dir.path / f));
    const auto csv = read_text(dir.path / "metrics.csv");
    CHECK(csv.find("split,apcer,bpcer,acer,threshold") == 0);
}
