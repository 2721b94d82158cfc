#pragma once

// Naive reference implementations shared by the unit tests and the
// acceptance runner. Deliberately written the slow, obvious way.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mcpad/dataset.hpp"
#include "mcpad/eval.hpp"

namespace mcpad::oracle {

struct Counts {
    std::size_t attacks = 0, attacks_accepted = 0, bonafide = 0, bonafide_rejected = 0;
    std::map<AttackType, std::pair<std::size_t, std::size_t>> per_pai;  // (count, accepted)
};

inline Counts count(const ScoreSet& s, double t) {
    Counts c;
    for (const auto& e : s) {
        if (e.label == Label::attack) {
            ++c.attacks;
            auto& p = c.per_pai[e.attack_type];
            ++p.first;
            if (e.score >= t) {
                ++c.attacks_accepted;
                ++p.second;
            }
        } else {
            ++c.bonafide;
            if (e.score < t) ++c.bonafide_rejected;
        }
    }
    return c;
}

// Largest bonafide score whose dev BPCER stays within the target, found by
// trying every candidate.
inline double threshold(const ScoreSet& dev, double target) {
    std::vector<double> bf;
    for (const auto& e : dev)
        if (e.label == Label::bonafide) bf.push_back(e.score);
    double best = -std::numeric_limits<double>::infinity();
    for (double t : bf) {
        std::size_t rejected = 0;
        for (double s : bf) rejected += s < t;
        if (static_cast<double>(rejected) <= target * static_cast<double>(bf.size())) best = std::max(best, t);
    }
    return best;
}

struct RocRow {
    double t;
    std::size_t a, b;
};

inline std::vector<RocRow> roc(const ScoreSet& s) {
    std::set<double> distinct;
    for (const auto& e : s) distinct.insert(e.score);
    std::vector<double> ts{std::numeric_limits<double>::infinity()};
    for (auto it = distinct.rbegin(); it != distinct.rend(); ++it) ts.push_back(*it);
    ts.push_back(-std::numeric_limits<double>::infinity());
    std::vector<RocRow> out;
    for (double t : ts) {
        RocRow r{t, 0, 0};
        for (const auto& e : s)
            if (e.score >= t) (e.label == Label::attack ? r.a : r.b) += 1;
        out.push_back(r);
    }
    return out;
}

// Scores drawn from a small pool so ties are common.
inline ScoreSet random_scores(std::mt19937_64& rng, std::size_t max_n = 500) {
    const std::size_t n = 2 + rng() % (max_n - 1);
    const int pool = 1 + static_cast<int>(rng() % 60);
    ScoreSet s;
    for (std::size_t i = 0; i < n; ++i) {
        ScoreEntry e;
        e.score = static_cast<double>(rng() % pool) / pool;
        e.label = rng() % 3 == 0 ? Label::bonafide : Label::attack;
        e.attack_type = e.label == Label::attack ? kAttackTypes[rng() % 7] : AttackType::none;
        e.sample_id = "s" + std::to_string(i);
        s.push_back(e);
    }
    // Both classes present.
    s[0].label = Label::bonafide;
    s[0].attack_type = AttackType::none;
    s[1].label = Label::attack;
    s[1].attack_type = AttackType::print;
    return s;
}

// Random manifest: >= 3 clients per category, several samples per client.
inline Manifest random_manifest(std::mt19937_64& rng) {
    Manifest m;
    std::uint32_t client = 0;
    std::vector<AttackType> cats{AttackType::none};
    for (auto t : kAttackTypes)
        if (rng() % 2) cats.push_back(t);
    if (cats.size() == 1) cats.push_back(AttackType::replay);
    for (auto t : cats) {
        const std::uint32_t clients = 3 + static_cast<std::uint32_t>(rng() % 10);
        for (std::uint32_t c = 0; c < clients; ++c, ++client) {
            const int samples = 1 + static_cast<int>(rng() % 3);
            for (int k = 0; k < samples; ++k) {
                SampleMeta meta{"c" + std::to_string(client) + "_" + std::to_string(k), client,
                                t == AttackType::none ? Label::bonafide : Label::attack, t, 1 + k};
                m.entries.push_back({meta.sample_id + ".mcpd", meta});
            }
        }
    }
    std::shuffle(m.entries.begin(), m.entries.end(), rng);
    return m;
}

// Independent statement of the protocol invariants; returns an empty string
// when they hold.
inline std::string protocol_violation(const ProtocolSpec& p, const Manifest& m) {
    std::map<std::uint32_t, std::set<Split>> splits;
    if (p.assignment.size() != m.entries.size()) return "not every sample is assigned";
    for (const auto& e : m.entries) {
        const auto it = p.assignment.find(e.meta.sample_id);
        if (it == p.assignment.end()) return "unassigned " + e.meta.sample_id;
        splits[e.meta.client_id].insert(it->second);
        if (p.left_out) {
            const bool held = e.meta.attack_type == *p.left_out;
            if (held && it->second != Split::eval) return "left-out sample outside eval";
            if (!held && e.meta.label == Label::attack && it->second == Split::eval)
                return "other attack in eval";
        }
    }
    for (const auto& [c, s] : splits)
        if (s.size() != 1) return "client " + std::to_string(c) + " spans splits";
    return {};
}

}  // namespace mcpad::oracle
