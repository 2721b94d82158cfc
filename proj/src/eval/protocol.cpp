#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mcpad/error.hpp"
#include "mcpad/eval.hpp"
#include "mcpad/text.hpp"

namespace mcpad {
namespace {

// Category key: 0 for bonafide, otherwise the attack type's value.
using Category = std::uint8_t;

Category category_of(const SampleMeta& m) { return static_cast<Category>(m.attack_type); }

// client -> smallest category it appears in.
std::map<std::uint32_t, Category> client_categories(const Manifest& manifest) {
    std::map<std::uint32_t, Category> out;
    for (const auto& e : manifest.entries) {
        const auto c = category_of(e.meta);
        auto [it, inserted] = out.emplace(e.meta.client_id, c);
        if (!inserted) it->second = std::min(it->second, c);
    }
    return out;
}

std::map<Category, std::vector<std::uint32_t>> clients_by_category(const Manifest& manifest) {
    std::map<Category, std::vector<std::uint32_t>> out;
    for (const auto& [client, cat] : client_categories(manifest)) out[cat].push_back(client);
    return out;
}

// Fisher-Yates with an explicit index draw so the permutation does not depend
// on the standard library's shuffle implementation.
void shuffle_clients(std::vector<std::uint32_t>& clients, std::uint64_t seed, Category cat) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x9e37u,
                      static_cast<std::uint32_t>(cat)};
    std::mt19937_64 rng(seq);
    for (std::size_t i = clients.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(clients[i - 1], clients[j]);
    }
}

void assign_clients(const std::vector<std::uint32_t>& clients, std::span<const double> ratios,
                    std::span<const Split> splits, std::map<std::uint32_t, Split>& out) {
    const auto sizes = largest_remainder(clients.size(), ratios);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < sizes.size(); ++s)
        for (std::size_t k = 0; k < sizes[s]; ++k) out[clients[pos++]] = splits[s];
}

ProtocolSpec from_client_splits(std::string name, const Manifest& manifest,
                                const std::map<std::uint32_t, Split>& client_split) {
    ProtocolSpec p;
    p.name = std::move(name);
    for (const auto& e : manifest.entries) {
        const auto it = client_split.find(e.meta.client_id);
        if (it != client_split.end()) p.assignment[e.meta.sample_id] = it->second;
    }
    return p;
}

void check_ratios(std::span<const double> ratios) {
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw ArgumentError("split ratios must be finite and >= 0");
        sum += r;
    }
    if (!(sum > 0.0)) throw ArgumentError("split ratios must not all be zero");
}

constexpr Split kAllSplits[] = {Split::train, Split::dev, Split::eval};

}  // namespace

std::vector<std::string> ProtocolSpec::samples_in(Split split) const {
    std::vector<std::string> out;
    for (const auto& [id, s] : assignment)
        if (s == split) out.push_back(id);
    return out;
}

std::vector<std::size_t> largest_remainder(std::size_t n, std::span<const double> ratios) {
    check_ratios(ratios);
    const double sum = std::accumulate(ratios.begin(), ratios.end(), 0.0);
    std::vector<std::size_t> sizes(ratios.size());
    std::vector<double> rem(ratios.size());
    std::size_t used = 0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        const double quota = static_cast<double>(n) * ratios[i] / sum;
        sizes[i] = static_cast<std::size_t>(std::floor(quota));
        rem[i] = quota - std::floor(quota);
        used += sizes[i];
    }
    std::vector<std::size_t> order(ratios.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; used < n; ++k, ++used) ++sizes[order[k % order.size()]];
    return sizes;
}

ProtocolSpec make_grandtest(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed) {
    check_ratios(ratios);
    std::map<std::uint32_t, Split> client_split;
    for (auto& [cat, clients] : clients_by_category(manifest)) {
        if (clients.size() < 3)
            throw ProtocolError("category '" + std::string(to_string(static_cast<AttackType>(cat))) +
                                "' has fewer than 3 clients");
        shuffle_clients(clients, seed, cat);
        assign_clients(clients, ratios, kAllSplits, client_split);
    }
    return from_client_splits("grandtest", manifest, client_split);
}

ProtocolSpec make_loo(const Manifest& manifest, AttackType attack, std::uint64_t seed,
                      const SplitRatios& bonafide_ratios) {
    if (attack == AttackType::none) throw ArgumentError("cannot leave out the bonafide class");
    check_ratios(bonafide_ratios);
    auto groups = clients_by_category(manifest);
    const auto held = static_cast<Category>(attack);
    if (!groups.contains(held))
        throw ProtocolError("attack '" + std::string(to_string(attack)) + "' is not present in the manifest");
    if (!groups.contains(0) || groups[0].size() < 3) throw ProtocolError("LOO needs at least 3 bonafide clients");

    std::map<std::uint32_t, Split> client_split;
    constexpr double kHalves[] = {0.5, 0.5};
    constexpr Split kTrainDev[] = {Split::train, Split::dev};
    for (auto& [cat, clients] : groups) {
        shuffle_clients(clients, seed, cat);
        if (cat == 0)
            assign_clients(clients, bonafide_ratios, kAllSplits, client_split);
        else if (cat == held)
            for (auto c : clients) client_split[c] = Split::eval;
        else
            assign_clients(clients, kHalves, kTrainDev, client_split);
    }
    auto p = from_client_splits(loo_name(attack), manifest, client_split);
    p.left_out = attack;
    return p;
}

std::string loo_name(AttackType attack) {
    if (attack == AttackType::print) return "LOO_prints";
    return "LOO_" + std::string(to_string(attack));
}

std::optional<AttackType> loo_attack(std::string_view protocol_name) {
    constexpr std::string_view prefix = "LOO_";
    if (!protocol_name.starts_with(prefix)) return std::nullopt;
    for (auto t : kAttackTypes)
        if (loo_name(t) == protocol_name) return t;
    throw ProtocolError("unknown leave-one-out protocol '" + std::string(protocol_name) + "'");
}

void check_protocol(const ProtocolSpec& protocol, const Manifest& manifest) {
    std::map<std::string_view, const SampleMeta*> index;
    for (const auto& e : manifest.entries) index.emplace(e.meta.sample_id, &e.meta);
    std::map<std::uint32_t, std::set<Split>> client_splits;
    for (const auto& [id, split] : protocol.assignment) {
        const auto it = index.find(id);
        if (it == index.end()) throw ProtocolError("protocol names unknown sample '" + id + "'");
        const auto& meta = *it->second;
        client_splits[meta.client_id].insert(split);
        if (protocol.left_out) {
            const bool held = meta.attack_type == *protocol.left_out;
            if (held && split != Split::eval)
                throw ProtocolError("left-out sample '" + id + "' appears in " + std::string(to_string(split)));
            if (split == Split::eval && meta.label == Label::attack && !held)
                throw ProtocolError("eval holds non-left-out attack '" + id + "'");
        }
    }
    for (const auto& [client, splits] : client_splits)
        if (splits.size() > 1) throw ProtocolError("client " + std::to_string(client) + " spans several splits");
}

std::string format_protocol(const ProtocolSpec& protocol, const Manifest& manifest) {
    std::string out = "sample_id,client_id,split\n";
    for (const auto& e : manifest.entries) {
        const auto it = protocol.assignment.find(e.meta.sample_id);
        if (it == protocol.assignment.end()) continue;
        out += e.meta.sample_id + ',' + std::to_string(e.meta.client_id) + ',' + std::string(to_string(it->second)) +
               '\n';
    }
    return out;
}

ProtocolSpec parse_protocol(const std::string& name, const std::string& text) {
    ProtocolSpec p;
    p.name = name;
    p.left_out = loo_attack(name);
    const auto rows = text::lines(text);
    if (rows.empty() || text::trim(rows.front()) != "sample_id,client_id,split")
        throw FormatError("bad protocol header", 0);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto line = text::trim(rows[i]);
        if (line.empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != 3) throw ProtocolError("protocol row " + std::to_string(i + 1) + " needs 3 fields");
        if (!p.assignment.emplace(std::string(f[0]), parse_split(f[2])).second)
            throw ProtocolError("sample '" + std::string(f[0]) + "' listed twice");
    }
    return p;
}

}  // namespace mcpad
