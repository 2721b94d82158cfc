#include <unordered_map>

#include "mcpad/error.hpp"
#include "mcpad/eval.hpp"
#include "mcpad/text.hpp"

namespace mcpad {

std::string format_scores(const ScoreSet& scores) {
    std::string out = kScoreHeader;
    out += '\n';
    for (const auto& s : scores)
        out += s.sample_id + ',' + std::to_string(s.frame_idx) + ',' + text::format_double(s.score) + ',' +
               std::string(to_string(s.label)) + ',' + std::string(to_string(s.attack_type)) + '\n';
    return out;
}

ScoreSet parse_scores(const std::string& content, const Manifest* manifest) {
    std::unordered_map<std::string_view, std::uint32_t> clients;
    if (manifest)
        for (const auto& e : manifest->entries) clients.emplace(e.meta.sample_id, e.meta.client_id);

    const auto rows = text::lines(content);
    if (rows.empty() || text::trim(rows.front()) != kScoreHeader) throw FormatError("bad score file header", 0);
    ScoreSet out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto line = text::trim(rows[i]);
        if (line.empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != 5) throw ArgumentError("score row " + std::to_string(i + 1) + " needs 5 fields");
        ScoreEntry e;
        e.sample_id = std::string(f[0]);
        e.frame_idx = static_cast<std::size_t>(text::to_uint(f[1]));
        e.score = text::to_double(f[2]);
        e.label = parse_label(f[3]);
        e.attack_type = parse_attack_type(f[4]);
        if ((e.label == Label::attack) != (e.attack_type != AttackType::none))
            throw ArgumentError("score row " + std::to_string(i + 1) + ": label and attack type disagree");
        if (manifest) {
            const auto it = clients.find(e.sample_id);
            if (it == clients.end()) throw ArgumentError("score file names unknown sample '" + e.sample_id + "'");
            e.client_id = it->second;
        }
        out.push_back(std::move(e));
    }
    return out;
}

void write_scores(const ScoreSet& scores, const std::filesystem::path& path) {
    write_text_atomic(path, format_scores(scores));
}

ScoreSet read_scores(const std::filesystem::path& path, const Manifest* manifest) {
    return parse_scores(read_text(path), manifest);
}

}  // namespace mcpad
