#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "mcpad/error.hpp"
#include "mcpad/eval.hpp"
#include "mcpad/text.hpp"

namespace mcpad {
namespace {

double percent(std::size_t part, std::size_t whole) {
    return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

nlohmann::ordered_json split_json(const SplitMetrics& m) {
    nlohmann::ordered_json j;
    j["apcer"] = m.apcer;
    j["bpcer"] = m.bpcer;
    j["acer"] = m.acer;
    j["apcer_max_pai"] = m.apcer_max_pai;
    j["counts"] = {{"attacks", m.attacks},
                   {"attacks_accepted", m.attacks_accepted},
                   {"bonafide", m.bonafide},
                   {"bonafide_rejected", m.bonafide_rejected}};
    auto pai = nlohmann::ordered_json::object();
    for (const auto& p : m.per_pai)
        pai[std::string(to_string(p.type))] = {
            {"count", p.count}, {"accepted", p.accepted}, {"apcer", p.apcer}, {"accuracy", p.accuracy}};
    j["per_pai"] = std::move(pai);
    return j;
}

}  // namespace

double threshold_at_bpcer(const ScoreSet& dev, double target) {
    if (!(target >= 0.0 && target <= 1.0)) throw ArgumentError("BPCER target must lie in [0, 1]");
    std::vector<double> bf;
    for (const auto& e : dev)
        if (e.label == Label::bonafide) bf.push_back(e.score);
    if (bf.empty()) throw MetricError("threshold selection needs bonafide scores");
    std::sort(bf.begin(), bf.end());
    const auto n = bf.size();
    const auto k = static_cast<std::size_t>(std::floor(target * static_cast<double>(n)));
    return k >= n ? bf.back() : bf[k];
}

SplitMetrics compute_metrics(const ScoreSet& scores, double threshold) {
    SplitMetrics m;
    std::map<AttackType, PaiBreakdown> pai;
    for (const auto& e : scores) {
        const bool accepted = e.score >= threshold;
        if (e.label == Label::bonafide) {
            ++m.bonafide;
            if (!accepted) ++m.bonafide_rejected;
        } else {
            ++m.attacks;
            auto& p = pai[e.attack_type];
            p.type = e.attack_type;
            ++p.count;
            if (accepted) {
                ++m.attacks_accepted;
                ++p.accepted;
            }
        }
    }
    m.apcer = percent(m.attacks_accepted, m.attacks);
    m.bpcer = percent(m.bonafide_rejected, m.bonafide);
    m.acer = (m.apcer + m.bpcer) / 2.0;
    for (auto& [type, p] : pai) {
        p.apcer = percent(p.accepted, p.count);
        p.accuracy = percent(p.count - p.accepted, p.count);
        m.apcer_max_pai = std::max(m.apcer_max_pai, p.apcer);
        m.per_pai.push_back(p);
    }
    return m;
}

std::map<AttackType, double> per_pai_accuracy(const ScoreSet& scores, double threshold) {
    std::map<AttackType, double> out;
    for (const auto& p : compute_metrics(scores, threshold).per_pai) out[p.type] = p.accuracy;
    return out;
}

std::vector<RocPoint> roc(const ScoreSet& scores) {
    std::vector<std::pair<double, bool>> sorted;  // (score, is attack)
    std::size_t na = 0, nb = 0;
    for (const auto& e : scores) {
        const bool attack = e.label == Label::attack;
        (attack ? na : nb) += 1;
        sorted.emplace_back(e.score, attack);
    }
    if (na == 0 || nb == 0) throw MetricError("ROC needs both bonafide and attack scores");
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    const auto point = [&](double t, std::size_t a, std::size_t b) {
        return RocPoint{t, a, b, static_cast<double>(a) / static_cast<double>(na),
                        static_cast<double>(b) / static_cast<double>(nb)};
    };
    std::vector<RocPoint> out;
    out.push_back(point(std::numeric_limits<double>::infinity(), 0, 0));
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double t = sorted[i].first;
        for (; i < sorted.size() && sorted[i].first == t; ++i) (sorted[i].second ? a : b) += 1;
        out.push_back(point(t, a, b));
    }
    out.push_back(point(-std::numeric_limits<double>::infinity(), na, nb));
    return out;
}

MetricsReport evaluate(const ScoreSet& dev, const ScoreSet& eval, double target_bpcer) {
    MetricsReport r;
    r.target_bpcer = target_bpcer;
    r.threshold = threshold_at_bpcer(dev, target_bpcer);
    r.dev = compute_metrics(dev, r.threshold);
    r.eval = compute_metrics(eval, r.threshold);
    r.eval_roc = roc(eval);
    return r;
}

std::string format_metrics_csv(const MetricsReport& report) {
    std::string out = "split,apcer,bpcer,acer,threshold,apcer_max_pai\n";
    for (const auto& [name, m] : {std::pair{"dev", &report.dev}, std::pair{"eval", &report.eval}})
        out += std::string(name) + ',' + text::format_double(m->apcer) + ',' + text::format_double(m->bpcer) + ',' +
               text::format_double(m->acer) + ',' + text::format_double(report.threshold) + ',' +
               text::format_double(m->apcer_max_pai) + '\n';
    return out;
}

std::string format_per_pai_csv(const MetricsReport& report) {
    std::string out = "split,attack_type,count,accepted,apcer,accuracy\n";
    for (const auto& [name, m] : {std::pair{"dev", &report.dev}, std::pair{"eval", &report.eval}})
        for (const auto& p : m->per_pai)
            out += std::string(name) + ',' + std::string(to_string(p.type)) + ',' + std::to_string(p.count) + ',' +
                   std::to_string(p.accepted) + ',' + text::format_double(p.apcer) + ',' +
                   text::format_double(p.accuracy) + '\n';
    return out;
}

std::string format_roc_csv(const std::vector<RocPoint>& points) {
    std::string out = "threshold,apcer,bpcer\n";
    for (const auto& p : points)
        out += text::format_double(p.threshold) + ',' + text::format_double(p.apcer) + ',' +
               text::format_double(1.0 - p.bonafide_accept) + '\n';
    return out;
}

std::string format_report_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["protocol"] = report.protocol;
    j["system"] = report.system;
    j["threshold_rule"] = {{"target_bpcer", report.target_bpcer}, {"threshold", report.threshold}};
    j["dev"] = split_json(report.dev);
    j["eval"] = split_json(report.eval);
    j["roc_points"] = report.eval_roc.size();
    return j.dump(2) + "\n";
}

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
    write_text_atomic(dir / "metrics.csv", format_metrics_csv(report));
    write_text_atomic(dir / "per_pai.csv", format_per_pai_csv(report));
    write_text_atomic(dir / "roc.csv", format_roc_csv(report.eval_roc));
    write_text_atomic(dir / "report.json", format_report_json(report));
}

}  // namespace mcpad
