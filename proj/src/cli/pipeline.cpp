#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <thread>

#include <json.hpp>

#include "mcpad/cli.hpp"
#include "mcpad/error.hpp"
#include "mcpad/text.hpp"

namespace mcpad::cli {
namespace fs = std::filesystem;

namespace {

constexpr Split kSplits[] = {Split::train, Split::dev, Split::eval};

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1u, jobs));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(workers, n); ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

const fs::path& require(const fs::path& p) {
    if (!fs::exists(p)) throw ValidationError("missing artifact: " + p.string());
    return p;
}

fs::path preprocessed_dir(const RunConfig& c) { return c.output_root / "preprocessed"; }
fs::path protocols_dir(const RunConfig& c) { return c.output_root / "protocols"; }

fs::path feature_path(const RunConfig& c, const std::string& protocol, Split split, ChannelId ch,
                      const std::string& extractor) {
    return c.output_root / "features" / protocol / std::string(to_string(split)) /
           (std::string(to_string(ch)) + "_" + extractor + ".mcfv");
}

fs::path scores_dir(const RunConfig& c, const std::string& protocol, const std::string& system) {
    return c.output_root / "scores" / protocol / system;
}

Manifest preprocessed_manifest(const RunConfig& c) { return read_manifest(require(preprocessed_dir(c) / "manifest.csv")); }

ImageF frame_image(const FrameStack& s, std::size_t f) {
    return image_from_values(s.frame(f), s.width, s.height, static_cast<int>(s.components()));
}

std::string extractor_id(const RunConfig& c, Extractor e) {
    switch (e) {
        case Extractor::iqm: return kIqmExtractorId;
        case Extractor::lbp: return c.lbp.extractor_id();
        case Extractor::rdwt_haralick: return kRdwtHaralickExtractorId;
    }
    return "?";
}

std::vector<ChannelId> extractor_channels(Extractor e) {
    switch (e) {
        case Extractor::iqm: return {ChannelId::color};
        case Extractor::lbp: return {ChannelId::depth, ChannelId::infrared, ChannelId::thermal};
        case Extractor::rdwt_haralick:
            return {ChannelId::gray, ChannelId::depth, ChannelId::infrared, ChannelId::thermal};
    }
    return {};
}

std::vector<FeatureVector> extract_stack(const RunConfig& c, Extractor e, const FrameStack& stack, const SampleMeta& meta,
                                         const LbpConfig& lbp) {
    std::vector<FeatureVector> out;
    for (std::size_t f = 0; f < stack.frame_count; ++f) {
        const ImageF img = frame_image(stack, f);
        FeatureVector fv = e == Extractor::iqm   ? iqm_features(img, c.iqm)
                           : e == Extractor::lbp ? lbp_histogram(img, lbp)
                                                 : rdwt_haralick_features(img, c.glcm);
        fv.meta = meta;
        fv.frame_idx = f;
        out.push_back(std::move(fv));
    }
    return out;
}

// Split membership of every manifest entry; entries outside the protocol
// are skipped.
std::vector<std::pair<std::size_t, Split>> protocol_rows(const Manifest& m, const ProtocolSpec& p) {
    std::vector<std::pair<std::size_t, Split>> out;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto it = p.assignment.find(m.entries[i].meta.sample_id);
        if (it != p.assignment.end()) out.emplace_back(i, it->second);
    }
    return out;
}

std::vector<std::string> selected_protocols(const RunConfig& c, const StageOptions& opt) {
    if (!opt.protocols.empty()) return opt.protocols;
    auto names = protocol_names(c);
    if (names.empty()) throw ValidationError("no protocols under " + protocols_dir(c).string());
    return names;
}

ScoreEntry score_entry(const Manifest& m, const FeatureRow& row, double score) {
    const auto& meta = m.find(row.sample_id).meta;
    return {score, meta.label, meta.attack_type, meta.client_id, row.sample_id, row.frame_idx};
}

LabeledMatrix labeled(const FeatureTable& t, const Manifest& m) {
    LabeledMatrix out;
    out.dim = t.dim;
    out.x = t.values;
    for (const auto& r : t.rows) out.y.push_back(m.find(r.sample_id).meta.label);
    return out;
}

struct ChannelScores {
    std::map<Split, std::vector<double>> raw;
    std::map<Split, std::vector<FeatureRow>> rows;
    ScoreNormalizer normalizer;
};

ChannelScores fit_channel(const std::map<Split, FeatureTable>& tables, const Manifest& m, Baseline b,
                          const RunConfig& c, const fs::path& model_path) {
    const auto train = labeled(tables.at(Split::train), m);
    LinearModel model = b == Baseline::iqm_lbp_lr ? LinearModel(lr_train(train, c.lr)) : LinearModel(svm_train(train, c.svm));
    write_model(model, model_path);
    ChannelScores out;
    for (auto s : kSplits) {
        const auto& t = tables.at(s);
        auto& scores = out.raw[s];
        for (std::size_t i = 0; i < t.count(); ++i) {
            const std::span<const double> x(t.row(i), t.dim);
            scores.push_back(std::visit(
                [&](const auto& mdl) {
                    if constexpr (std::is_same_v<std::decay_t<decltype(mdl)>, LrModel>)
                        return lr_score(mdl, x);
                    else
                        return svm_score(mdl, x);
                },
                model));
        }
        out.rows[s] = t.rows;
    }
    std::vector<double> fit = out.raw[Split::train];
    fit.insert(fit.end(), out.raw[Split::dev].begin(), out.raw[Split::dev].end());
    out.normalizer = score_normalize_fit(fit);
    return out;
}

void write_split_scores(const fs::path& dir, const std::map<Split, ScoreSet>& sets) {
    for (auto s : {Split::dev, Split::eval}) write_scores(sets.at(s), dir / (std::string(to_string(s)) + ".csv"));
}

double dev_acer(const ScoreSet& dev, double target) {
    return compute_metrics(dev, threshold_at_bpcer(dev, target)).acer;
}

std::string fmt(double v) { return text::format_double(v); }

}  // namespace

std::string_view to_string(Baseline b) noexcept {
    return b == Baseline::iqm_lbp_lr ? "iqm-lbp-lr" : "rdwt-haralick-svm";
}

std::vector<std::string> protocol_names(const RunConfig& c) {
    std::vector<std::string> out;
    if (!fs::exists(protocols_dir(c))) return out;
    for (const auto& e : fs::directory_iterator(protocols_dir(c)))
        if (e.path().extension() == ".csv") out.push_back(e.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
}

ProtocolSpec load_protocol(const RunConfig& c, const std::string& name) {
    auto p = parse_protocol(name, read_text(require(protocols_dir(c) / (name + ".csv"))));
    if (auto a = loo_attack(name)) p.left_out = a;
    return p;
}

mccnn::FrameSet load_frames(const RunConfig& c, const ProtocolSpec& protocol, Split split,
                            const std::vector<ChannelId>& channels) {
    const auto m = preprocessed_manifest(c);
    mccnn::FrameSet out;
    out.channels = channels;
    out.size = c.targets.out_size;
    for (const auto& [i, s] : protocol_rows(m, protocol)) {
        if (s != split) continue;
        const auto& e = m.entries[i];
        const auto sample = read_sample(m.resolve(e), e.meta);
        const std::size_t frames = sample.at(channels.front()).frame_count;
        for (std::size_t f = 0; f < frames; ++f) {
            mccnn::Frame fr;
            fr.label = e.meta.label;
            fr.attack_type = e.meta.attack_type;
            fr.sample_id = e.meta.sample_id;
            fr.client_id = e.meta.client_id;
            fr.frame_idx = f;
            for (auto ch : channels) {
                const auto v = sample.at(ch).frame(f);
                fr.channels.emplace_back(v.begin(), v.end());
            }
            out.frames.push_back(std::move(fr));
        }
    }
    return out;
}

void cmd_synth(const RunConfig& c) {
    const auto ds = synth_generate(c.synth);
    write_synth_dataset(ds, c.data_root);
    write_lock(c, c.data_root);
    std::printf("synth: %zu samples -> %s\n", ds.samples.size(), c.data_root.string().c_str());
}

void cmd_preprocess(const RunConfig& c, const StageOptions& opt) {
    const auto manifest = read_manifest(require(c.data_root / "manifest.csv"));
    manifest.validate(true);
    const auto out_dir = preprocessed_dir(c);
    std::vector<std::size_t> dropped(manifest.entries.size(), 0);
    parallel_for(manifest.entries.size(), opt.jobs, [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        const auto path = manifest.resolve(e);
        const auto raw = read_sample(path, e.meta);
        const auto marks = load_landmarks(path);
        auto res = preprocess_sample(raw, marks, c.targets, c.preprocess);
        res.sample.channels.insert(res.sample.channels.begin(), align_color(raw, marks, c.targets, c.preprocess));
        write_sample(res.sample, out_dir / (e.meta.sample_id + ".mcpd"));
        dropped[i] = res.dropped_frames;
    });
    Manifest out;
    out.base_dir = out_dir;
    for (const auto& e : manifest.entries) out.entries.push_back({e.meta.sample_id + ".mcpd", e.meta});
    write_manifest(out, out_dir / "manifest.csv");
    write_lock(c, out_dir);

    std::vector<ProtocolSpec> protocols;
    if (c.protocols.grandtest) protocols.push_back(make_grandtest(manifest, c.protocols.ratios, c.seed));
    for (auto a : c.protocols.loo) protocols.push_back(make_loo(manifest, a, c.seed, c.protocols.ratios));
    for (const auto& p : protocols) {
        check_protocol(p, manifest);
        write_text_atomic(protocols_dir(c) / (p.name + ".csv"), format_protocol(p, manifest));
    }
    write_lock(c, protocols_dir(c));
    std::size_t total_dropped = 0;
    for (auto d : dropped) total_dropped += d;
    std::printf("preprocess: %zu samples, %zu frames dropped, %zu protocols\n", manifest.entries.size(),
                total_dropped, protocols.size());
}

void cmd_extract(const RunConfig& c, const std::vector<Extractor>& extractors, const StageOptions& opt) {
    const auto m = preprocessed_manifest(c);
    const auto protocols = selected_protocols(c, opt);

    // (extractor, channel) -> per-entry frame features
    std::vector<std::pair<Extractor, ChannelId>> kinds;
    for (auto e : extractors)
        for (auto ch : extractor_channels(e)) kinds.emplace_back(e, ch);
    std::vector<std::vector<std::vector<FeatureVector>>> feats(kinds.size(),
                                                               std::vector<std::vector<FeatureVector>>(m.entries.size()));
    parallel_for(m.entries.size(), opt.jobs, [&](std::size_t i) {
        const auto& e = m.entries[i];
        const auto sample = read_sample(require(m.resolve(e)), e.meta);
        for (std::size_t k = 0; k < kinds.size(); ++k)
            feats[k][i] = extract_stack(c, kinds[k].first, sample.at(kinds[k].second), e.meta, c.lbp);
    });

    for (const auto& name : protocols) {
        const auto p = load_protocol(c, name);
        const auto rows = protocol_rows(m, p);
        for (std::size_t k = 0; k < kinds.size(); ++k)
            for (auto s : kSplits) {
                FeatureTable t;
                for (const auto& [i, split] : rows)
                    if (split == s)
                        for (const auto& fv : feats[k][i]) t.append(fv);
                write_feature_table(t, feature_path(c, name, s, kinds[k].second, extractor_id(c, kinds[k].first)));
            }
    }
    write_lock(c, c.output_root / "features");
    std::printf("extract: %zu feature kinds over %zu protocols\n", kinds.size(), protocols.size());
}

void cmd_sweep_lbp(const RunConfig& c, const StageOptions& opt) {
    const auto m = preprocessed_manifest(c);
    const auto protocols = selected_protocols(c, opt);
    const auto p = load_protocol(c, protocols.front());
    const auto rows = protocol_rows(m, p);

    struct Candidate {
        ChannelId channel;
        LbpConfig lbp;
        std::size_t dim = 0;
        double acer = 0.0;
    };
    std::vector<Candidate> grid;
    for (auto ch : extractor_channels(Extractor::lbp))
        for (int points : {4, 8, 16})
            for (int radius : {1, 2})
                for (int cells : {1, 2, 3, 4}) {
                    LbpConfig l = c.lbp;
                    l.points = points;
                    l.radius = radius;
                    l.grid_rows = l.grid_cols = cells;
                    grid.push_back({ch, l});
                }

    std::vector<MultiChannelSample> samples(m.entries.size());
    parallel_for(rows.size(), opt.jobs, [&](std::size_t r) {
        const auto& e = m.entries[rows[r].first];
        samples[rows[r].first] = read_sample(require(m.resolve(e)), e.meta);
    });
    parallel_for(grid.size(), opt.jobs, [&](std::size_t g) {
        auto& cand = grid[g];
        std::map<Split, FeatureTable> tables;
        for (const auto& [i, split] : rows)
            for (const auto& fv : extract_stack(c, Extractor::lbp, samples[i].at(cand.channel), m.entries[i].meta, cand.lbp))
                tables[split].append(fv);
        const auto model = lr_train(labeled(tables[Split::train], m), c.lr);
        ScoreSet dev;
        const auto& t = tables[Split::dev];
        for (std::size_t i = 0; i < t.count(); ++i)
            dev.push_back(score_entry(m, t.rows[i], lr_score(model, std::span<const double>(t.row(i), t.dim))));
        cand.dim = t.dim;
        cand.acer = dev_acer(dev, c.target_bpcer);
    });

    std::string csv = "channel,points,radius,grid,dim,dev_acer,selected\n";
    for (auto ch : extractor_channels(Extractor::lbp)) {
        const Candidate* best = nullptr;
        for (const auto& cand : grid)
            if (cand.channel == ch && (!best || cand.acer < best->acer || (cand.acer == best->acer && cand.dim < best->dim)))
                best = &cand;
        for (const auto& cand : grid)
            if (cand.channel == ch)
                csv += std::string(to_string(ch)) + "," + std::to_string(cand.lbp.points) + "," +
                       std::to_string(cand.lbp.radius) + "," + std::to_string(cand.lbp.grid_rows) + "x" +
                       std::to_string(cand.lbp.grid_cols) + "," + std::to_string(cand.dim) + "," + fmt(cand.acer) +
                       "," + (&cand == best ? "1" : "0") + "\n";
        std::printf("sweep-lbp: %s -> %s (dev ACER %s)\n", std::string(to_string(ch)).c_str(),
                    best->lbp.extractor_id().c_str(), fmt(best->acer).c_str());
    }
    write_text_atomic(c.output_root / "features" / "lbp_sweep.csv", csv);
}

void cmd_train_baseline(const RunConfig& c, const std::vector<Baseline>& pipelines, const StageOptions& opt) {
    const auto m = preprocessed_manifest(c);
    for (const auto& name : selected_protocols(c, opt))
        for (auto b : pipelines) {
            const std::string system(to_string(b));
            const auto extractor = b == Baseline::iqm_lbp_lr ? std::vector<Extractor>{Extractor::iqm, Extractor::lbp}
                                                             : std::vector<Extractor>{Extractor::rdwt_haralick};
            std::vector<std::pair<Extractor, ChannelId>> kinds;
            for (auto e : extractor)
                for (auto ch : extractor_channels(e)) kinds.emplace_back(e, ch);

            std::vector<ChannelScores> per(kinds.size());
            parallel_for(kinds.size(), opt.jobs, [&](std::size_t k) {
                std::map<Split, FeatureTable> tables;
                for (auto s : kSplits)
                    tables[s] = read_feature_table(
                        require(feature_path(c, name, s, kinds[k].second, extractor_id(c, kinds[k].first))));
                const auto model_path = c.output_root / "models" / name / system /
                                        (std::string(to_string(kinds[k].second)) + ".mclm");
                per[k] = fit_channel(tables, m, b, c, model_path);
            });

            std::string norm_csv = "channel,min,max\n";
            std::map<Split, ScoreSet> fused;
            for (std::size_t k = 0; k < kinds.size(); ++k) {
                const std::string ch(to_string(kinds[k].second));
                norm_csv += ch + "," + fmt(per[k].normalizer.min) + "," + fmt(per[k].normalizer.max) + "\n";
                std::map<Split, ScoreSet> single;
                for (auto s : kSplits) {
                    if (per[k].rows[s] != per[0].rows[s])
                        throw ValidationError("feature rows of " + ch + " do not line up with the other channels");
                    for (std::size_t i = 0; i < per[k].raw[s].size(); ++i)
                        single[s].push_back(score_entry(m, per[k].rows[s][i], per[k].normalizer.apply(per[k].raw[s][i])));
                }
                write_split_scores(scores_dir(c, name, system + "@" + ch), single);
            }
            for (auto s : kSplits)
                for (std::size_t i = 0; i < per[0].rows[s].size(); ++i) {
                    std::vector<double> parts;
                    for (const auto& p : per) parts.push_back(p.normalizer.apply(p.raw.at(s)[i]));
                    fused[s].push_back(score_entry(m, per[0].rows[s][i], fuse_mean(parts)));
                }
            write_split_scores(scores_dir(c, name, system), fused);
            write_text_atomic(c.output_root / "models" / name / system / "normalizers.csv", norm_csv);
            std::printf("train-baseline: %s/%s dev ACER %s\n", name.c_str(), system.c_str(),
                        fmt(dev_acer(fused[Split::dev], c.target_bpcer)).c_str());
        }
    write_lock(c, c.output_root / "models");
    write_lock(c, c.output_root / "scores");
}

void cmd_train_mccnn(const RunConfig& c, const StageOptions& opt) {
    auto channels = c.mccnn.channels;
    if (std::find(channels.begin(), channels.end(), ChannelId::gray) == channels.end())
        channels.push_back(ChannelId::gray);
    for (const auto& name : selected_protocols(c, opt)) {
        const auto p = load_protocol(c, name);
        const auto train = load_frames(c, p, Split::train, channels);
        const auto dev = load_frames(c, p, Split::dev, channels);
        const auto eval = load_frames(c, p, Split::eval, channels);
        const auto dir = c.output_root / "mccnn" / name / c.mccnn_name;

        std::optional<mccnn::McCnnModel> pretrained;
        if (c.mccnn.pretrain) {
            std::vector<double> trace;
            pretrained = mccnn::pretrain_reference(train, c.mccnn, &trace);
            mccnn::write_model(*pretrained, dir / "pretrain.mcnn");
            std::string csv = "epoch,loss\n";
            for (std::size_t i = 0; i < trace.size(); ++i)
                csv += std::to_string(static_cast<long>(i) - 1) + "," + fmt(trace[i]) + "\n";
            write_text_atomic(dir / "pretrain_loss.csv", csv);
        }
        mccnn::McCnnModel initial;
        auto result = mccnn::train(train, dev, c.mccnn, pretrained ? &*pretrained : nullptr, {}, &initial);
        mccnn::write_model(initial, dir / "model_init.mcnn");
        mccnn::write_model(result.model, dir / "model.mcnn");

        std::string hist = "epoch,train_loss,dev_loss,dev_acer,dev_threshold,best\n";
        for (const auto& h : result.history)
            hist += std::to_string(h.epoch) + "," + fmt(h.train_loss) + "," + fmt(h.dev_loss) + "," + fmt(h.dev_acer) +
                    "," + fmt(h.dev_threshold) + "," + (h.epoch == result.best_epoch ? "1" : "0") + "\n";
        write_text_atomic(dir / "history.csv", hist);
        write_lock(c, dir);

        std::map<Split, ScoreSet> sets{{Split::dev, mccnn::score_frames(result.model, dev)},
                                       {Split::eval, mccnn::score_frames(result.model, eval)}};
        write_split_scores(scores_dir(c, name, c.mccnn_name), sets);
        std::printf("train-mccnn: %s/%s best epoch %d, dev ACER %s\n", name.c_str(), c.mccnn_name.c_str(),
                    result.best_epoch, fmt(dev_acer(sets[Split::dev], c.target_bpcer)).c_str());
    }
    write_lock(c, c.output_root / "scores");
}

void cmd_eval(const RunConfig& c, const StageOptions& opt, const std::vector<fs::path>& score_dirs,
              std::optional<double> threshold) {
    const std::optional<Manifest> manifest =
        fs::exists(preprocessed_dir(c) / "manifest.csv") ? std::optional(preprocessed_manifest(c)) : std::nullopt;
    const Manifest* mp = manifest ? &*manifest : nullptr;

    std::vector<std::pair<std::string, fs::path>> jobs;  // protocol, system dir
    if (!score_dirs.empty()) {
        if (opt.protocols.size() > 1) throw ValidationError("explicit score directories take at most one --protocol");
        const std::string protocol = opt.protocols.empty() ? "custom" : opt.protocols.front();
        for (const auto& d : score_dirs) jobs.emplace_back(protocol, d);
    } else {
        for (const auto& name : selected_protocols(c, opt)) {
            std::vector<fs::path> systems;
            for (const auto& e : fs::directory_iterator(require(c.output_root / "scores" / name)))
                if (e.is_directory()) systems.push_back(e.path());
            std::sort(systems.begin(), systems.end());
            for (auto& s : systems) jobs.emplace_back(name, s);
        }
    }
    for (const auto& [protocol, dir] : jobs) {
        const auto system = dir.filename().string();
        const auto eval = read_scores(require(dir / "eval.csv"), mp);
        MetricsReport report;
        if (threshold) {
            report.target_bpcer = c.target_bpcer;
            report.threshold = *threshold;
            if (fs::exists(dir / "dev.csv")) report.dev = compute_metrics(read_scores(dir / "dev.csv", mp), *threshold);
            report.eval = compute_metrics(eval, *threshold);
            report.eval_roc = roc(eval);
        } else {
            report = evaluate(read_scores(require(dir / "dev.csv"), mp), eval, c.target_bpcer);
        }
        report.protocol = protocol;
        report.system = system;
        write_report(report, c.output_root / "eval" / protocol / system);
        std::printf("eval: %s/%s APCER %s BPCER %s ACER %s\n", protocol.c_str(), system.c_str(),
                    text::format_fixed(report.eval.apcer, 2).c_str(), text::format_fixed(report.eval.bpcer, 2).c_str(),
                    text::format_fixed(report.eval.acer, 2).c_str());
    }
    write_lock(c, c.output_root / "eval");
}

void cmd_report(const RunConfig& c) {
    using json = nlohmann::ordered_json;
    const auto root = require(c.output_root / "eval");
    std::vector<fs::path> reports;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.path().filename() == "report.json") reports.push_back(e.path());
    std::sort(reports.begin(), reports.end());

    std::string summary = "protocol,system,threshold,dev_acer,eval_apcer,eval_bpcer,eval_acer,eval_apcer_max_pai\n";
    std::string pai = "protocol,system,attack_type,count,accepted,apcer,accuracy\n";
    json all = json::array();
    for (const auto& path : reports) {
        const auto j = json::parse(read_text(path));
        const auto& ev = j.at("eval");
        const auto protocol = j.at("protocol").get<std::string>(), system = j.at("system").get<std::string>();
        summary += protocol + "," + system + "," + fmt(j.at("threshold_rule").at("threshold").get<double>()) + "," +
                   fmt(j.at("dev").at("acer").get<double>()) + "," + fmt(ev.at("apcer").get<double>()) + "," +
                   fmt(ev.at("bpcer").get<double>()) + "," + fmt(ev.at("acer").get<double>()) + "," +
                   fmt(ev.at("apcer_max_pai").get<double>()) + "\n";
        for (const auto& [type, p] : ev.at("per_pai").items())
            pai += protocol + "," + system + "," + type + "," +
                   std::to_string(p.at("count").get<std::size_t>()) + "," +
                   std::to_string(p.at("accepted").get<std::size_t>()) + "," + fmt(p.at("apcer").get<double>()) + "," +
                   fmt(p.at("accuracy").get<double>()) + "\n";
        all.push_back(j);
    }
    const auto out = c.output_root / "report";
    write_text_atomic(out / "summary.csv", summary);
    write_text_atomic(out / "per_pai.csv", pai);
    write_text_atomic(out / "report.json", all.dump(2) + "\n");
    write_lock(c, out);
    std::printf("report: %zu systems -> %s\n", reports.size(), (out / "summary.csv").string().c_str());
}

}  // namespace mcpad::cli
