#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>

#include <json.hpp>

#include "mcpad/cli.hpp"
#include "mcpad/error.hpp"
#include "mcpad/text.hpp"

namespace mcpad::cli {
namespace {

using json = nlohmann::ordered_json;

json point_json(Point2 p) { return json::array({p.x, p.y}); }

Point2 point_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ValidationError("a point must be [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

template <typename E, typename F>
json names(const std::vector<E>& values, F to_name) {
    auto out = json::array();
    for (auto v : values) out.push_back(std::string(to_name(v)));
    return out;
}

json run_config_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["paths"] = {{"data", c.data_root.string()}, {"output", c.output_root.string()}};

    json cats = json::array();
    for (const auto& a : c.synth.attack_categories)
        cats.push_back({{"type", std::string(to_string(a.type))}, {"instruments", a.instruments}});
    j["synth"] = {{"bonafide_clients", c.synth.bonafide_clients},
                  {"attack_categories", cats},
                  {"bonafide_samples_per_client", c.synth.bonafide_samples_per_client},
                  {"attack_samples_per_instrument", c.synth.attack_samples_per_instrument},
                  {"frames_per_sample", c.synth.frames_per_sample},
                  {"image_size", c.synth.image_size},
                  {"signal_channels", names(c.synth.signal_channels, [](ChannelId x) { return to_string(x); })},
                  {"noise_level", c.synth.noise_level},
                  {"thermal_offset", c.synth.thermal_offset},
                  {"depth_bump", c.synth.depth_bump}};

    j["preprocess"] = {{"out_size", c.targets.out_size},
                       {"left_eye", point_json(c.targets.left_eye)},
                       {"right_eye", point_json(c.targets.right_eye)},
                       {"mouth", point_json(c.targets.mouth)},
                       {"frames_per_video", c.preprocess.frames_per_video},
                       {"mad_span", c.preprocess.mad_span}};

    json offsets = json::array();
    for (auto [dy, dx] : c.glcm.offsets) offsets.push_back(json::array({dy, dx}));
    j["features"] = {{"lbp",
                      {{"points", c.lbp.points},
                       {"radius", c.lbp.radius},
                       {"uniform", c.lbp.uniform},
                       {"grid_rows", c.lbp.grid_rows},
                       {"grid_cols", c.lbp.grid_cols}}},
                     {"glcm", {{"levels", c.glcm.levels}, {"offsets", offsets}, {"symmetric", c.glcm.symmetric}}},
                     {"iqm", c.iqm}};

    j["classifiers"] = {
        {"lr", {{"lambda", c.lr.lambda}, {"epochs", c.lr.epochs}, {"lr", c.lr.lr}}},
        {"svm",
         {{"C", c.svm.C},
          {"epochs", c.svm.epochs},
          {"lr", c.svm.lr},
          {"standardize", c.svm.population == FitPopulation::all ? "all" : "bonafide_only"}}}};

    auto m = json::parse(mccnn::config_to_json(c.mccnn));
    m.erase("seed");
    m["name"] = c.mccnn_name;
    j["mccnn"] = m;

    j["protocols"] = {{"ratios", json::array({c.protocols.ratios[0], c.protocols.ratios[1], c.protocols.ratios[2]})},
                      {"grandtest", c.protocols.grandtest},
                      {"loo", names(c.protocols.loo, [](AttackType x) { return to_string(x); })}};
    j["eval"] = {{"target_bpcer", c.target_bpcer}};
    return j;
}

std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base) {
    std::filesystem::path path(p);
    if (path.is_relative()) path = base / path;
    return path.lexically_normal();
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base) {
    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.data_root = resolve_path(j.at("paths").at("data").get<std::string>(), base);
    c.output_root = resolve_path(j.at("paths").at("output").get<std::string>(), base);

    const auto& s = j.at("synth");
    c.synth.bonafide_clients = s.at("bonafide_clients").get<std::uint32_t>();
    c.synth.attack_categories.clear();
    for (const auto& a : s.at("attack_categories"))
        c.synth.attack_categories.push_back(
            {parse_attack_type(a.at("type").get<std::string>()), a.at("instruments").get<std::uint32_t>()});
    c.synth.bonafide_samples_per_client = s.at("bonafide_samples_per_client").get<std::uint32_t>();
    c.synth.attack_samples_per_instrument = s.at("attack_samples_per_instrument").get<std::uint32_t>();
    c.synth.frames_per_sample = s.at("frames_per_sample").get<std::uint16_t>();
    c.synth.image_size = s.at("image_size").get<std::uint16_t>();
    c.synth.signal_channels.clear();
    for (const auto& ch : s.at("signal_channels")) c.synth.signal_channels.push_back(parse_channel(ch.get<std::string>()));
    c.synth.noise_level = s.at("noise_level").get<double>();
    c.synth.thermal_offset = s.at("thermal_offset").get<double>();
    c.synth.depth_bump = s.at("depth_bump").get<double>();
    c.synth.seed = c.seed;

    const auto& p = j.at("preprocess");
    c.targets.out_size = p.at("out_size").get<int>();
    c.targets.left_eye = point_from(p.at("left_eye"));
    c.targets.right_eye = point_from(p.at("right_eye"));
    c.targets.mouth = point_from(p.at("mouth"));
    c.preprocess.frames_per_video = p.at("frames_per_video").get<std::size_t>();
    c.preprocess.mad_span = p.at("mad_span").get<double>();

    const auto& f = j.at("features");
    const auto& l = f.at("lbp");
    c.lbp.points = l.at("points").get<int>();
    c.lbp.radius = l.at("radius").get<int>();
    c.lbp.uniform = l.at("uniform").get<bool>();
    c.lbp.grid_rows = l.at("grid_rows").get<int>();
    c.lbp.grid_cols = l.at("grid_cols").get<int>();
    const auto& g = f.at("glcm");
    c.glcm.levels = g.at("levels").get<int>();
    c.glcm.offsets.clear();
    for (const auto& o : g.at("offsets")) {
        if (!o.is_array() || o.size() != 2) throw ValidationError("GLCM offsets must be [dy, dx] pairs");
        c.glcm.offsets.emplace_back(o[0].get<int>(), o[1].get<int>());
    }
    c.glcm.symmetric = g.at("symmetric").get<bool>();
    c.iqm = f.at("iqm").get<std::vector<std::string>>();

    const auto& lr = j.at("classifiers").at("lr");
    c.lr.lambda = lr.at("lambda").get<double>();
    c.lr.epochs = lr.at("epochs").get<int>();
    c.lr.lr = lr.at("lr").get<double>();
    const auto& svm = j.at("classifiers").at("svm");
    c.svm.C = svm.at("C").get<double>();
    c.svm.epochs = svm.at("epochs").get<int>();
    c.svm.lr = svm.at("lr").get<double>();
    const auto pop = svm.at("standardize").get<std::string>();
    if (pop != "all" && pop != "bonafide_only") throw ValidationError("svm.standardize must be all or bonafide_only");
    c.svm.population = pop == "all" ? FitPopulation::all : FitPopulation::bonafide_only;

    auto m = j.at("mccnn");
    c.mccnn_name = m.at("name").get<std::string>();
    m.erase("name");
    m["seed"] = c.seed;
    c.mccnn = mccnn::config_from_json(m.dump());

    const auto& pr = j.at("protocols");
    const auto ratios = pr.at("ratios").get<std::vector<double>>();
    if (ratios.size() != 3) throw ValidationError("protocols.ratios must have three entries");
    c.protocols.ratios = {ratios[0], ratios[1], ratios[2]};
    c.protocols.grandtest = pr.at("grandtest").get<bool>();
    for (const auto& a : pr.at("loo")) c.protocols.loo.push_back(parse_attack_type(a.get<std::string>()));
    c.target_bpcer = j.at("eval").at("target_bpcer").get<double>();
    return c;
}

void validate(const RunConfig& c) {
    c.synth.validate();
    c.targets.validate();
    if (c.preprocess.frames_per_video == 0) throw ValidationError("preprocess.frames_per_video must be >= 1");
    if (!(c.preprocess.mad_span > 0.0)) throw ValidationError("preprocess.mad_span must be > 0");
    c.lbp.validate();
    c.glcm.validate();
    if (!c.iqm.empty()) (void)iqm_features(ImageF(8, 8, 3, 0.0), c.iqm);
    if (!(c.lr.lambda >= 0.0) || c.lr.epochs < 1 || !(c.lr.lr > 0.0))
        throw ValidationError("classifiers.lr needs lambda >= 0, epochs >= 1 and lr > 0");
    if (!(c.svm.C > 0.0) || c.svm.epochs < 1 || !(c.svm.lr > 0.0))
        throw ValidationError("classifiers.svm needs C > 0, epochs >= 1 and lr > 0");
    c.mccnn.validate();
    if (c.mccnn.input_size != c.targets.out_size)
        throw ValidationError("mccnn.input_size must equal preprocess.out_size");
    if (c.mccnn_name.empty() || c.mccnn_name.find('/') != std::string::npos)
        throw ValidationError("mccnn.name must be a plain, nonempty name");
    double sum = 0.0;
    for (double r : c.protocols.ratios) {
        if (!(r >= 0.0)) throw ValidationError("protocol ratios must be >= 0");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("protocol ratios must sum to 1");
    if (!(c.target_bpcer >= 0.0 && c.target_bpcer < 1.0)) throw ValidationError("eval.target_bpcer must be in [0, 1)");
}

// Recursive merge that only accepts keys already present in `base`.
void merge(json& base, const json& patch, const std::string& where) {
    if (!patch.is_object()) throw ValidationError("'" + where + "' must be an object");
    for (const auto& [key, value] : patch.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw ValidationError("unknown configuration key '" + path + "'");
        auto& slot = base[key];
        if (slot.is_object())
            merge(slot, value, path);
        else
            slot = value;
    }
}

json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    json* node = &j;
    std::string path;
    for (auto part : text::split(key, '.')) {
        const std::string k(part);
        path += (path.empty() ? "" : ".") + k;
        if (!node->is_object() || !node->contains(k)) throw ValidationError("unknown configuration key '" + path + "'");
        node = &(*node)[k];
    }
    auto value = parse_value(assignment.substr(eq + 1));
    if (node->is_object()) {
        merge(*node, value, key);
    } else {
        *node = std::move(value);
    }
}

RunConfig default_run_config() {
    RunConfig c;
    c.data_root = "data";
    c.output_root = "out";
    return c;
}

}  // namespace

std::string default_config_json() { return run_config_json(default_run_config()).dump(2) + "\n"; }

std::string config_to_json(const RunConfig& config) { return run_config_json(config).dump(2) + "\n"; }

RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides,
                      const char* seed_env) {
    json j = run_config_json(default_run_config());
    std::filesystem::path base = std::filesystem::current_path();
    try {
        if (file) {
            if (!std::filesystem::exists(*file)) throw ValidationError("missing configuration file: " + file->string());
            merge(j, json::parse(read_text(*file)), "");
            base = std::filesystem::absolute(*file).parent_path();
        }
        for (const auto& o : overrides) apply_override(j, o);
        if (seed_env && *seed_env) j["seed"] = text::to_uint(seed_env);
        auto config = parse_run_config(j, base);
        validate(config);
        return config;
    } catch (const ValidationError&) {
        throw;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid configuration: ") + e.what());
    } catch (const Error& e) {
        throw ValidationError(std::string("invalid configuration: ") + e.what());
    }
}

std::string config_digest(const RunConfig& config) {
    const auto text = config_to_json(config);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::string hex;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

void write_lock(const RunConfig& config, const std::filesystem::path& dir) {
    write_text_atomic(dir / "config.lock", config_to_json(config));
}

}  // namespace mcpad::cli
