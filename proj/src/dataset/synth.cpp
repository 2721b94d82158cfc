#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "mcpad/dataset.hpp"
#include "mcpad/error.hpp"

namespace mcpad {
namespace {

// Canonical face frame: unit = inter-ocular distance, origin between the
// eyes' midpoint and the mouth. Matches the default alignment template.
constexpr Point2 kLeftEye{-0.5, -0.5};
constexpr Point2 kRightEye{0.5, -0.5};
constexpr Point2 kMouth{0.0, 0.65};

struct Blob {
    double u, v, sigma, amplitude;
};

// Per-identity appearance; drawn from one distribution for bonafide clients
// and attack instruments alike.
struct Identity {
    double albedo;
    std::array<double, 3> tint;
    std::array<Blob, 4> texture;
    double background;
    double bg_gradient;
    double bg_angle;
    double ir_reflectance;
    double ir_background;
    double depth_base;
    double thermal_background;
    double face_warmth;
};

struct Pose {
    double cx, cy, scale, roll;

    [[nodiscard]] Point2 to_image(Point2 f) const {
        const double c = std::cos(roll), s = std::sin(roll);
        return {cx + scale * (c * f.x - s * f.y), cy + scale * (s * f.x + c * f.y)};
    }
    [[nodiscard]] Point2 to_face(double x, double y) const {
        const double c = std::cos(roll), s = std::sin(roll);
        const double dx = (x - cx) / scale, dy = (y - cy) / scale;
        return {c * dx + s * dy, -s * dx + c * dy};
    }
};

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b)};
    return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Identity draw_identity(std::uint64_t seed, std::uint32_t client_id) {
    auto rng = make_rng(seed, client_id, 0x1d);
    Identity id{};
    id.albedo = uniform(rng, 120.0, 170.0);
    for (auto& t : id.tint) t = uniform(rng, 0.9, 1.1);
    for (auto& b : id.texture)
        b = {uniform(rng, -0.7, 0.7), uniform(rng, -0.8, 1.0), uniform(rng, 0.15, 0.35), uniform(rng, -25.0, 25.0)};
    id.background = uniform(rng, 40.0, 90.0);
    id.bg_gradient = uniform(rng, -15.0, 15.0);
    id.bg_angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    id.ir_reflectance = uniform(rng, 130.0, 170.0);
    id.ir_background = uniform(rng, 40.0, 70.0);
    id.depth_base = uniform(rng, 900.0, 1100.0);
    id.thermal_background = uniform(rng, 2950.0, 3050.0);
    id.face_warmth = uniform(rng, 50.0, 70.0);
    return id;
}

double gauss2(Point2 f, Point2 c, double sx, double sy) {
    const double dx = (f.x - c.x) / sx, dy = (f.y - c.y) / sy;
    return std::exp(-0.5 * (dx * dx + dy * dy));
}

// Soft elliptical face support in [0, 1].
double face_mask(Point2 f, double edge) {
    const double r = std::hypot(f.x / 0.85, (f.y - 0.05) / 1.15);
    return std::clamp((1.0 - r) / edge + 0.5, 0.0, 1.0);
}

double texture_at(const Identity& id, Point2 f) {
    double t = 0.0;
    for (const auto& b : id.texture) t += b.amplitude * gauss2(f, {b.u, b.v}, b.sigma, b.sigma);
    return t;
}

double eyes_at(Point2 f) { return gauss2(f, kLeftEye, 0.12, 0.08) + gauss2(f, kRightEye, 0.12, 0.08); }
double mouth_at(Point2 f) { return gauss2(f, kMouth, 0.25, 0.08); }

// Periodic print/screen-like pattern used as the visible/NIR attack cue.
double moire(double x, double y, double period) {
    return std::sin(2.0 * std::numbers::pi * (x + 0.7 * y) / period) *
           std::sin(2.0 * std::numbers::pi * (0.6 * x - y) / (1.3 * period));
}

std::uint16_t clamp_round(double v, double hi) {
    return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, hi)));
}

struct Renderer {
    const SynthConfig& cfg;
    const Identity& id;
    bool attack;
    AttackType type;
    int size;

    [[nodiscard]] bool signal(ChannelId c) const { return attack && cfg.has_signal(c); }

    void visible(const Pose& pose, std::mt19937_64& rng, std::span<std::uint16_t> out) const {
        std::normal_distribution<double> noise(0.0, 3.0 * cfg.noise_level);
        const bool cue = signal(ChannelId::color);
        const double gx = std::cos(id.bg_angle), gy = std::sin(id.bg_angle);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const auto f = pose.to_face(x, y);
                const double m = face_mask(f, 0.1);
                const double bg = id.background + id.bg_gradient * ((gx * x + gy * y) / size - 0.5);
                double lum = bg + m * (id.albedo - bg + texture_at(id, f)) - m * (60.0 * eyes_at(f) + 40.0 * mouth_at(f));
                if (cue) lum += 12.0 * m * moire(x, y, 3.1);
                for (int c = 0; c < 3; ++c)
                    out[(static_cast<std::size_t>(y) * size + x) * 3 + c] = clamp_round(lum * id.tint[c] + noise(rng), 255.0);
            }
    }

    void infrared(const Pose& pose, std::mt19937_64& rng, std::span<std::uint16_t> out) const {
        std::normal_distribution<double> noise(0.0, 3.0 * cfg.noise_level);
        const bool cue = signal(ChannelId::infrared);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const auto f = pose.to_face(x, y);
                const double m = face_mask(f, 0.1);
                double v = id.ir_background + m * (id.ir_reflectance - id.ir_background + 0.6 * texture_at(id, f)) -
                           30.0 * m * eyes_at(f);
                if (cue) v += 12.0 * m * moire(x, y, 4.3);
                out[static_cast<std::size_t>(y) * size + x] = clamp_round(v + noise(rng), 255.0);
            }
    }

    void depth(const Pose& pose, double tilt_x, double tilt_y, std::mt19937_64& rng, std::span<std::uint16_t> out) const {
        std::normal_distribution<double> noise(0.0, 2.0 * cfg.noise_level);
        const bool planar = signal(ChannelId::depth);
        // Category-specific surface ripple of planar instruments.
        const double k = static_cast<double>(static_cast<int>(type));
        const double freq = 2.0 + 1.5 * k, phi = 0.7 * k;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double xn = static_cast<double>(x) / size - 0.5, yn = static_cast<double>(y) / size - 0.5;
                double d = id.depth_base + tilt_x * xn + tilt_y * yn;
                if (planar) {
                    d -= 0.5 * cfg.depth_bump;
                    d += 6.0 * std::sin(2.0 * std::numbers::pi * freq * (xn * std::cos(phi) + yn * std::sin(phi)));
                } else {
                    const auto f = pose.to_face(x, y);
                    const double head = face_mask(f, 0.4);
                    d -= cfg.depth_bump * head * (0.5 + 0.5 * gauss2(f, {0.0, 0.05}, 0.45, 0.55));
                    d -= 0.25 * cfg.depth_bump * gauss2(f, {0.0, 0.1}, 0.1, 0.2);
                }
                out[static_cast<std::size_t>(y) * size + x] = clamp_round(d + noise(rng), 65535.0);
            }
    }

    void thermal(const Pose& pose, std::mt19937_64& rng, std::span<std::uint16_t> out) const {
        std::normal_distribution<double> noise(0.0, 4.0 * cfg.noise_level);
        const bool cool = signal(ChannelId::thermal);
        const double gx = std::cos(id.bg_angle), gy = std::sin(id.bg_angle);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const auto f = pose.to_face(x, y);
                const double m = face_mask(f, 0.15);
                double t = id.thermal_background + 20.0 * ((gx * x + gy * y) / size - 0.5);
                if (cool) {
                    t += m * (id.face_warmth + cfg.thermal_offset);
                } else {
                    t += m * (id.face_warmth + 20.0 * eyes_at(f) - 10.0 * gauss2(f, {0.0, 0.1}, 0.1, 0.2));
                }
                out[static_cast<std::size_t>(y) * size + x] = clamp_round(t + noise(rng), 65535.0);
            }
    }
};

FrameStack make_stack(ChannelId id, int size, std::uint16_t frames, std::uint8_t depth) {
    FrameStack s;
    s.channel = id;
    s.width = s.height = static_cast<std::uint16_t>(size);
    s.frame_count = frames;
    s.bit_depth = depth;
    s.values.assign(s.frame_size() * frames, 0);
    return s;
}


}  // namespace

void SynthConfig::validate() const {
    if (bonafide_clients == 0) throw ArgumentError("synthetic config needs at least one bonafide client");
    std::uint64_t attack_total = 0;
    for (const auto& c : attack_categories) {
        if (c.type == AttackType::none) throw ArgumentError("attack category cannot be 'none'");
        attack_total += c.instruments;
    }
    if (attack_total == 0) throw ArgumentError("synthetic config needs at least one attack instrument");
    for (std::size_t i = 0; i < attack_categories.size(); ++i)
        for (std::size_t j = i + 1; j < attack_categories.size(); ++j)
            if (attack_categories[i].type == attack_categories[j].type)
                throw ArgumentError("attack category listed twice");
    if (bonafide_samples_per_client == 0 || attack_samples_per_instrument == 0)
        throw ArgumentError("samples per client must be positive");
    if (frames_per_sample == 0) throw ArgumentError("frames per sample must be positive");
    if (image_size < 16) throw ArgumentError("image size must be at least 16");
    if (signal_channels.empty()) throw ArgumentError("signal channels must be nonempty");
    if (!(noise_level >= 0.0)) throw ArgumentError("noise level must be >= 0");
}

bool SynthConfig::has_signal(ChannelId id) const noexcept {
    const auto visible = [](ChannelId c) { return c == ChannelId::color || c == ChannelId::gray; };
    for (auto c : signal_channels)
        if (c == id || (visible(c) && visible(id))) return true;
    return false;
}

SynthDataset synth_generate(const SynthConfig& config) {
    config.validate();

    std::vector<SampleMeta> pending;
    std::uint32_t next_client = 0;
    for (std::uint32_t c = 0; c < config.bonafide_clients; ++c, ++next_client)
        for (std::uint32_t k = 0; k < config.bonafide_samples_per_client; ++k) {
            SampleMeta m;
            m.sample_id = "bf_c" + std::to_string(next_client) + "_s" + std::to_string(k);
            m.client_id = next_client;
            m.label = Label::bonafide;
            m.attack_type = AttackType::none;
            m.session = static_cast<int>(1 + (next_client + k) % 7);
            pending.push_back(m);
        }
    for (const auto& cat : config.attack_categories)
        for (std::uint32_t i = 0; i < cat.instruments; ++i, ++next_client)
            for (std::uint32_t k = 0; k < config.attack_samples_per_instrument; ++k) {
                SampleMeta m;
                m.sample_id = std::string(to_string(cat.type)) + "_i" + std::to_string(next_client) + "_s" + std::to_string(k);
                m.client_id = next_client;
                m.label = Label::attack;
                m.attack_type = cat.type;
                m.session = static_cast<int>(1 + (next_client + k) % 7);
                pending.push_back(m);
            }

    SynthDataset out;
    const int size = config.image_size;
    const std::uint16_t frames = config.frames_per_sample;
    for (std::size_t s = 0; s < pending.size(); ++s) {
        const auto& meta = pending[s];
        const Identity identity = draw_identity(config.seed, meta.client_id);
        auto rng = make_rng(config.seed, s, 0x5a);

        Pose pose{size / 2.0 + uniform(rng, -0.06, 0.06) * size, size / 2.0 + uniform(rng, -0.06, 0.06) * size,
                  size * uniform(rng, 0.28, 0.34), uniform(rng, -8.0, 8.0) * std::numbers::pi / 180.0};
        const double tilt_x = uniform(rng, -20.0, 20.0), tilt_y = uniform(rng, -20.0, 20.0);

        MultiChannelSample sample;
        sample.meta = meta;
        auto color = make_stack(ChannelId::color, size, frames, 8);
        auto depth = make_stack(ChannelId::depth, size, frames, 16);
        auto ir = make_stack(ChannelId::infrared, size, frames, 8);
        auto thermal = make_stack(ChannelId::thermal, size, frames, 16);
        const Renderer render{config, identity, meta.label == Label::attack, meta.attack_type, size};

        std::vector<FrameLandmarks> marks;
        std::normal_distribution<double> drift(0.0, 0.3);
        for (std::uint16_t f = 0; f < frames; ++f) {
            if (f > 0) {
                pose.cx += drift(rng);
                pose.cy += drift(rng);
                pose.roll += drift(rng) * std::numbers::pi / 180.0;
            }
            marks.push_back({f, {pose.to_image(kLeftEye), pose.to_image(kRightEye), pose.to_image(kMouth)}});
            render.visible(pose, rng, color.frame(f));
            render.depth(pose, tilt_x, tilt_y, rng, depth.frame(f));
            render.infrared(pose, rng, ir.frame(f));
            render.thermal(pose, rng, thermal.frame(f));
        }
        sample.channels = {std::move(color), std::move(depth), std::move(ir), std::move(thermal)};

        out.manifest.entries.push_back({meta.sample_id + ".mcpd", meta});
        out.samples.push_back(std::move(sample));
        out.landmarks.push_back(std::move(marks));
    }
    return out;
}

void write_synth_dataset(const SynthDataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    Manifest manifest = dataset.manifest;
    manifest.base_dir = dir;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto path = manifest.resolve(manifest.entries[i]);
        write_sample(dataset.samples[i], path);
        write_text_atomic(landmarks_path_for(path), format_landmarks(dataset.landmarks[i]));
    }
    write_manifest(manifest, dir / "manifest.csv");
}

}  // namespace mcpad
