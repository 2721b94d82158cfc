#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mcpad/types.hpp"

namespace mcpad {

// One channel's frame stack. Values are stored widened to 16 bits regardless
// of bit depth; color frames interleave R,G,B per pixel.
struct FrameStack {
    ChannelId channel = ChannelId::gray;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::uint16_t frame_count = 0;
    std::uint8_t bit_depth = 8;
    std::vector<std::uint16_t> values;

    [[nodiscard]] std::size_t components() const noexcept { return channel == ChannelId::color ? 3 : 1; }
    [[nodiscard]] std::size_t frame_size() const noexcept {
        return static_cast<std::size_t>(width) * height * components();
    }
    [[nodiscard]] std::span<const std::uint16_t> frame(std::size_t index) const;
    [[nodiscard]] std::span<std::uint16_t> frame(std::size_t index);

    // Shape/bit-depth consistency; throws ArgumentError.
    void validate() const;

    friend bool operator==(const FrameStack&, const FrameStack&) = default;
};

struct MultiChannelSample {
    SampleMeta meta;
    std::vector<FrameStack> channels;

    [[nodiscard]] const FrameStack* find(ChannelId id) const noexcept;
    [[nodiscard]] const FrameStack& at(ChannelId id) const;

    friend bool operator==(const MultiChannelSample&, const MultiChannelSample&) = default;
};

// Container: "MCPD", version byte, channel-count byte, then per channel
// id u8, width u16, height u16, frames u16, bit depth u8 and the row-major
// payload (1 or 2 bytes per value, little-endian).
inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::size_t kContainerPreamble = 6;
inline constexpr std::size_t kChannelHeaderSize = 8;

[[nodiscard]] std::vector<std::uint8_t> encode_sample(const MultiChannelSample& sample);
// The container does not carry metadata; `meta` is attached to the result.
[[nodiscard]] MultiChannelSample decode_sample(std::span<const std::uint8_t> bytes, SampleMeta meta = {});

void write_sample(const MultiChannelSample& sample, const std::filesystem::path& path);
[[nodiscard]] MultiChannelSample read_sample(const std::filesystem::path& path, SampleMeta meta = {});

// Write-to-temp-then-rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
[[nodiscard]] std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
[[nodiscard]] std::string read_text(const std::filesystem::path& path);

struct ManifestEntry {
    std::string path;  // relative to the manifest's directory unless absolute
    SampleMeta meta;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::filesystem::path base_dir;

    [[nodiscard]] std::filesystem::path resolve(const ManifestEntry& entry) const;
    [[nodiscard]] const ManifestEntry& find(const std::string& sample_id) const;
    // Unique sample ids, valid metadata; with check_paths, every container exists.
    void validate(bool check_paths) const;
};

inline constexpr const char* kManifestHeader = "sample_id,path,client_id,label,attack_type,session";

[[nodiscard]] std::string format_manifest(const Manifest& manifest);
[[nodiscard]] Manifest parse_manifest(const std::string& text, std::filesystem::path base_dir = {});
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
[[nodiscard]] Manifest read_manifest(const std::filesystem::path& path);

// Uniform temporal sampling: round(i * (frame_count - 1) / (n - 1)) for
// i = 0..n-1, or every frame when the video is shorter than n.
[[nodiscard]] std::vector<std::size_t> sample_frames(std::size_t frame_count, std::size_t n);

// Per-frame eye/mouth annotations in the color frame.
struct Landmarks {
    Point2 left_eye;
    Point2 right_eye;
    Point2 mouth;

    void validate() const;
    friend bool operator==(const Landmarks&, const Landmarks&) = default;
};

struct FrameLandmarks {
    std::size_t frame_index = 0;
    Landmarks landmarks;

    friend bool operator==(const FrameLandmarks&, const FrameLandmarks&) = default;
};

// Text annotation: one "frame_idx,lx,ly,rx,ry,mx,my" line per frame.
[[nodiscard]] std::string format_landmarks(const std::vector<FrameLandmarks>& landmarks);
[[nodiscard]] std::vector<FrameLandmarks> parse_landmarks(const std::string& text);
[[nodiscard]] std::filesystem::path landmarks_path_for(const std::filesystem::path& container);

struct AttackCategory {
    AttackType type = AttackType::print;
    std::uint32_t instruments = 1;

    friend bool operator==(const AttackCategory&, const AttackCategory&) = default;
};

struct SynthConfig {
    std::uint32_t bonafide_clients = 16;
    std::vector<AttackCategory> attack_categories{{AttackType::print, 6},
                                                  {AttackType::replay, 6},
                                                  {AttackType::rigidmask, 6},
                                                  {AttackType::papermask, 6}};
    std::uint32_t bonafide_samples_per_client = 2;
    std::uint32_t attack_samples_per_instrument = 1;
    std::uint16_t frames_per_sample = 20;
    std::uint16_t image_size = 64;
    // gray and color both address the visible-light channel.
    std::vector<ChannelId> signal_channels{ChannelId::depth, ChannelId::thermal};
    double noise_level = 1.0;
    double thermal_offset = -120.0;  // attack face warmth shift (raw thermal units)
    double depth_bump = 40.0;        // bonafide face relief (raw depth units, mm)
    std::uint64_t seed = 7;

    void validate() const;
    [[nodiscard]] bool has_signal(ChannelId id) const noexcept;
};

struct SynthDataset {
    Manifest manifest;
    std::vector<MultiChannelSample> samples;            // parallel to manifest.entries
    std::vector<std::vector<FrameLandmarks>> landmarks;  // parallel to samples
};

// Deterministic in config.seed; entries' paths are "<sample_id>.mcpd".
[[nodiscard]] SynthDataset synth_generate(const SynthConfig& config);

// Writes containers, landmark annotations and manifest.csv into `dir`.
void write_synth_dataset(const SynthDataset& dataset, const std::filesystem::path& dir);

}  // namespace mcpad
