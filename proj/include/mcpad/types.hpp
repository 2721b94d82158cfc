#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcpad {

// Numeric values are the container's on-disk channel ids.
enum class ChannelId : std::uint8_t { color = 0, gray = 1, depth = 2, infrared = 3, thermal = 4 };

enum class AttackType : std::uint8_t {
    none = 0,
    glasses,
    fakehead,
    print,
    replay,
    rigidmask,
    flexiblemask,
    papermask,
};

enum class Label : std::uint8_t { bonafide = 0, attack = 1 };

enum class Split : std::uint8_t { train = 0, dev = 1, eval = 2 };

inline constexpr ChannelId kRawChannels[] = {ChannelId::color, ChannelId::depth, ChannelId::infrared,
                                             ChannelId::thermal};
inline constexpr ChannelId kProcessedChannels[] = {ChannelId::gray, ChannelId::depth, ChannelId::infrared,
                                                   ChannelId::thermal};
inline constexpr AttackType kAttackTypes[] = {AttackType::glasses,   AttackType::fakehead,     AttackType::print,
                                              AttackType::replay,    AttackType::rigidmask,    AttackType::flexiblemask,
                                              AttackType::papermask};

[[nodiscard]] std::string_view to_string(ChannelId id) noexcept;
[[nodiscard]] std::string_view to_string(AttackType type) noexcept;
[[nodiscard]] std::string_view to_string(Label label) noexcept;
[[nodiscard]] std::string_view to_string(Split split) noexcept;

// Parsers throw ArgumentError on unknown names.
[[nodiscard]] ChannelId parse_channel(std::string_view name);
[[nodiscard]] AttackType parse_attack_type(std::string_view name);
[[nodiscard]] Label parse_label(std::string_view name);
[[nodiscard]] Split parse_split(std::string_view name);

[[nodiscard]] std::optional<ChannelId> channel_from_byte(std::uint8_t byte) noexcept;

struct SampleMeta {
    std::string sample_id;
    std::uint32_t client_id = 0;
    Label label = Label::bonafide;
    AttackType attack_type = AttackType::none;
    int session = 1;

    // label == attack <=> attack_type != none; session in 1..7.
    void validate() const;

    friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

}  // namespace mcpad
