#include "mcpad/types.hpp"

#include <array>
#include <utility>

#include "mcpad/error.hpp"

namespace mcpad {
namespace {

constexpr std::array<std::pair<ChannelId, std::string_view>, 5> kChannelNames{{
    {ChannelId::color, "color"},
    {ChannelId::gray, "gray"},
    {ChannelId::depth, "depth"},
    {ChannelId::infrared, "infrared"},
    {ChannelId::thermal, "thermal"},
}};

constexpr std::array<std::pair<AttackType, std::string_view>, 8> kAttackNames{{
    {AttackType::none, "none"},
    {AttackType::glasses, "glasses"},
    {AttackType::fakehead, "fakehead"},
    {AttackType::print, "print"},
    {AttackType::replay, "replay"},
    {AttackType::rigidmask, "rigidmask"},
    {AttackType::flexiblemask, "flexiblemask"},
    {AttackType::papermask, "papermask"},
}};

template <typename Enum, std::size_t N>
std::string_view lookup_name(const std::array<std::pair<Enum, std::string_view>, N>& table, Enum value) noexcept {
    for (const auto& [e, name] : table)
        if (e == value) return name;
    return "?";
}

template <typename Enum, std::size_t N>
Enum lookup_value(const std::array<std::pair<Enum, std::string_view>, N>& table, std::string_view name,
                  const char* what) {
    for (const auto& [e, n] : table)
        if (n == name) return e;
    throw ArgumentError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

}  // namespace

std::string_view to_string(ChannelId id) noexcept { return lookup_name(kChannelNames, id); }
std::string_view to_string(AttackType type) noexcept { return lookup_name(kAttackNames, type); }
std::string_view to_string(Label label) noexcept { return label == Label::bonafide ? "bonafide" : "attack"; }

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::eval: return "eval";
    }
    return "?";
}

ChannelId parse_channel(std::string_view name) { return lookup_value(kChannelNames, name, "channel"); }
AttackType parse_attack_type(std::string_view name) { return lookup_value(kAttackNames, name, "attack type"); }

Label parse_label(std::string_view name) {
    if (name == "bonafide") return Label::bonafide;
    if (name == "attack") return Label::attack;
    throw ArgumentError("unknown label '" + std::string(name) + "'");
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "dev") return Split::dev;
    if (name == "eval") return Split::eval;
    throw ArgumentError("unknown split '" + std::string(name) + "'");
}

std::optional<ChannelId> channel_from_byte(std::uint8_t byte) noexcept {
    if (byte > static_cast<std::uint8_t>(ChannelId::thermal)) return std::nullopt;
    return static_cast<ChannelId>(byte);
}

void SampleMeta::validate() const {
    if ((label == Label::attack) != (attack_type != AttackType::none))
        throw ArgumentError("sample '" + sample_id + "': label and attack type disagree");
    if (session < 1 || session > 7)
        throw ArgumentError("sample '" + sample_id + "': session must be in 1..7");
}

}  // namespace mcpad
