#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include <unistd.h>

#include "mcpad/dataset.hpp"
#include "mcpad/error.hpp"

namespace mcpad {
namespace {

constexpr std::uint8_t kMagic[4] = {'M', 'C', 'P', 'D'};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    [[nodiscard]] std::size_t offset() const noexcept { return pos_; }

    std::uint8_t u8(const char* field) {
        require(1, field);
        return bytes_[pos_++];
    }

    std::uint16_t u16(const char* field) {
        require(2, field);
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    void require(std::size_t n, const char* field) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated container: missing ") + field, pos_);
    }

    std::span<const std::uint8_t> take(std::size_t n, const char* field) {
        require(n, field);
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

std::span<const std::uint16_t> FrameStack::frame(std::size_t index) const {
    if (index >= frame_count) throw ArgumentError("frame index out of range");
    return std::span<const std::uint16_t>(values).subspan(index * frame_size(), frame_size());
}

std::span<std::uint16_t> FrameStack::frame(std::size_t index) {
    if (index >= frame_count) throw ArgumentError("frame index out of range");
    return std::span<std::uint16_t>(values).subspan(index * frame_size(), frame_size());
}

void FrameStack::validate() const {
    if (width == 0 || height == 0 || frame_count == 0)
        throw ArgumentError("channel '" + std::string(to_string(channel)) + "' has an empty frame stack");
    if (bit_depth != 8 && bit_depth != 16) throw ArgumentError("bit depth must be 8 or 16");
    if (values.size() != frame_size() * frame_count)
        throw ArgumentError("channel '" + std::string(to_string(channel)) + "' payload does not match its shape");
    if (bit_depth == 8)
        for (auto v : values)
            if (v > 255) throw ArgumentError("8-bit channel holds a value above 255");
}

const FrameStack* MultiChannelSample::find(ChannelId id) const noexcept {
    for (const auto& c : channels)
        if (c.channel == id) return &c;
    return nullptr;
}

const FrameStack& MultiChannelSample::at(ChannelId id) const {
    if (const auto* c = find(id)) return *c;
    throw ArgumentError("sample '" + meta.sample_id + "' has no '" + std::string(to_string(id)) + "' channel");
}

std::vector<std::uint8_t> encode_sample(const MultiChannelSample& sample) {
    if (sample.channels.empty()) throw ArgumentError("sample has no channels");
    if (sample.channels.size() > 255) throw ArgumentError("too many channels");
    std::size_t total = kContainerPreamble;
    for (const auto& c : sample.channels) {
        c.validate();
        total += kChannelHeaderSize + c.values.size() * (c.bit_depth / 8);
    }
    std::vector<std::uint8_t> out;
    out.reserve(total);
    for (auto b : kMagic) out.push_back(b);
    out.push_back(kContainerVersion);
    out.push_back(static_cast<std::uint8_t>(sample.channels.size()));
    for (const auto& c : sample.channels) {
        out.push_back(static_cast<std::uint8_t>(c.channel));
        put_u16(out, c.width);
        put_u16(out, c.height);
        put_u16(out, c.frame_count);
        out.push_back(c.bit_depth);
        if (c.bit_depth == 8) {
            for (auto v : c.values) out.push_back(static_cast<std::uint8_t>(v));
        } else {
            for (auto v : c.values) put_u16(out, v);
        }
    }
    return out;
}

MultiChannelSample decode_sample(std::span<const std::uint8_t> bytes, SampleMeta meta) {
    ByteReader in(bytes);
    const auto magic = in.take(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad container magic", 0);
    const std::size_t version_at = in.offset();
    if (const auto version = in.u8("version"); version != kContainerVersion)
        throw FormatError("unsupported container version " + std::to_string(version), version_at);
    const auto count = in.u8("channel count");
    if (count == 0) throw FormatError("container declares zero channels", in.offset() - 1);

    MultiChannelSample sample;
    sample.meta = std::move(meta);
    sample.channels.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t header_at = in.offset();
        FrameStack c;
        const auto id = channel_from_byte(in.u8("channel id"));
        if (!id) throw FormatError("unknown channel id", header_at);
        c.channel = *id;
        c.width = in.u16("width");
        c.height = in.u16("height");
        c.frame_count = in.u16("frame count");
        const std::size_t depth_at = in.offset();
        c.bit_depth = in.u8("bit depth");
        if (c.bit_depth != 8 && c.bit_depth != 16) throw FormatError("bit depth must be 8 or 16", depth_at);
        if (c.width == 0 || c.height == 0 || c.frame_count == 0)
            throw FormatError("channel with empty frame stack", header_at);
        const std::size_t n = c.frame_size() * c.frame_count;
        const auto payload = in.take(n * (c.bit_depth / 8), "channel payload");
        c.values.resize(n);
        if (c.bit_depth == 8) {
            for (std::size_t i = 0; i < n; ++i) c.values[i] = payload[i];
        } else {
            for (std::size_t i = 0; i < n; ++i)
                c.values[i] = static_cast<std::uint16_t>(payload[2 * i] | (payload[2 * i + 1] << 8));
        }
        sample.channels.push_back(std::move(c));
    }
    if (in.offset() != bytes.size()) throw FormatError("trailing bytes after last channel", in.offset());
    return sample;
}

void write_sample(const MultiChannelSample& sample, const std::filesystem::path& path) {
    const auto bytes = encode_sample(sample);
    write_file_atomic(path, bytes);
}

MultiChannelSample read_sample(const std::filesystem::path& path, SampleMeta meta) {
    const auto bytes = read_file(path);
    return decode_sample(bytes, std::move(meta));
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename into '" + path.string() + "': " + ec.message());
    }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace mcpad
