#include <bit>
#include <cstring>

#include <json.hpp>

#include "mcpad/dataset.hpp"
#include "mcpad/error.hpp"
#include "mcpad/mccnn.hpp"

namespace mcpad::mccnn {
namespace {

constexpr std::uint8_t kMagic[4] = {'M', 'C', 'N', 'N'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kShared = 0xff;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    std::size_t pos() const { return pos_; }
    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("truncated model file", pos_);
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string config_to_json(const McCnnConfig& c) {
    nlohmann::ordered_json j;
    auto channels = nlohmann::json::array();
    for (auto ch : c.channels) channels.push_back(std::string(mcpad::to_string(ch)));
    auto adapt = nlohmann::json::array();
    for (auto g : c.adapt) adapt.push_back(std::string(to_string(g)));
    j["channels"] = channels;
    j["input_size"] = c.input_size;
    j["embedding"] = c.embedding;
    j["adapt"] = adapt;
    j["arch"] = {{"c1_out", c.arch.c1_out},       {"b1_out", c.arch.b1_out}, {"g1_out", c.arch.g1_out},
                 {"c1_kernel", c.arch.c1_kernel}, {"kernel", c.arch.kernel}, {"head_hidden", c.arch.head_hidden},
                 {"linear_only", c.arch.linear_only}};
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["lr"] = c.lr;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eps"] = c.eps;
    j["flip_prob"] = c.flip_prob;
    j["pretrain"] = c.pretrain;
    j["pretrain_epochs"] = c.pretrain_epochs;
    j["target_bpcer"] = c.target_bpcer;
    j["seed"] = c.seed;
    return j.dump();
}

McCnnConfig config_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        McCnnConfig c;
        c.channels.clear();
        for (const auto& ch : j.at("channels")) c.channels.push_back(parse_channel(ch.get<std::string>()));
        c.input_size = j.at("input_size").get<int>();
        c.embedding = j.at("embedding").get<int>();
        c.adapt.clear();
        for (const auto& g : j.at("adapt")) c.adapt.insert(parse_layer_group(g.get<std::string>()));
        const auto& a = j.at("arch");
        c.arch.c1_out = a.at("c1_out").get<int>();
        c.arch.b1_out = a.at("b1_out").get<int>();
        c.arch.g1_out = a.at("g1_out").get<int>();
        c.arch.c1_kernel = a.at("c1_kernel").get<int>();
        c.arch.kernel = a.at("kernel").get<int>();
        c.arch.head_hidden = a.at("head_hidden").get<int>();
        c.arch.linear_only = a.at("linear_only").get<bool>();
        c.epochs = j.at("epochs").get<int>();
        c.batch_size = j.at("batch_size").get<int>();
        c.lr = j.at("lr").get<double>();
        c.beta1 = j.at("beta1").get<double>();
        c.beta2 = j.at("beta2").get<double>();
        c.eps = j.at("eps").get<double>();
        c.flip_prob = j.at("flip_prob").get<double>();
        c.pretrain = j.at("pretrain").get<bool>();
        c.pretrain_epochs = j.at("pretrain_epochs").get<int>();
        c.target_bpcer = j.at("target_bpcer").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("bad MC-CNN config: ") + e.what());
    }
}

std::vector<std::uint8_t> encode_block(const McCnnModel& model, std::size_t index) {
    const auto& b = model.block(index);
    const auto& t = model.tensor(index);
    std::vector<std::uint8_t> out;
    put_u16(out, static_cast<std::uint16_t>(b.name.size()));
    out.insert(out.end(), b.name.begin(), b.name.end());
    out.push_back(static_cast<std::uint8_t>(b.group));
    out.push_back(b.channel ? static_cast<std::uint8_t>(*b.channel) : kShared);
    out.push_back(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.value) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

std::vector<std::uint8_t> encode_model(const McCnnModel& model) {
    std::vector<std::uint8_t> out;
    for (auto b : kMagic) out.push_back(b);
    out.push_back(kVersion);
    const auto cfg = config_to_json(model.config());
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out.insert(out.end(), cfg.begin(), cfg.end());
    put_u32(out, static_cast<std::uint32_t>(model.block_count()));
    for (std::size_t i = 0; i < model.block_count(); ++i) {
        const auto block = encode_block(model, i);
        out.insert(out.end(), block.begin(), block.end());
    }
    return out;
}

McCnnModel decode_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad model magic", 0);
    Reader r(bytes.subspan(4));
    if (const auto v = r.u8(); v != kVersion) throw FormatError("unsupported model version " + std::to_string(v), 4);
    const auto cfg_len = r.u32();
    // The layout (names, order, shapes) must match what the config builds.
    McCnnModel model(config_from_json(r.str(cfg_len)));
    const auto count = r.u32();
    if (count != model.block_count()) throw FormatError("block count does not match the config", 4 + r.pos());
    for (std::size_t i = 0; i < count; ++i) {
        const auto& b = model.block(i);
        auto& t = model.tensor(i);
        const auto at = 4 + r.pos();
        const auto name = r.str(r.u16());
        const auto group = r.u8();
        const auto channel = r.u8();
        if (name != b.name || group != static_cast<std::uint8_t>(b.group) ||
            channel != (b.channel ? static_cast<std::uint8_t>(*b.channel) : kShared))
            throw FormatError("unexpected block '" + name + "'", at);
        const auto rank = r.u8();
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = r.u32();
        if (shape != t.shape) throw FormatError("block '" + name + "' has an unexpected shape", at);
        r.need(t.numel() * 4);
        for (auto& v : t.value) v = std::bit_cast<float>(r.u32());
    }
    if (4 + r.pos() != bytes.size()) throw FormatError("trailing bytes after model", 4 + r.pos());
    return model;
}

void write_model(const McCnnModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, encode_model(model));
}

McCnnModel read_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace mcpad::mccnn
