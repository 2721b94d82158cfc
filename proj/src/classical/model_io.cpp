#include <bit>
#include <cstring>

#include "mcpad/classical.hpp"
#include "mcpad/dataset.hpp"
#include "mcpad/error.hpp"

namespace mcpad {
namespace {

constexpr std::uint8_t kMagic[4] = {'M', 'C', 'L', 'M'};
constexpr std::uint8_t kVersion = 1;

class Writer {
public:
    void u8(std::uint8_t v) { out.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    void f64s(const std::vector<double>& v) {
        for (double x : v) f64(x);
    }
    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes(b) {}

    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(v);
    }
    std::vector<double> f64s(std::size_t n) {
        need(n * 8);
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    void need(std::size_t n) const {
        if (bytes.size() - pos < n) throw FormatError("truncated model blob", pos);
    }

    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

void put_body(Writer& w, std::uint8_t kind, const Standardizer& st, double hyper, double bias,
              const std::vector<double>& weights) {
    if (weights.size() != st.dim() || st.std.size() != st.dim()) throw ArgumentError("model dimensions disagree");
    for (auto b : kMagic) w.u8(b);
    w.u8(kVersion);
    w.u8(kind);
    w.u8(static_cast<std::uint8_t>(st.population));
    w.u32(static_cast<std::uint32_t>(weights.size()));
    w.f64(hyper);
    w.f64(bias);
    w.f64s(weights);
    w.f64s(st.mean);
    w.f64s(st.std);
}

}  // namespace

std::vector<std::uint8_t> encode_model(const LinearModel& model) {
    Writer w;
    if (const auto* lr = std::get_if<LrModel>(&model))
        put_body(w, 0, lr->standardizer, lr->lambda, lr->bias, lr->w);
    else {
        const auto& svm = std::get<SvmModel>(model);
        put_body(w, 1, svm.standardizer, svm.C, svm.bias, svm.w);
    }
    return std::move(w.out);
}

LinearModel decode_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad model magic", 0);
    Reader r(bytes);
    r.pos = 4;
    if (const auto v = r.u8(); v != kVersion) throw FormatError("unsupported model version " + std::to_string(v), 4);
    const auto kind = r.u8();
    if (kind > 1) throw FormatError("unknown model kind", 5);
    const auto pop = r.u8();
    if (pop > 1) throw FormatError("unknown standardizer population", 6);
    const auto dim = r.u32();
    const double hyper = r.f64(), bias = r.f64();
    Standardizer st;
    st.population = static_cast<FitPopulation>(pop);
    auto weights = r.f64s(dim);
    st.mean = r.f64s(dim);
    st.std = r.f64s(dim);
    if (r.pos != bytes.size()) throw FormatError("trailing bytes after model", r.pos);
    if (kind == 0) return LrModel{std::move(weights), bias, std::move(st), hyper};
    return SvmModel{std::move(weights), bias, std::move(st), hyper};
}

void write_model(const LinearModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, encode_model(model));
}

LinearModel read_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace mcpad
