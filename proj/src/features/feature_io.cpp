#include <bit>
#include <cmath>
#include <cstring>

#include "mcpad/dataset.hpp"
#include "mcpad/error.hpp"
#include "mcpad/features.hpp"
#include "mcpad/text.hpp"

namespace mcpad {
namespace {

constexpr std::uint8_t kMagic[4] = {'M', 'C', 'F', 'V'};
constexpr std::size_t kHeaderSize = 20;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".rows.csv";
    return p;
}

}  // namespace

void FeatureTable::append(const FeatureVector& fv) {
    if (rows.empty() && dim == 0) dim = fv.values.size();
    if (fv.values.size() != dim) throw ArgumentError("feature dimension changed within a table");
    for (double v : fv.values)
        if (!std::isfinite(v)) throw ArgumentError("non-finite feature value for '" + fv.meta.sample_id + "'");
    values.insert(values.end(), fv.values.begin(), fv.values.end());
    rows.push_back({fv.meta.sample_id, fv.frame_idx});
}

void write_feature_table(const FeatureTable& table, const std::filesystem::path& path) {
    if (table.values.size() != table.count() * table.dim) throw ArgumentError("feature table is inconsistent");
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + table.values.size() * 8);
    for (auto b : kMagic) out.push_back(b);
    put_u64(out, table.count());
    put_u64(out, table.dim);
    for (double v : table.values) put_u64(out, std::bit_cast<std::uint64_t>(v));

    std::string rows = "sample_id,frame_idx\n";
    for (const auto& r : table.rows) rows += r.sample_id + "," + std::to_string(r.frame_idx) + "\n";
    write_file_atomic(path, out);
    write_text_atomic(sidecar_path(path), rows);
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad feature table magic", 0);
    if (bytes.size() < kHeaderSize) throw FormatError("truncated feature table header", bytes.size());
    FeatureTable t;
    const auto count = get_u64(bytes.data() + 4);
    t.dim = get_u64(bytes.data() + 12);
    if (t.dim != 0 && count > (bytes.size() - kHeaderSize) / 8 / t.dim)
        throw FormatError("truncated feature table payload", bytes.size());
    if (bytes.size() != kHeaderSize + count * t.dim * 8)
        throw FormatError("feature table payload size mismatch", bytes.size());
    t.values.resize(count * t.dim);
    for (std::size_t i = 0; i < t.values.size(); ++i)
        t.values[i] = std::bit_cast<double>(get_u64(bytes.data() + kHeaderSize + 8 * i));

    const auto sidecar = read_text(sidecar_path(path));
    const auto ls = text::lines(sidecar);
    if (ls.empty() || text::trim(ls[0]) != "sample_id,frame_idx") throw FormatError("bad feature sidecar header", 0);
    for (std::size_t i = 1; i < ls.size(); ++i) {
        if (text::trim(ls[i]).empty()) continue;
        const auto f = text::split(text::trim(ls[i]), ',');
        if (f.size() != 2) throw FormatError("bad feature sidecar row", i);
        t.rows.push_back({std::string(f[0]), static_cast<std::size_t>(text::to_uint(f[1]))});
    }
    if (t.rows.size() != count) throw FormatError("feature sidecar row count does not match table", 0);
    return t;
}

}  // namespace mcpad
