#include <cmath>
#include <set>

#include "mcpad/dataset.hpp"
#include "mcpad/error.hpp"
#include "mcpad/text.hpp"

namespace mcpad {

std::filesystem::path Manifest::resolve(const ManifestEntry& entry) const {
    const std::filesystem::path p(entry.path);
    return p.is_absolute() ? p : base_dir / p;
}

const ManifestEntry& Manifest::find(const std::string& sample_id) const {
    for (const auto& e : entries)
        if (e.meta.sample_id == sample_id) return e;
    throw ArgumentError("manifest has no sample '" + sample_id + "'");
}

void Manifest::validate(bool check_paths) const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        e.meta.validate();
        if (e.meta.sample_id.empty() || e.meta.sample_id.find(',') != std::string::npos)
            throw ArgumentError("invalid sample id '" + e.meta.sample_id + "'");
        if (!seen.insert(e.meta.sample_id).second)
            throw ArgumentError("duplicate sample id '" + e.meta.sample_id + "'");
        if (check_paths && !std::filesystem::exists(resolve(e)))
            throw IoError("container not found: " + resolve(e).string());
    }
}

std::string format_manifest(const Manifest& manifest) {
    std::string out = kManifestHeader;
    out += '\n';
    for (const auto& e : manifest.entries) {
        out += e.meta.sample_id + ',' + e.path + ',' + std::to_string(e.meta.client_id) + ',' +
               std::string(to_string(e.meta.label)) + ',' + std::string(to_string(e.meta.attack_type)) + ',' +
               std::to_string(e.meta.session) + '\n';
    }
    return out;
}

Manifest parse_manifest(const std::string& text, std::filesystem::path base_dir) {
    const auto rows = text::lines(text);
    if (rows.empty() || text::trim(rows.front()) != kManifestHeader)
        throw ArgumentError(std::string("manifest must start with header '") + kManifestHeader + "'");
    Manifest manifest;
    manifest.base_dir = std::move(base_dir);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        const auto f = text::split(rows[i], ',');
        if (f.size() != 6) throw ArgumentError("manifest line " + std::to_string(i + 1) + ": expected 6 fields");
        ManifestEntry e;
        e.meta.sample_id = std::string(text::trim(f[0]));
        e.path = std::string(text::trim(f[1]));
        e.meta.client_id = static_cast<std::uint32_t>(text::to_uint(f[2]));
        e.meta.label = parse_label(text::trim(f[3]));
        e.meta.attack_type = parse_attack_type(text::trim(f[4]));
        e.meta.session = static_cast<int>(text::to_int(f[5]));
        manifest.entries.push_back(std::move(e));
    }
    manifest.validate(false);
    return manifest;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    manifest.validate(false);
    write_text_atomic(path, format_manifest(manifest));
}

Manifest read_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_text(path), path.parent_path());
}

std::vector<std::size_t> sample_frames(std::size_t frame_count, std::size_t n) {
    if (n == 0) throw ArgumentError("number of frames to sample must be positive");
    if (frame_count == 0) throw ArgumentError("video has no frames");
    std::vector<std::size_t> idx;
    if (frame_count < n) {
        for (std::size_t i = 0; i < frame_count; ++i) idx.push_back(i);
        return idx;
    }
    if (n == 1) return {0};
    idx.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(frame_count - 1) / static_cast<double>(n - 1);
        idx.push_back(static_cast<std::size_t>(std::llround(pos)));
    }
    return idx;
}

void Landmarks::validate() const {
    for (const auto& p : {left_eye, right_eye, mouth})
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ArgumentError("landmark coordinates must be finite");
    if (left_eye == right_eye) throw ArgumentError("eye landmarks coincide");
}

std::string format_landmarks(const std::vector<FrameLandmarks>& landmarks) {
    std::string out;
    for (const auto& f : landmarks) {
        const auto& l = f.landmarks;
        out += std::to_string(f.frame_index);
        for (double v : {l.left_eye.x, l.left_eye.y, l.right_eye.x, l.right_eye.y, l.mouth.x, l.mouth.y})
            out += ',' + text::format_double(v);
        out += '\n';
    }
    return out;
}

std::vector<FrameLandmarks> parse_landmarks(const std::string& content) {
    std::vector<FrameLandmarks> out;
    std::size_t line_no = 0;
    for (auto line : text::lines(content)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != 7) throw ArgumentError("landmarks line " + std::to_string(line_no) + ": expected 7 fields");
        FrameLandmarks fl;
        fl.frame_index = static_cast<std::size_t>(text::to_uint(f[0]));
        fl.landmarks.left_eye = {text::to_double(f[1]), text::to_double(f[2])};
        fl.landmarks.right_eye = {text::to_double(f[3]), text::to_double(f[4])};
        fl.landmarks.mouth = {text::to_double(f[5]), text::to_double(f[6])};
        out.push_back(fl);
    }
    return out;
}

std::filesystem::path landmarks_path_for(const std::filesystem::path& container) {
    auto p = container;
    p.replace_extension(".landmarks");
    return p;
}

}  // namespace mcpad
