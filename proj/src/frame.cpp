#include "xfuse/frame.hpp"

#include "xfuse/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace xfuse {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kMagic{'X', 'F', 'R', '1'};
constexpr std::uint32_t kDtypeF32 = 0;
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

std::size_t checked_pixel_count(std::uint32_t w, std::uint32_t h) {
    const std::uint64_t n = std::uint64_t(w) * std::uint64_t(h);
    if (n > std::numeric_limits<std::size_t>::max() / sizeof(float) - kHeaderBytes)
        throw ValidationError("frame dimensions overflow: " + std::to_string(w) + "x" +
                              std::to_string(h));
    return static_cast<std::size_t>(n);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string frame_file_name(std::int64_t index) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "frame_%08lld.xfr", static_cast<long long>(index));
    return buf;
}

std::int64_t parse_int(const std::string& text, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw IoError("manifest: malformed " + what + " '" + text + "'");
    }
}

}  // namespace

Frame::Frame(std::uint32_t w, std::uint32_t h, std::int64_t index)
    : width(w), height(h), frame_index(index) {
    if (w == 0 || h == 0) throw ValidationError("frame dimensions must be positive");
    pixels.assign(checked_pixel_count(w, h), 0.0f);
}

Frame::Frame(std::uint32_t w, std::uint32_t h, std::vector<float> data, std::int64_t index)
    : width(w), height(h), pixels(std::move(data)), frame_index(index) {
    validate(*this);
}

void validate(const Frame& frame) {
    if (frame.width == 0 || frame.height == 0)
        throw ValidationError("frame dimensions must be positive");
    if (frame.pixels.size() != checked_pixel_count(frame.width, frame.height))
        throw ValidationError("frame pixel count " + std::to_string(frame.pixels.size()) +
                              " does not match " + std::to_string(frame.width) + "x" +
                              std::to_string(frame.height));
    for (std::size_t i = 0; i < frame.pixels.size(); ++i)
        if (!std::isfinite(frame.pixels[i]))
            throw ValidationError("non-finite pixel at offset " + std::to_string(i));
}

std::string_view role_name(Role role) {
    switch (role) {
        case Role::HR: return "HR";
        case Role::LR: return "LR";
        case Role::RECON: return "RECON";
    }
    return "?";
}

Role parse_role(std::string_view text) {
    if (text == "HR") return Role::HR;
    if (text == "LR") return Role::LR;
    if (text == "RECON") return Role::RECON;
    throw ValidationError("unknown sequence role '" + std::string(text) + "'");
}

std::vector<std::int64_t> Sequence::frame_indices() const {
    std::vector<std::int64_t> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(f.frame_index);
    return out;
}

const Frame* Sequence::find(std::int64_t index) const {
    // indices are sorted
    auto it = std::lower_bound(frames.begin(), frames.end(), index,
                               [](const Frame& f, std::int64_t i) { return f.frame_index < i; });
    if (it == frames.end() || it->frame_index != index) return nullptr;
    return &*it;
}

void validate(const Sequence& seq) {
    if (seq.native_step < 1) throw ValidationError("native_step must be >= 1");
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        const Frame& f = seq.frames[i];
        validate(f);
        if (!f.same_shape(seq.frames.front()))
            throw ValidationError("frame " + std::to_string(f.frame_index) +
                                  " has different dimensions from the first frame");
        if (i > 0 && f.frame_index <= seq.frames[i - 1].frame_index)
            throw ValidationError("frame indices not strictly increasing at position " +
                                  std::to_string(i));
    }
}

void validate(const SequencePair& pair) {
    validate(pair.lr);
    validate(pair.hr);
    if (pair.spatial_factor < 1) throw ValidationError("spatial factor must be >= 1");
    if (!pair.lr.empty() && !pair.hr.empty()) {
        const auto f = std::uint32_t(pair.spatial_factor);
        if (pair.hr.width() != f * pair.lr.width() || pair.hr.height() != f * pair.lr.height())
            throw ValidationError("HR dimensions must be spatial_factor x LR dimensions");
    }
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    validate(frame);
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + frame.pixels.size() * sizeof(float));
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    put_u32(out, frame.width);
    put_u32(out, frame.height);
    put_u32(out, kDtypeF32);
    for (float v : frame.pixels) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes, std::int64_t frame_index,
                   std::string_view source) {
    const std::string where(source);
    if (bytes.size() < kHeaderBytes) throw IoError(where + ": truncated XFR1 header");
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
        throw IoError(where + ": bad magic, expected XFR1");
    const std::uint32_t w = get_u32(bytes.data() + 4);
    const std::uint32_t h = get_u32(bytes.data() + 8);
    const std::uint32_t dtype = get_u32(bytes.data() + 12);
    if (dtype != kDtypeF32) throw IoError(where + ": unsupported dtype " + std::to_string(dtype));
    if (w == 0 || h == 0) throw IoError(where + ": zero frame dimension");
    const std::size_t n = checked_pixel_count(w, h);
    const std::size_t payload = bytes.size() - kHeaderBytes;
    if (payload != n * sizeof(float))
        throw IoError(where + ": payload length " + std::to_string(payload) + " != " +
                      std::to_string(n * sizeof(float)));

    Frame frame;
    frame.width = w;
    frame.height = h;
    frame.frame_index = frame_index;
    frame.pixels.resize(n);
    const std::uint8_t* p = bytes.data() + kHeaderBytes;
    for (std::size_t i = 0; i < n; ++i, p += 4) {
        const float v = std::bit_cast<float>(get_u32(p));
        if (!std::isfinite(v))
            throw IoError(where + ": non-finite pixel at offset " + std::to_string(i));
        frame.pixels[i] = v;
    }
    return frame;
}

void write_frame(const Frame& frame, const fs::path& path) {
    const auto bytes = encode_frame(frame);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Frame read_frame(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_frame(bytes, 0, path.string());
}

void write_manifest(const Sequence& seq, const fs::path& dir) {
    validate(seq);
    if (seq.empty()) throw ValidationError("cannot write an empty sequence");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    std::ostringstream text;
    text << "role: " << role_name(seq.role) << '\n'
         << "width: " << seq.width() << '\n'
         << "height: " << seq.height() << '\n'
         << "native_step: " << seq.native_step << '\n';
    for (const Frame& f : seq.frames) {
        const std::string name = frame_file_name(f.frame_index);
        write_frame(f, dir / name);
        text << "frame: " << f.frame_index << ' ' << name << '\n';
    }
    std::ofstream out(dir / kManifestName, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << text.str();
    if (!out) throw IoError("manifest write failed in " + dir.string());
}

Sequence read_manifest(const fs::path& dir) {
    const fs::path manifest = dir / kManifestName;
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open " + manifest.string());

    Sequence seq;
    std::int64_t width = -1, height = -1;
    bool have_role = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto colon = t.find(':');
        if (colon == std::string::npos)
            throw IoError(manifest.string() + ":" + std::to_string(line_no) + ": expected key: value");
        const std::string key = trim(std::string_view(t).substr(0, colon));
        const std::string value = trim(std::string_view(t).substr(colon + 1));
        if (key == "role") {
            seq.role = parse_role(value);
            have_role = true;
        } else if (key == "width") {
            width = parse_int(value, "width");
        } else if (key == "height") {
            height = parse_int(value, "height");
        } else if (key == "native_step") {
            seq.native_step = parse_int(value, "native_step");
        } else if (key == "frame") {
            const auto sp = value.find(' ');
            if (sp == std::string::npos)
                throw IoError(manifest.string() + ":" + std::to_string(line_no) +
                              ": frame line needs index and file name");
            const std::int64_t index = parse_int(value.substr(0, sp), "frame index");
            const std::string name = trim(std::string_view(value).substr(sp + 1));
            const fs::path file = dir / name;
            if (!fs::exists(file))
                throw IoError("manifest references missing frame file: " + file.string());
            Frame f = read_frame(file);
            f.frame_index = index;
            if (!seq.frames.empty() && index <= seq.frames.back().frame_index)
                throw ValidationError(manifest.string() + ": non-increasing frame index " +
                                      std::to_string(index));
            seq.frames.push_back(std::move(f));
        } else {
            throw IoError(manifest.string() + ": unknown key '" + key + "'");
        }
    }
    if (!have_role || width <= 0 || height <= 0)
        throw IoError(manifest.string() + ": missing role/width/height");
    for (const Frame& f : seq.frames)
        if (std::int64_t(f.width) != width || std::int64_t(f.height) != height)
            throw ValidationError(manifest.string() + ": frame " + std::to_string(f.frame_index) +
                                  " is " + std::to_string(f.width) + "x" +
                                  std::to_string(f.height) + ", manifest says " +
                                  std::to_string(width) + "x" + std::to_string(height));
    validate(seq);
    return seq;
}

}  // namespace xfuse
