#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xfuse {

/// Single grayscale image. Pixels are row-major normalized floats.
struct Frame {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<float> pixels;
    std::int64_t frame_index = 0;

    Frame() = default;
    /// Zero-filled frame; throws ValidationError on zero dimensions.
    Frame(std::uint32_t w, std::uint32_t h, std::int64_t index = 0);
    Frame(std::uint32_t w, std::uint32_t h, std::vector<float> data, std::int64_t index = 0);

    std::size_t size() const { return pixels.size(); }
    float& at(std::uint32_t x, std::uint32_t y) { return pixels[std::size_t(y) * width + x]; }
    float at(std::uint32_t x, std::uint32_t y) const { return pixels[std::size_t(y) * width + x]; }

    bool same_shape(const Frame& other) const {
        return width == other.width && height == other.height;
    }
};

/// Throws ValidationError if the frame breaks any Frame invariant.
void validate(const Frame& frame);

enum class Role { HR, LR, RECON };

std::string_view role_name(Role role);
Role parse_role(std::string_view text);

/// Ordered frames on the master timeline. Frame indices live on the frames.
struct Sequence {
    Role role = Role::HR;
    std::int64_t native_step = 1;
    std::vector<Frame> frames;

    bool empty() const { return frames.empty(); }
    std::size_t size() const { return frames.size(); }
    std::uint32_t width() const { return frames.empty() ? 0 : frames.front().width; }
    std::uint32_t height() const { return frames.empty() ? 0 : frames.front().height; }
    std::vector<std::int64_t> frame_indices() const;

    /// Frame whose frame_index equals `index`, or nullptr.
    const Frame* find(std::int64_t index) const;
};

/// Shared dimensions, strictly increasing indices, every frame valid.
void validate(const Sequence& seq);

struct SequencePair {
    Sequence lr;
    Sequence hr;
    int spatial_factor = 4;
    int lr_separation = 1;
    int hr_downsample = 20;
};

void validate(const SequencePair& pair);

// ---------------------------------------------------------------------------
// XFR1 binary frame format:
//   "XFR1" | u32 width | u32 height | u32 dtype (0 = f32) | width*height f32
// All integers and floats little-endian.

void write_frame(const Frame& frame, const std::filesystem::path& path);
Frame read_frame(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_frame(const Frame& frame);
/// `frame_index` is not part of the payload and is supplied by the caller.
Frame decode_frame(std::span<const std::uint8_t> bytes, std::int64_t frame_index = 0,
                   std::string_view source = "<memory>");

inline constexpr const char* kManifestName = "manifest.txt";

/// Writes manifest.txt plus one XFR1 file per frame into `dir` (created if needed).
void write_manifest(const Sequence& seq, const std::filesystem::path& dir);
Sequence read_manifest(const std::filesystem::path& dir);

}  // namespace xfuse
