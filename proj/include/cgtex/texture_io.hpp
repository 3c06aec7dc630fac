#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgtex/tensor.hpp"

namespace cgtex {

enum class Modality { image, dynamic, sound };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

// A texture sample in model range: image HxWx3 in [0,1], dynamic HxWxTx3 in
// [0,1], sound length-T in [-1,1).
struct TextureExemplar {
    Modality modality = Modality::image;
    Tensor data;
    int sample_rate = 0;     // sound
    double frame_rate = 0.0;  // dynamic, metadata only
};

// PNG, 8-bit RGB or grayscale. Grayscale replicates to three channels;
// pixels map p -> p/255.
TextureExemplar load_image(const std::string& path);
void save_image(const Tensor& hw3, const std::string& path);

// WAV, RIFF PCM 16-bit mono little-endian; samples map s -> s/32768.
TextureExemplar load_sound(const std::string& path);
void save_sound(const Tensor& samples, int sample_rate, const std::string& path);

// Directory of frame_0000.png ... frame_NNNN.png, all the same size.
TextureExemplar load_frames(const std::string& dir);
void save_frames(const Tensor& hwt3, const std::string& dir);

// Animated GIF export of a dynamic texture, for viewing only (252-color
// uniform palette).
void save_gif(const Tensor& hwt3, const std::string& path, int frame_delay_cs = 10);

void save_exemplar(const TextureExemplar& ex, const std::string& path);

// Bilinear resize of an image tensor.
Tensor resize_bilinear(const Tensor& hw3, int out_h, int out_w);

// Corrupted region of an exemplar's spatial/temporal domain. `corrupted`
// holds the region itself, `closure` its border dilation (box, clipped at
// the domain edges).
struct MaskRegion {
    std::vector<int> extents;              // domain extents, no channel axis
    std::vector<std::uint8_t> corrupted;   // nonzero inside the region
    std::vector<std::uint8_t> closure;     // region dilated by border_width
    int border_width = 0;

    std::int64_t domain_size() const;
    std::int64_t count_corrupted() const;
    // Axis-aligned bounding box of the closure: [lo, hi) per axis.
    void closure_bbox(std::vector<int>* lo, std::vector<int>* hi) const;
};

// Builds a region from extents + flags; validates non-empty, strict subset.
MaskRegion make_mask(std::vector<int> extents, std::vector<std::uint8_t> corrupted,
                     int border_width);

// Grayscale mask PNG: 0 = keep, nonzero = corrupted.
MaskRegion load_mask(const std::string& path, int border_width);
void save_mask(const MaskRegion& mask2d, const std::string& path);

// Sound interval [start, end).
MaskRegion make_interval_mask(int length, std::int64_t start, std::int64_t end,
                              int border_width);

// Applies a 2-D image mask to every frame of a T-frame dynamic domain.
MaskRegion replicate_mask_frames(const MaskRegion& image_mask, int frames);

// Zeroes the corrupted region (all channels) and leaves the rest untouched.
Tensor apply_mask(const Tensor& data, const MaskRegion& mask);

}  // namespace cgtex
