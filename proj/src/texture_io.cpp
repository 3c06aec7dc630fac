#include "cgtex/texture_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_map>

namespace fs = std::filesystem;

namespace cgtex {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::image: return "image";
        case Modality::dynamic: return "dynamic";
        case Modality::sound: return "sound";
    }
    return "?";
}

Modality modality_from_string(const std::string& s) {
    if (s == "image") return Modality::image;
    if (s == "dynamic") return Modality::dynamic;
    if (s == "sound") return Modality::sound;
    throw ContractError("unknown modality: " + s);
}

// ---------------------------------------------------------------- PNG

namespace {

struct RawImage {
    int w = 0, h = 0, channels = 0;  // channels 1 or 3
    std::vector<std::uint8_t> pixels;  // row-major, channel fastest
};

struct PngReadCtx {
    FILE* f = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadCtx() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (f) std::fclose(f);
    }
};

RawImage decode_png(const std::string& path) {
    PngReadCtx c;
    c.f = std::fopen(path.c_str(), "rb");
    if (!c.f) throw IoError("cannot open " + path);
    std::uint8_t sig[8];
    if (std::fread(sig, 1, 8, c.f) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw FormatError(path + " is not a PNG file");
    c.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!c.png) throw IoError("libpng init failed");
    c.info = png_create_info_struct(c.png);
    if (!c.info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(c.png))) throw IoError("failed to decode " + path);
    png_init_io(c.png, c.f);
    png_set_sig_bytes(c.png, 8);
    png_read_info(c.png, c.info);

    const int bit_depth = png_get_bit_depth(c.png, c.info);
    const int color_type = png_get_color_type(c.png, c.info);
    if (bit_depth == 16)
        throw FormatError(path + ": 16-bit PNG is not supported (8-bit only)");
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(c.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(c.png);
    if (png_get_valid(c.png, c.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(c.png);
    if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(c.png, c.info, PNG_INFO_tRNS))
        png_set_strip_alpha(c.png);
    png_set_interlace_handling(c.png);
    png_read_update_info(c.png, c.info);

    RawImage img;
    img.w = static_cast<int>(png_get_image_width(c.png, c.info));
    img.h = static_cast<int>(png_get_image_height(c.png, c.info));
    img.channels = static_cast<int>(png_get_channels(c.png, c.info));
    if (img.channels != 1 && img.channels != 3)
        throw FormatError(path + ": unsupported channel count " + std::to_string(img.channels));
    img.pixels.resize(static_cast<size_t>(img.w) * img.h * img.channels);
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y)
        rows[y] = img.pixels.data() + static_cast<size_t>(y) * img.w * img.channels;
    png_read_image(c.png, rows.data());
    png_read_end(c.png, nullptr);
    return img;
}

struct PngWriteCtx {
    FILE* f = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteCtx() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (f) std::fclose(f);
    }
};

void encode_png(const std::string& path, const RawImage& img) {
    PngWriteCtx c;
    c.f = std::fopen(path.c_str(), "wb");
    if (!c.f) throw IoError("cannot open " + path + " for writing");
    c.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!c.png) throw IoError("libpng init failed");
    c.info = png_create_info_struct(c.png);
    if (!c.info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(c.png))) throw IoError("failed to encode " + path);
    png_init_io(c.png, c.f);
    png_set_IHDR(c.png, c.info, img.w, img.h, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(c.png, c.info);
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() +
                                        static_cast<size_t>(y) * img.w * img.channels);
    png_write_image(c.png, rows.data());
    png_write_end(c.png, nullptr);
}

std::uint8_t quantize8(float v) {
    double c = v < 0.0f ? 0.0 : (v > 1.0f ? 1.0 : static_cast<double>(v));
    return static_cast<std::uint8_t>(std::lrint(c * 255.0));
}

Tensor image_tensor_from_raw(const RawImage& img) {
    Tensor t({img.h, img.w, 3});
    float* p = t.data();
    const std::uint8_t* px = img.pixels.data();
    const std::int64_t n = static_cast<std::int64_t>(img.w) * img.h;
    if (img.channels == 3) {
        for (std::int64_t i = 0; i < 3 * n; ++i) p[i] = px[i] / 255.0f;
    } else {
        for (std::int64_t i = 0; i < n; ++i) {
            const float v = px[i] / 255.0f;
            p[3 * i] = v;
            p[3 * i + 1] = v;
            p[3 * i + 2] = v;
        }
    }
    return t;
}

}  // namespace

TextureExemplar load_image(const std::string& path) {
    RawImage img = decode_png(path);
    TextureExemplar ex;
    ex.modality = Modality::image;
    ex.data = image_tensor_from_raw(img);
    return ex;
}

void save_image(const Tensor& hw3, const std::string& path) {
    if (hw3.rank() != 3 || hw3.shape()[2] != 3)
        throw ContractError("save_image expects an HxWx3 tensor, got " + shape_str(hw3.shape()));
    RawImage img;
    img.h = hw3.shape()[0];
    img.w = hw3.shape()[1];
    img.channels = 3;
    img.pixels.resize(static_cast<size_t>(img.w) * img.h * 3);
    const float* p = hw3.data();
    for (size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = quantize8(p[i]);
    encode_png(path, img);
}

// ---------------------------------------------------------------- WAV

namespace {

std::uint32_t rd_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t rd_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void wr_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
}
void wr_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
}

}  // namespace

TextureExemplar load_sound(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError(path + " is not a RIFF/WAVE file");

    int sample_rate = 0;
    bool have_fmt = false;
    const std::uint8_t* data_chunk = nullptr;
    std::uint32_t data_len = 0;

    size_t off = 12;
    while (off + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + off);
        const std::uint32_t len = rd_u32(bytes.data() + off + 4);
        if (off + 8 + len > bytes.size())
            throw FormatError(path + ": truncated chunk '" + std::string(id, 4) + "'");
        const std::uint8_t* body = bytes.data() + off + 8;
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16) throw FormatError(path + ": short fmt chunk");
            const std::uint16_t format = rd_u16(body);
            const std::uint16_t channels = rd_u16(body + 2);
            sample_rate = static_cast<int>(rd_u32(body + 4));
            const std::uint16_t bits = rd_u16(body + 14);
            if (format != 1) throw FormatError(path + ": compressed WAV is not supported");
            if (channels != 1) throw FormatError(path + ": only mono WAV is supported");
            if (bits != 16) throw FormatError(path + ": only 16-bit PCM is supported");
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_chunk = body;
            data_len = len;
        }
        off += 8 + len + (len & 1);  // chunks are word-aligned
    }
    if (!have_fmt || data_chunk == nullptr)
        throw FormatError(path + ": missing fmt or data chunk");

    const std::int64_t n = data_len / 2;
    if (n < 1) throw FormatError(path + ": empty data chunk");
    Tensor t({static_cast<int>(n)});
    float* p = t.data();
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int16_t s =
            static_cast<std::int16_t>(rd_u16(data_chunk + 2 * i));
        p[i] = static_cast<float>(s) / 32768.0f;
    }
    TextureExemplar ex;
    ex.modality = Modality::sound;
    ex.data = t;
    ex.sample_rate = sample_rate;
    return ex;
}

void save_sound(const Tensor& samples, int sample_rate, const std::string& path) {
    if (samples.rank() != 1)
        throw ContractError("save_sound expects a rank-1 tensor, got " +
                            shape_str(samples.shape()));
    const std::int64_t n = samples.numel();
    std::vector<std::uint8_t> out;
    out.reserve(44 + 2 * n);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    wr_u32(out, static_cast<std::uint32_t>(36 + 2 * n));
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    wr_u32(out, 16);
    wr_u16(out, 1);  // PCM
    wr_u16(out, 1);  // mono
    wr_u32(out, static_cast<std::uint32_t>(sample_rate));
    wr_u32(out, static_cast<std::uint32_t>(sample_rate * 2));
    wr_u16(out, 2);
    wr_u16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    wr_u32(out, static_cast<std::uint32_t>(2 * n));
    const float* p = samples.data();
    for (std::int64_t i = 0; i < n; ++i) {
        long q = std::lrint(static_cast<double>(p[i]) * 32768.0);
        q = std::clamp(q, -32768L, 32767L);
        wr_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + path);
}

// ---------------------------------------------------------------- frames

namespace {

std::string frame_name(int t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d.png", t);
    return buf;
}

}  // namespace

TextureExemplar load_frames(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError(dir + " is not a directory");
    int max_index = -1;
    int count = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        int idx;
        if (std::sscanf(name.c_str(), "frame_%04d.png", &idx) == 1) {
            max_index = std::max(max_index, idx);
            ++count;
        }
    }
    if (count == 0) throw FormatError(dir + ": no frame_NNNN.png files found");
    if (max_index + 1 != count)
        throw FormatError(dir + ": gaps in frame numbering (found " + std::to_string(count) +
                          " frames, highest index " + std::to_string(max_index) + ")");

    const int frames = count;
    Tensor data;
    int h = 0, w = 0;
    for (int t = 0; t < frames; ++t) {
        const std::string path = (fs::path(dir) / frame_name(t)).string();
        RawImage img = decode_png(path);
        if (t == 0) {
            h = img.h;
            w = img.w;
            data = Tensor({h, w, frames, 3});
        } else if (img.h != h || img.w != w) {
            throw FormatError(path + ": frame size " + std::to_string(img.w) + "x" +
                              std::to_string(img.h) + " differs from first frame");
        }
        Tensor ft = image_tensor_from_raw(img);
        const float* src = ft.data();
        float* dst = data.data();
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i)
            for (int c = 0; c < 3; ++c)
                dst[(i * frames + t) * 3 + c] = src[i * 3 + c];
    }
    TextureExemplar ex;
    ex.modality = Modality::dynamic;
    ex.data = data;
    return ex;
}

void save_frames(const Tensor& hwt3, const std::string& dir) {
    if (hwt3.rank() != 4 || hwt3.shape()[3] != 3)
        throw ContractError("save_frames expects HxWxTx3, got " + shape_str(hwt3.shape()));
    fs::create_directories(dir);
    const int h = hwt3.shape()[0], w = hwt3.shape()[1], frames = hwt3.shape()[2];
    Tensor frame({h, w, 3});
    for (int t = 0; t < frames; ++t) {
        const float* src = hwt3.data();
        float* dst = frame.data();
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i)
            for (int c = 0; c < 3; ++c)
                dst[i * 3 + c] = src[(i * frames + t) * 3 + c];
        save_image(frame, (fs::path(dir) / frame_name(t)).string());
    }
}

// ---------------------------------------------------------------- GIF

namespace {

// Bit packer for GIF LZW: LSB-first into 255-byte sub-blocks.
struct GifBitWriter {
    std::vector<std::uint8_t>& out;
    std::vector<std::uint8_t> block;
    std::uint32_t bits = 0;
    int nbits = 0;

    explicit GifBitWriter(std::vector<std::uint8_t>& o) : out(o) {}
    void put(std::uint32_t code, int width) {
        bits |= code << nbits;
        nbits += width;
        while (nbits >= 8) {
            block.push_back(bits & 0xff);
            bits >>= 8;
            nbits -= 8;
            if (block.size() == 255) flush_block();
        }
    }
    void flush_block() {
        if (block.empty()) return;
        out.push_back(static_cast<std::uint8_t>(block.size()));
        out.insert(out.end(), block.begin(), block.end());
        block.clear();
    }
    void finish() {
        if (nbits > 0) {
            block.push_back(bits & 0xff);
            bits = 0;
            nbits = 0;
            if (block.size() == 255) flush_block();
        }
        flush_block();
        out.push_back(0);  // block terminator
    }
};

void gif_lzw_encode(const std::vector<std::uint8_t>& indices, std::vector<std::uint8_t>& out) {
    const int min_code_size = 8;
    out.push_back(min_code_size);
    const std::uint32_t clear_code = 1u << min_code_size;
    const std::uint32_t end_code = clear_code + 1;

    GifBitWriter bw(out);
    std::unordered_map<std::uint32_t, std::uint32_t> dict;
    std::uint32_t next_code = end_code + 1;
    int code_size = min_code_size + 1;
    bw.put(clear_code, code_size);

    std::uint32_t cur = indices[0];
    for (size_t i = 1; i < indices.size(); ++i) {
        const std::uint32_t sym = indices[i];
        const std::uint32_t key = (cur << 8) | sym;
        auto it = dict.find(key);
        if (it != dict.end()) {
            cur = it->second;
            continue;
        }
        bw.put(cur, code_size);
        if (next_code < 4096) {
            dict[key] = next_code++;
            if (next_code - 1 == (1u << code_size) && code_size < 12) ++code_size;
        } else {
            bw.put(clear_code, code_size);
            dict.clear();
            next_code = end_code + 1;
            code_size = min_code_size + 1;
        }
        cur = sym;
    }
    bw.put(cur, code_size);
    bw.put(end_code, code_size);
    bw.finish();
}

}  // namespace

void save_gif(const Tensor& hwt3, const std::string& path, int frame_delay_cs) {
    if (hwt3.rank() != 4 || hwt3.shape()[3] != 3)
        throw ContractError("save_gif expects HxWxTx3, got " + shape_str(hwt3.shape()));
    const int h = hwt3.shape()[0], w = hwt3.shape()[1], frames = hwt3.shape()[2];

    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'G', 'I', 'F', '8', '9', 'a'});
    wr_u16(out, static_cast<std::uint16_t>(w));
    wr_u16(out, static_cast<std::uint16_t>(h));
    out.push_back(0xF7);  // global color table, 256 entries, 8 bits
    out.push_back(0);
    out.push_back(0);
    // 6x7x6 uniform color cube, padded to 256
    for (int r = 0; r < 6; ++r)
        for (int g = 0; g < 7; ++g)
            for (int b = 0; b < 6; ++b) {
                out.push_back(static_cast<std::uint8_t>(r * 255 / 5));
                out.push_back(static_cast<std::uint8_t>(g * 255 / 6));
                out.push_back(static_cast<std::uint8_t>(b * 255 / 5));
            }
    for (int i = 252; i < 256; ++i) {
        out.push_back(0);
        out.push_back(0);
        out.push_back(0);
    }
    // loop forever
    out.insert(out.end(), {0x21, 0xFF, 0x0B});
    const char* app = "NETSCAPE2.0";
    out.insert(out.end(), app, app + 11);
    out.insert(out.end(), {0x03, 0x01, 0x00, 0x00, 0x00});

    std::vector<std::uint8_t> indices(static_cast<size_t>(h) * w);
    for (int t = 0; t < frames; ++t) {
        out.insert(out.end(), {0x21, 0xF9, 0x04, 0x00});
        wr_u16(out, static_cast<std::uint16_t>(frame_delay_cs));
        out.push_back(0);
        out.push_back(0);
        out.push_back(0x2C);  // image descriptor
        wr_u16(out, 0);
        wr_u16(out, 0);
        wr_u16(out, static_cast<std::uint16_t>(w));
        wr_u16(out, static_cast<std::uint16_t>(h));
        out.push_back(0);
        const float* p = hwt3.data();
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) {
            const float* px = p + (i * frames + t) * 3;
            const int r = static_cast<int>(std::lrint(std::clamp(px[0], 0.0f, 1.0f) * 5.0f));
            const int g = static_cast<int>(std::lrint(std::clamp(px[1], 0.0f, 1.0f) * 6.0f));
            const int b = static_cast<int>(std::lrint(std::clamp(px[2], 0.0f, 1.0f) * 5.0f));
            indices[i] = static_cast<std::uint8_t>((r * 7 + g) * 6 + b);
        }
        gif_lzw_encode(indices, out);
    }
    out.push_back(0x3B);  // trailer

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + path);
}

void save_exemplar(const TextureExemplar& ex, const std::string& path) {
    switch (ex.modality) {
        case Modality::image: save_image(ex.data, path); break;
        case Modality::sound: save_sound(ex.data, ex.sample_rate ? ex.sample_rate : 22050, path); break;
        case Modality::dynamic: save_frames(ex.data, path); break;
    }
}

// ---------------------------------------------------------------- resize

Tensor resize_bilinear(const Tensor& hw3, int out_h, int out_w) {
    if (hw3.rank() != 3) throw ContractError("resize_bilinear expects HxWxC");
    if (out_h < 1 || out_w < 1) throw ContractError("resize_bilinear: bad target size");
    const int in_h = hw3.shape()[0], in_w = hw3.shape()[1], c = hw3.shape()[2];
    Tensor out({out_h, out_w, c});
    const float sy = static_cast<float>(in_h) / out_h;
    const float sx = static_cast<float>(in_w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        float fy = (y + 0.5f) * sy - 0.5f;
        fy = std::clamp(fy, 0.0f, static_cast<float>(in_h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, in_h - 1);
        const float wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            float fx = (x + 0.5f) * sx - 0.5f;
            fx = std::clamp(fx, 0.0f, static_cast<float>(in_w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, in_w - 1);
            const float wx = fx - x0;
            for (int ch = 0; ch < c; ++ch) {
                const float v00 = hw3.at({y0, x0, ch});
                const float v01 = hw3.at({y0, x1, ch});
                const float v10 = hw3.at({y1, x0, ch});
                const float v11 = hw3.at({y1, x1, ch});
                out.data()[(static_cast<std::int64_t>(y) * out_w + x) * c + ch] =
                    (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- masks

std::int64_t MaskRegion::domain_size() const {
    std::int64_t n = 1;
    for (int e : extents) n *= e;
    return n;
}

std::int64_t MaskRegion::count_corrupted() const {
    std::int64_t n = 0;
    for (std::uint8_t v : corrupted) n += v ? 1 : 0;
    return n;
}

void MaskRegion::closure_bbox(std::vector<int>* lo, std::vector<int>* hi) const {
    const int d = static_cast<int>(extents.size());
    lo->assign(d, 0);
    hi->assign(d, 0);
    for (int a = 0; a < d; ++a) {
        (*lo)[a] = extents[a];
        (*hi)[a] = 0;
    }
    const std::int64_t n = domain_size();
    for (std::int64_t f = 0; f < n; ++f) {
        if (!closure[f]) continue;
        std::int64_t rem = f;
        for (int a = d - 1; a >= 0; --a) {
            const int c = static_cast<int>(rem % extents[a]);
            rem /= extents[a];
            (*lo)[a] = std::min((*lo)[a], c);
            (*hi)[a] = std::max((*hi)[a], c + 1);
        }
    }
}

namespace {

// Box dilation by `border` along every axis, done as separable 1-D passes.
std::vector<std::uint8_t> dilate_box(const std::vector<std::uint8_t>& in,
                                     const std::vector<int>& extents, int border) {
    std::vector<std::uint8_t> cur = in;
    if (border <= 0) return cur;
    const int d = static_cast<int>(extents.size());
    std::vector<std::int64_t> strides(d);
    strides[d - 1] = 1;
    for (int a = d - 2; a >= 0; --a) strides[a] = strides[a + 1] * extents[a + 1];
    const std::int64_t n = cur.size();
    std::vector<std::uint8_t> next(n);
    for (int a = 0; a < d; ++a) {
        std::fill(next.begin(), next.end(), 0);
        for (std::int64_t f = 0; f < n; ++f) {
            if (!cur[f]) continue;
            const int coord = static_cast<int>((f / strides[a]) % extents[a]);
            const int lo = std::max(0, coord - border);
            const int hi = std::min(extents[a] - 1, coord + border);
            for (int cpos = lo; cpos <= hi; ++cpos)
                next[f + static_cast<std::int64_t>(cpos - coord) * strides[a]] = 1;
        }
        cur.swap(next);
    }
    return cur;
}

}  // namespace

MaskRegion make_mask(std::vector<int> extents, std::vector<std::uint8_t> corrupted,
                     int border_width) {
    if (border_width < 0) throw ContractError("mask border width must be >= 0");
    MaskRegion m;
    m.extents = std::move(extents);
    std::int64_t n = 1;
    for (int e : m.extents) n *= e;
    if (static_cast<std::int64_t>(corrupted.size()) != n)
        throw ContractError("mask flag count does not match extents");
    m.corrupted = std::move(corrupted);
    m.border_width = border_width;
    const std::int64_t count = m.count_corrupted();
    if (count == 0) throw ContractError("mask region is empty");
    if (count == n) throw ContractError("mask covers the entire domain");
    m.closure = dilate_box(m.corrupted, m.extents, border_width);
    return m;
}

MaskRegion load_mask(const std::string& path, int border_width) {
    RawImage img = decode_png(path);
    if (img.channels != 1)
        throw FormatError(path + ": mask PNG must be grayscale");
    std::vector<std::uint8_t> flags(img.pixels.size());
    for (size_t i = 0; i < img.pixels.size(); ++i) flags[i] = img.pixels[i] ? 1 : 0;
    return make_mask({img.h, img.w}, std::move(flags), border_width);
}

void save_mask(const MaskRegion& mask2d, const std::string& path) {
    if (mask2d.extents.size() != 2) throw ContractError("save_mask expects a 2-D mask");
    RawImage img;
    img.h = mask2d.extents[0];
    img.w = mask2d.extents[1];
    img.channels = 1;
    img.pixels.resize(mask2d.corrupted.size());
    for (size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = mask2d.corrupted[i] ? 255 : 0;
    encode_png(path, img);
}

MaskRegion make_interval_mask(int length, std::int64_t start, std::int64_t end,
                              int border_width) {
    if (start < 0 || end > length || start >= end)
        throw ContractError("bad mask interval [" + std::to_string(start) + ", " +
                            std::to_string(end) + ") for length " + std::to_string(length));
    std::vector<std::uint8_t> flags(length, 0);
    for (std::int64_t i = start; i < end; ++i) flags[i] = 1;
    return make_mask({length}, std::move(flags), border_width);
}

MaskRegion replicate_mask_frames(const MaskRegion& image_mask, int frames) {
    if (image_mask.extents.size() != 2)
        throw ContractError("replicate_mask_frames expects a 2-D mask");
    if (frames < 1) throw ContractError("frame count must be >= 1");
    const std::int64_t n = image_mask.domain_size();
    std::vector<std::uint8_t> flags(n * frames);
    for (std::int64_t i = 0; i < n; ++i)
        for (int t = 0; t < frames; ++t) flags[i * frames + t] = image_mask.corrupted[i];
    return make_mask({image_mask.extents[0], image_mask.extents[1], frames}, std::move(flags),
                     image_mask.border_width);
}

Tensor apply_mask(const Tensor& data, const MaskRegion& mask) {
    const std::int64_t domain = mask.domain_size();
    if (data.numel() % domain != 0)
        throw ContractError("mask extents " + shape_str(mask.extents) +
                            " do not divide tensor shape " + shape_str(data.shape()));
    const std::int64_t channels = data.numel() / domain;
    Tensor out = data.clone();
    float* p = out.data();
    for (std::int64_t f = 0; f < domain; ++f)
        if (mask.corrupted[f])
            for (std::int64_t c = 0; c < channels; ++c) p[f * channels + c] = 0.0f;
    return out;
}

}  // namespace cgtex
