#include "swinfsr/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

namespace swinfsr {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Tensor<float> png_read(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("png_read: cannot open " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw DataError("png_read: not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png_read: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png_read: libpng init failed");
    }
    std::vector<png_bytep> row_ptrs;
    std::vector<png_byte> pixels;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("png_read: malformed PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 W = png_get_image_width(png, info);
    const png_uint_32 H = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (depth != 8 || color != PNG_COLOR_TYPE_RGB) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("png_read: unsupported format (need 8-bit RGB, got depth " + std::to_string(depth) +
                        " color type " + std::to_string(color) + "): " + path);
    }

    pixels.resize(static_cast<std::size_t>(H) * W * 3);
    row_ptrs.resize(H);
    for (png_uint_32 y = 0; y < H; ++y) row_ptrs[y] = pixels.data() + static_cast<std::size_t>(y) * W * 3;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor<float> out = Tensor<float>::zeros({3, static_cast<std::int64_t>(H), static_cast<std::int64_t>(W)});
    float* d = out.data();
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    for (std::int64_t y = 0; y < static_cast<std::int64_t>(H); ++y)
        for (std::int64_t x = 0; x < static_cast<std::int64_t>(W); ++x) {
            const png_byte* px = &pixels[static_cast<std::size_t>(y * W + x) * 3];
            for (int c = 0; c < 3; ++c) d[c * plane + y * W + x] = float(px[c]) / 255.0f;
        }
    return out;
}

void png_write(const Tensor<float>& img, const std::string& path) {
    if (img.dim() != 3 || img.size(0) != 3) throw ShapeError("png_write: image must be [3,H,W]");
    const std::int64_t H = img.size(1), W = img.size(2);

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("png_write: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png_write: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png_write: libpng init failed");
    }
    std::vector<png_byte> pixels(static_cast<std::size_t>(H) * W * 3);
    std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(H));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("png_write: write failed: " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

    const float* d = img.data();
    const std::int64_t plane = H * W;
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) {
                float v = d[c * plane + y * W + x];
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                pixels[static_cast<std::size_t>(y * W + x) * 3 + static_cast<std::size_t>(c)] =
                    static_cast<png_byte>(v * 255.0f + 0.5f);
            }
    for (std::int64_t y = 0; y < H; ++y) row_ptrs[static_cast<std::size_t>(y)] = pixels.data() + y * W * 3;

    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace swinfsr
