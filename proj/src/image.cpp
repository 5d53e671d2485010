#include "dseg/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <jpeglib.h>

#include "dseg/ops.hpp"

namespace dseg {

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

Mask to_mask(const Plane& p) {
    Mask m(p.height, p.width);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const float v = p.data[i];
        if (v != 0.0f && v != 1.0f) {
            throw std::invalid_argument("mask is not binary: value " + std::to_string(v) + " at pixel " +
                                        std::to_string(i));
        }
        m.data[i] = v == 1.0f ? 1 : 0;
    }
    return m;
}

Mask threshold(const Plane& p, float t) {
    Mask m(p.height, p.width);
    for (std::size_t i = 0; i < p.size(); ++i) m.data[i] = p.data[i] > t ? 1 : 0;
    return m;
}

Plane to_plane(const Mask& m) {
    Plane p(m.height, m.width);
    for (std::size_t i = 0; i < m.size(); ++i) p.data[i] = m.data[i] ? 1.0f : 0.0f;
    return p;
}

Plane resize(const Plane& p, int h, int w) {
    if (p.height == h && p.width == w) return p;
    Tensor<float> t(1, 1, p.height, p.width);
    std::copy(p.data.begin(), p.data.end(), t.data());
    const Tensor<float> r = ops::resize_bilinear_value(t, h, w);
    Plane out(h, w);
    std::copy(r.data(), r.data() + r.numel(), out.data.begin());
    return out;
}

RgbImage resize(const RgbImage& img, int h, int w) {
    if (img.height == h && img.width == w) return img;
    Tensor<float> t(1, 3, img.height, img.width);
    std::copy(img.data.begin(), img.data.end(), t.data());
    const Tensor<float> r = ops::resize_bilinear_value(t, h, w);
    RgbImage out(h, w);
    std::copy(r.data(), r.data() + r.numel(), out.data.begin());
    return out;
}

namespace {

struct Raw {
    int height = 0;
    int width = 0;
    int channels = 0;  // 1 or 3
    std::vector<std::uint8_t> pixels;  // interleaved
};

enum class Format { png, jpeg, unknown };

Format sniff(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open image " + path);
    std::array<unsigned char, 8> sig{};
    f.read(reinterpret_cast<char*>(sig.data()), sig.size());
    if (f.gcount() >= 8 && png_sig_cmp(sig.data(), 0, 8) == 0) return Format::png;
    if (f.gcount() >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return Format::jpeg;
    return Format::unknown;
}

Raw read_png(const std::string& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw std::runtime_error("cannot read PNG " + path + ": " + img.message);
    }
    // Always decode to RGB; gray sources are replicated so the channel mean is exact.
    img.format = PNG_FORMAT_RGB;
    Raw raw;
    raw.height = static_cast<int>(img.height);
    raw.width = static_cast<int>(img.width);
    raw.channels = 3;
    raw.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, raw.pixels.data(), 0, nullptr)) {
        png_image_free(&img);
        throw std::runtime_error("cannot decode PNG " + path + ": " + img.message);
    }
    return raw;
}

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
};

void jpeg_fail(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegError*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

Raw read_jpeg(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!file) throw std::runtime_error("cannot open image " + path);
    jpeg_decompress_struct cinfo;
    JpegError err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_fail;
    Raw raw;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("cannot decode JPEG " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    raw.width = static_cast<int>(cinfo.output_width);
    raw.height = static_cast<int>(cinfo.output_height);
    raw.channels = static_cast<int>(cinfo.output_components);
    raw.pixels.resize(static_cast<std::size_t>(raw.width) * raw.height * raw.channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = raw.pixels.data() +
                       static_cast<std::size_t>(cinfo.output_scanline) * raw.width * raw.channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return raw;
}

Raw read_raw(const std::string& path) {
    switch (sniff(path)) {
        case Format::png: return read_png(path);
        case Format::jpeg: return read_jpeg(path);
        case Format::unknown: break;
    }
    throw std::runtime_error("unsupported image format: " + path);
}

std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

void write_png(const std::string& path, int h, int w, bool gray, const std::vector<std::uint8_t>& px) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, px.data(), 0, nullptr)) {
        throw std::runtime_error("cannot write PNG " + path + ": " + img.message);
    }
}

}  // namespace

Plane read_gray(const std::string& path) {
    const Raw raw = read_raw(path);
    Plane p(raw.height, raw.width);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (raw.channels == 1) {
            p.data[i] = raw.pixels[i] / 255.0f;
        } else {
            const int sum = raw.pixels[3 * i] + raw.pixels[3 * i + 1] + raw.pixels[3 * i + 2];
            p.data[i] = static_cast<float>(sum) / (3.0f * 255.0f);
        }
    }
    return p;
}

RgbImage read_rgb(const std::string& path) {
    const Raw raw = read_raw(path);
    RgbImage img(raw.height, raw.width);
    const std::size_t n = static_cast<std::size_t>(raw.height) * raw.width;
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const std::uint8_t v = raw.channels == 1 ? raw.pixels[i] : raw.pixels[3 * i + c];
            img.data[c * n + i] = v / 255.0f;
        }
    }
    return img;
}

void write_gray_png(const std::string& path, const Plane& p) {
    std::vector<std::uint8_t> px(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) px[i] = to_byte(p.data[i]);
    write_png(path, p.height, p.width, true, px);
}

void write_mask_png(const std::string& path, const Mask& m) {
    std::vector<std::uint8_t> px(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) px[i] = m.data[i] ? 255 : 0;
    write_png(path, m.height, m.width, true, px);
}

void write_rgb_png(const std::string& path, const RgbImage& img) {
    const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
    std::vector<std::uint8_t> px(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) px[3 * i + c] = to_byte(img.data[c * n + i]);
    }
    write_png(path, img.height, img.width, false, px);
}

}  // namespace dseg
