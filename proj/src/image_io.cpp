#include "facerec/image_io.hpp"

#include <jpeglib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <vector>

#include "facerec/error.hpp"

namespace facerec {

namespace {

class PnmReader {
public:
    explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::string magic() {
        if (bytes_.size() < 2) throw ParseError("pnm: truncated header");
        pos_ = 2;
        return {static_cast<char>(bytes_[0]), static_cast<char>(bytes_[1])};
    }

    // Header integers are separated by whitespace and may be interleaved
    // with '#' comments running to end of line.
    long header_int() {
        skip_space_and_comments();
        long value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (value > 1'000'000'000) throw ParseError("pnm: header value too large");
            ++digits;
        }
        if (digits == 0) throw ParseError("pnm: expected integer in header");
        return value;
    }

    // Exactly one whitespace byte separates the header from binary data.
    void end_header() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw ParseError("pnm: missing whitespace after header");
        }
        ++pos_;
    }

    std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

}  // namespace

GrayImage decode_pnm(std::span<const std::uint8_t> bytes) {
    PnmReader reader(bytes);
    const std::string magic = reader.magic();
    const bool ascii = magic == "P2" || magic == "P3";
    const bool color = magic == "P3" || magic == "P6";
    if (magic != "P2" && magic != "P5" && !color) {
        throw ParseError("pnm: unsupported magic '" + magic + "'");
    }
    const long width = reader.header_int();
    const long height = reader.header_int();
    const long maxval = reader.header_int();
    if (width < 1 || height < 1) throw DimensionError("pnm: zero dimension");
    if (maxval < 1 || maxval > 65535) throw ParseError("pnm: maxval out of range");

    const std::size_t channels = color ? 3 : 1;
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    std::vector<double> samples(count);

    if (ascii) {
        PnmReader body(reader.rest());
        for (std::size_t i = 0; i < count; ++i) {
            const long v = body.header_int();
            if (v > maxval) throw ParseError("pnm: sample exceeds maxval");
            samples[i] = static_cast<double>(v) / static_cast<double>(maxval);
        }
    } else {
        reader.end_header();
        const auto data = reader.rest();
        const std::size_t bytes_per = maxval > 255 ? 2 : 1;
        if (data.size() < count * bytes_per) throw ParseError("pnm: truncated pixel data");
        for (std::size_t i = 0; i < count; ++i) {
            long v = bytes_per == 2 ? (data[2 * i] << 8) | data[2 * i + 1] : data[i];
            if (v > maxval) throw ParseError("pnm: sample exceeds maxval");
            samples[i] = static_cast<double>(v) / static_cast<double>(maxval);
        }
    }

    if (color) {
        return to_grayscale(RgbImage{static_cast<int>(width), static_cast<int>(height),
                                     std::move(samples)});
    }
    return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(samples));
}

GrayImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;

    // Everything that must survive a longjmp is declared before setjmp.
    std::vector<double> samples;
    std::vector<JSAMPLE> row;
    int width = 0;
    int height = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw ParseError(std::string("jpeg: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_GRAYSCALE;
    jpeg_start_decompress(&cinfo);

    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    samples.resize(static_cast<std::size_t>(width) * height);
    row.resize(static_cast<std::size_t>(width) * cinfo.output_components);
    while (cinfo.output_scanline < cinfo.output_height) {
        const std::size_t y = cinfo.output_scanline;
        JSAMPROW rows[1] = {row.data()};
        jpeg_read_scanlines(&cinfo, rows, 1);
        for (int x = 0; x < width; ++x) samples[y * width + x] = row[x] / 255.0;
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return GrayImage(width, height, std::move(samples));
}

GrayImage load_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        if (bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8) return decode_jpeg(bytes);
        if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pnm(bytes);
    } catch (const Error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    throw ParseError(path.string() + ": unrecognized image format");
}

std::string encode_pgm(const GrayImage& img) {
    std::string out = "P5\n" + std::to_string(img.width()) + " " +
                      std::to_string(img.height()) + "\n255\n";
    out.reserve(out.size() + img.pixels().size());
    for (double v : img.pixels()) {
        out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
    return out;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const std::string data = encode_pgm(img);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace facerec
