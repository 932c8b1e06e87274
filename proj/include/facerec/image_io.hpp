#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "facerec/imaging.hpp"

namespace facerec {

/// Decodes PGM (P2 ASCII, P5 binary) and PPM (P3, P6) data. Colour input is
/// converted with to_grayscale. Intensities are divided by maxval, so an
/// 8-bit file yields v / 255 exactly.
GrayImage decode_pnm(std::span<const std::uint8_t> bytes);

/// Decodes a baseline JPEG through libjpeg and converts it to grayscale.
GrayImage decode_jpeg(std::span<const std::uint8_t> bytes);

/// Reads an image file, picking the decoder from the leading magic bytes.
GrayImage load_image(const std::filesystem::path& path);

/// Encodes an 8-bit binary PGM (P5); intensities are rounded to v * 255.
std::string encode_pgm(const GrayImage& img);

void save_pgm(const GrayImage& img, const std::filesystem::path& path);

}  // namespace facerec
