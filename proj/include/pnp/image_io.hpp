#pragma once

#include <filesystem>

#include "pnp/field.hpp"

namespace pnp {

/// 8- or 16-bit gray / RGB PNG rescaled to [0, 1]. Alpha is dropped, palettes
/// are expanded.
Field readPng(const std::filesystem::path& path);

/// Values are clamped to [0, 1]; 1 or 3 channels.
void writePng(const std::filesystem::path& path, const Field& image, int bitDepth = 8);

/// Portable float map ("Pf" gray / "PF" RGB), little-endian (scale -1.0),
/// rows stored bottom-to-top as 32-bit floats.
Field readPfm(const std::filesystem::path& path);
void writePfm(const std::filesystem::path& path, const Field& image);

/// Dispatches on the extension (.png / .pfm).
Field readImage(const std::filesystem::path& path);
void writeImage(const std::filesystem::path& path, const Field& image);

}  // namespace pnp
