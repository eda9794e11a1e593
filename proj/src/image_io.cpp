#include "pnp/image_io.hpp"

#include <png.h>

#include <csetjmp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "pnp/errors.hpp"

namespace pnp {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr openFile(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

void pngWarning(png_structp, png_const_charp) {}

std::string lowerExtension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Field readPng(const std::filesystem::path& path) {
  FilePtr file = openFile(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, pngWarning);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};

  // libpng reports errors by longjmp; nothing with a destructor is created
  // between here and the end of png_read_png.
  if (setjmp(png_jmpbuf(png))) throw IoError("libpng failed to decode " + path.string());
  png_init_io(png, file.get());
  png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA, nullptr);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (channels != 1 && channels != 3) throw IoError("unsupported PNG channel count");
  png_bytepp rows = png_get_rows(png, info);

  Field out(height, width, channels);
  const double scale = depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (int i = 0; i < height; ++i) {
    const png_bytep row = rows[i];
    for (int j = 0; j < width; ++j) {
      for (int c = 0; c < channels; ++c) {
        const int k = j * channels + c;
        const unsigned v = depth == 16 ? (static_cast<unsigned>(row[2 * k]) << 8) | row[2 * k + 1]
                                       : row[k];
        out(i, j, c) = v * scale;
      }
    }
  }
  return out;
}

void writePng(const std::filesystem::path& path, const Field& image, int bitDepth) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw DimensionError("PNG output needs 1 or 3 channels");
  }
  if (bitDepth != 8 && bitDepth != 16) throw InvalidArgument("PNG bit depth must be 8 or 16");
  const int bytes = bitDepth / 8;
  const double maxValue = bitDepth == 16 ? 65535.0 : 255.0;
  std::vector<png_byte> row(static_cast<std::size_t>(image.width() * image.channels() * bytes));

  FilePtr file = openFile(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, pngWarning);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};

  if (setjmp(png_jmpbuf(png))) throw IoError("libpng failed to encode " + path.string());
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), bitDepth,
               image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  for (int i = 0; i < image.height(); ++i) {
    for (int j = 0; j < image.width(); ++j) {
      for (int c = 0; c < image.channels(); ++c) {
        const double v = std::clamp(image(i, j, c), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * maxValue));
        const std::size_t k = static_cast<std::size_t>(j * image.channels() + c);
        if (bytes == 2) {
          row[2 * k] = static_cast<png_byte>(q >> 8);
          row[2 * k + 1] = static_cast<png_byte>(q & 0xff);
        } else {
          row[k] = static_cast<png_byte>(q);
        }
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

Field readPfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || (magic != "PF" && magic != "Pf")) throw IoError("not a PFM file: " + path.string());
  if (width < 1 || height < 1) throw IoError("bad PFM dimensions");
  in.get();  // single whitespace before the raster
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  std::vector<std::uint32_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 4));
  if (!in) throw IoError("truncated PFM raster in " + path.string());

  const bool swap = little != (std::endian::native == std::endian::little);
  Field out(height, width, channels);
  std::size_t n = 0;
  for (int i = height - 1; i >= 0; --i) {
    for (int j = 0; j < width; ++j) {
      for (int c = 0; c < channels; ++c) {
        std::uint32_t bits = raw[n++];
        if (swap) bits = __builtin_bswap32(bits);
        out(i, j, c) = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
  }
  return out;
}

void writePfm(const std::filesystem::path& path, const Field& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw DimensionError("PFM output needs 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (image.channels() == 3 ? "PF" : "Pf") << '\n'
      << image.width() << ' ' << image.height() << '\n'
      << "-1.0\n";
  for (int i = image.height() - 1; i >= 0; --i) {
    for (int j = 0; j < image.width(); ++j) {
      for (int c = 0; c < image.channels(); ++c) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(image(i, j, c)));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        out.write(reinterpret_cast<const char*>(&bits), 4);
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Field readImage(const std::filesystem::path& path) {
  const std::string ext = lowerExtension(path);
  if (ext == ".png") return readPng(path);
  if (ext == ".pfm") return readPfm(path);
  throw IoError("unsupported image extension: " + path.string());
}

void writeImage(const std::filesystem::path& path, const Field& image) {
  const std::string ext = lowerExtension(path);
  if (ext == ".png") return writePng(path, image);
  if (ext == ".pfm") return writePfm(path, image);
  throw IoError("unsupported image extension: " + path.string());
}

}  // namespace pnp
