#include "neuracodec/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace neuracodec {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  char error[256] = {};
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* reader = static_cast<PngReader*>(png_get_error_ptr(png));
  std::snprintf(reader->error, sizeof(reader->error), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// The two setjmp frames below hold only trivially destructible locals.
bool read_png_header(PngReader& r, std::FILE* fp, PngHeader& h) {
  if (setjmp(png_jmpbuf(r.png))) return false;
  png_init_io(r.png, fp);
  png_read_info(r.png, r.info);
  png_get_IHDR(r.png, r.info, &h.width, &h.height, &h.bit_depth, &h.color_type, nullptr, nullptr, nullptr);
  if (h.color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(r.png);
    png_read_update_info(r.png, r.info);
  }
  return true;
}

bool read_png_rows(PngReader& r, png_bytep* rows) {
  if (setjmp(png_jmpbuf(r.png))) return false;
  png_read_image(r.png, rows);
  png_read_end(r.png, nullptr);
  return true;
}

std::string png_format_name(const PngHeader& h) {
  std::string kind;
  switch (h.color_type) {
    case PNG_COLOR_TYPE_GRAY: kind = "greyscale"; break;
    case PNG_COLOR_TYPE_GRAY_ALPHA: kind = "greyscale+alpha"; break;
    case PNG_COLOR_TYPE_RGB: kind = "RGB"; break;
    case PNG_COLOR_TYPE_RGB_ALPHA: kind = "RGBA"; break;
    case PNG_COLOR_TYPE_PALETTE: kind = "palette"; break;
    default: kind = "unknown colour type";
  }
  return std::to_string(h.bit_depth) + "-bit " + kind + " PNG";
}

ImageTensor load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open " + path.string());
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &r, png_error_fn, png_warning_fn);
  if (!r.png) throw std::runtime_error("libpng initialisation failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw std::runtime_error("libpng initialisation failed");

  PngHeader h;
  if (!read_png_header(r, fp.get(), h)) throw FormatError(path.string() + ": corrupt PNG: " + r.error);
  const bool palette = h.color_type == PNG_COLOR_TYPE_PALETTE;
  const bool supported_type = palette || h.color_type == PNG_COLOR_TYPE_GRAY || h.color_type == PNG_COLOR_TYPE_RGB;
  if (!supported_type || (!palette && h.bit_depth != 8))
    throw FormatError(path.string() + ": unsupported format " + png_format_name(h) +
                      " (expected 8-bit greyscale, RGB or palette PNG)");
  const std::size_t channels = (h.color_type == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  if (palette && png_get_valid(r.png, r.info, PNG_INFO_tRNS))
    throw FormatError(path.string() + ": unsupported format palette PNG with transparency");

  const std::size_t stride = png_get_rowbytes(r.png, r.info);
  if (stride != channels * h.width) throw FormatError(path.string() + ": unexpected PNG row layout");
  std::vector<png_byte> pixels(stride * h.height);
  std::vector<png_bytep> rows(h.height);
  for (std::size_t y = 0; y < h.height; ++y) rows[y] = pixels.data() + y * stride;
  if (!read_png_rows(r, rows.data())) throw FormatError(path.string() + ": corrupt PNG: " + r.error);

  ImageTensor img(channels, h.height, h.width);
  for (std::size_t y = 0; y < h.height; ++y)
    for (std::size_t x = 0; x < h.width; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        img.at(c, y, x) = static_cast<float>(pixels[y * stride + x * channels + c]) / 255.0f;
  return img;
}

ImageTensor load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t at = 2;
  auto next_field = [&]() -> long {
    while (at < bytes.size()) {
      if (bytes[at] == '#') {
        while (at < bytes.size() && bytes[at] != '\n') ++at;
      } else if (std::isspace(bytes[at])) {
        ++at;
      } else {
        break;
      }
    }
    long v = 0;
    std::size_t start = at;
    while (at < bytes.size() && std::isdigit(bytes[at])) v = v * 10 + (bytes[at++] - '0');
    if (at == start || v > 1 << 24) throw FormatError(path.string() + ": malformed PPM header");
    return v;
  };
  const long width = next_field();
  const long height = next_field();
  const long maxval = next_field();
  if (maxval != 255) throw FormatError(path.string() + ": unsupported format PPM with maxval " + std::to_string(maxval) + " (expected 255)");
  if (at >= bytes.size() || !std::isspace(bytes[at])) throw FormatError(path.string() + ": malformed PPM header");
  ++at;
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (bytes.size() - at < need) throw FormatError(path.string() + ": truncated PPM payload");

  ImageTensor img(3, static_cast<std::size_t>(height), static_cast<std::size_t>(width));
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(bytes[at + (y * img.width() + x) * 3 + c]) / 255.0f;
  return img;
}

void write_png8(const std::vector<std::uint8_t>& interleaved, std::size_t channels, std::size_t height, std::size_t width,
                const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, interleaved.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DataError("cannot write PNG " + path.string() + ": " + msg);
  }
}

std::vector<std::uint8_t> interleave(const ImageTensor& img, auto&& level) {
  if (img.channels() != 1 && img.channels() != 3)
    throw ShapeError("PNG output needs 1 or 3 channels, got " + std::to_string(img.channels()));
  std::vector<std::uint8_t> out(img.size());
  std::size_t k = 0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < img.channels(); ++c) out[k++] = level(img.at(c, y, x));
  return out;
}

}  // namespace

bool is_image_file(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".ppm";
}

ImageTensor load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), sizeof(sig));
  const auto got = static_cast<std::size_t>(in.gcount());
  in.close();
  if (got == 8 && png_sig_cmp(sig, 0, 8) == 0) return load_png(path);
  if (got >= 2 && sig[0] == 'P' && sig[1] == '6') return load_ppm(path);
  if (got >= 2 && sig[0] == 'P' && sig[1] >= '1' && sig[1] <= '7')
    throw FormatError(path.string() + ": unsupported format P" + std::string(1, static_cast<char>(sig[1])) + " netpbm (expected P6)");
  throw FormatError(path.string() + ": unsupported format (expected 8-bit PNG or binary PPM)");
}

void save_png(const ImageTensor& image, const std::filesystem::path& path) {
  auto bytes = interleave(image, [](float v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(static_cast<double>(v) * 255.0 + 0.5), 0.0, 255.0));
  });
  write_png8(bytes, image.channels(), image.height(), image.width(), path);
}

std::uint8_t display_level(float v, float lo, float hi) {
  const double t = (static_cast<double>(v) - lo) / (static_cast<double>(hi) - lo) * 255.0;
  return static_cast<std::uint8_t>(std::clamp(std::floor(t + 0.5), 0.0, 255.0));
}

void export_png(const ImageTensor& image, float lo, float hi, const std::filesystem::path& path) {
  if (!(hi > lo)) throw DataError("PNG export window needs hi > lo");
  auto bytes = interleave(image, [&](float v) { return display_level(v, lo, hi); });
  write_png8(bytes, image.channels(), image.height(), image.width(), path);
}

}  // namespace neuracodec
