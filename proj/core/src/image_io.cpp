#include "cabm/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

namespace cabm {

namespace {

uint8_t to_byte(float v) {
  const double clamped = std::min(1.0, std::max(0.0, static_cast<double>(v)));
  return static_cast<uint8_t>(std::lround(clamped * 255.0));
}

TensorF from_bytes(const std::vector<uint8_t>& bytes, int64_t channels, int64_t h, int64_t w) {
  TensorF img({1, channels, h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < channels; ++c)
        img.at(0, c, y, x) = static_cast<float>(bytes[(y * w + x) * channels + c] / 255.0);
  return img;
}

TensorF load_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw ParseError("cannot read PNG '" + path + "': " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ParseError("cannot decode PNG '" + path + "': " + msg);
  }
  return from_bytes(buffer, 3, image.height, image.width);
}

void write_png(const std::string& path, const TensorF& img) {
  if (img.shape.c != 3) throw ShapeError("write_png: expected 3 channels");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.shape.w);
  image.height = static_cast<png_uint_32>(img.shape.h);
  image.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> buffer(static_cast<size_t>(img.shape.h * img.shape.w * 3));
  for (int64_t y = 0; y < img.shape.h; ++y)
    for (int64_t x = 0; x < img.shape.w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        buffer[(y * img.shape.w + x) * 3 + c] = to_byte(img.at(0, c, y, x));
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr))
    throw Error("cannot write PNG '" + path + "': " + image.message);
}

int read_pnm_int(std::istream& in) {
  // skips whitespace and '#' comments
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  if (!in) throw ParseError("malformed PNM header");
  return v;
}

TensorF load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  char magic[2];
  in.read(magic, 2);
  int channels = 0;
  if (magic[0] == 'P' && magic[1] == '6')
    channels = 3;
  else if (magic[0] == 'P' && magic[1] == '5')
    channels = 1;
  else
    throw ParseError("unsupported PNM magic in '" + path + "' (expected P5 or P6)");
  const int w = read_pnm_int(in);
  const int h = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (w <= 0 || h <= 0 || maxval != 255)
    throw ParseError("unsupported PNM geometry in '" + path + "' (need maxval 255)");
  in.get();  // single whitespace after header
  std::vector<uint8_t> bytes(static_cast<size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw ParseError("truncated PNM data in '" + path + "'");
  return from_bytes(bytes, channels, h, w);
}

void write_pnm(const std::string& path, const TensorF& img, int channels) {
  if (img.shape.c != channels)
    throw ShapeError("write_pnm: image has " + std::to_string(img.shape.c) +
                     " channels, format needs " + std::to_string(channels));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << (channels == 3 ? "P6" : "P5") << "\n"
      << img.shape.w << " " << img.shape.h << "\n255\n";
  std::vector<uint8_t> bytes(static_cast<size_t>(img.shape.h * img.shape.w * channels));
  for (int64_t y = 0; y < img.shape.h; ++y)
    for (int64_t x = 0; x < img.shape.w; ++x)
      for (int64_t c = 0; c < channels; ++c)
        bytes[(y * img.shape.w + x) * channels + c] = to_byte(img.at(0, c, y, x));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

TensorF load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error("cannot open '" + path + "'");
  unsigned char sig[2] = {0, 0};
  probe.read(reinterpret_cast<char*>(sig), 2);
  probe.close();
  if (sig[0] == 0x89 && sig[1] == 'P') return load_png(path);
  if (sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) return load_pnm(path);
  throw ParseError("unrecognized image format in '" + path + "'");
}

void save_image(const std::string& path, const TensorF& img) {
  if (img.shape.n != 1) throw ShapeError("save_image: expected a single image (N = 1)");
  if (ends_with(path, ".png")) {
    write_png(path, ensure_rgb(img));
  } else if (ends_with(path, ".ppm")) {
    write_pnm(path, ensure_rgb(img), 3);
  } else if (ends_with(path, ".pgm")) {
    write_pnm(path, img, 1);
  } else {
    throw Error("save_image: unsupported extension in '" + path + "' (use .png/.ppm/.pgm)");
  }
}

TensorF ensure_rgb(const TensorF& img) {
  if (img.shape.c == 3) return img;
  if (img.shape.c != 1) throw ShapeError("ensure_rgb: expected 1 or 3 channels");
  TensorF out({img.shape.n, 3, img.shape.h, img.shape.w});
  for (int64_t n = 0; n < img.shape.n; ++n)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = 0; y < img.shape.h; ++y)
        for (int64_t x = 0; x < img.shape.w; ++x) out.at(n, c, y, x) = img.at(n, 0, y, x);
  return out;
}

}  // namespace cabm
