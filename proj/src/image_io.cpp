#include "fuzzyseg/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "fuzzyseg/error.hpp"

namespace fuzzyseg {

namespace {

struct Netpbm {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<unsigned char> bytes;
};

int read_header_int(std::istream& in, const std::string& name) {
  // Skip whitespace and '#' comments between header tokens.
  for (;;) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (ch != EOF && std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  if (!(in >> v) || v < 0) throw InputError(name + ": malformed netpbm header");
  return v;
}

Netpbm read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image " + path.string());
  Netpbm img;
  in >> img.magic;
  if (img.magic != "P5" && img.magic != "P6") {
    throw InputError(path.string() + ": expected binary PGM (P5) or PPM (P6), found '" + img.magic + "'");
  }
  img.width = read_header_int(in, path.string());
  img.height = read_header_int(in, path.string());
  img.maxval = read_header_int(in, path.string());
  if (img.width < 1 || img.height < 1) throw InputError(path.string() + ": empty image");
  if (img.maxval < 1 || img.maxval > 255) throw InputError(path.string() + ": only 8-bit netpbm files are supported");
  in.get();  // single whitespace byte before the raster
  const std::size_t channels = img.magic == "P6" ? 3 : 1;
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * channels;
  img.bytes.resize(n);
  in.read(reinterpret_cast<char*>(img.bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw InputError(path.string() + ": raster truncated");
  return img;
}

void write_netpbm(const std::filesystem::path& path, const char* magic, int width, int height,
                  const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image " + path.string());
  out << magic << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing image " + path.string());
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const auto raw = read_netpbm(path);
  Image img;
  img.height = raw.height;
  img.width = raw.width;
  img.channels = raw.magic == "P6" ? 3 : 1;
  img.data.resize(raw.bytes.size());
  for (std::size_t k = 0; k < raw.bytes.size(); ++k) img.data[k] = raw.bytes[k] / static_cast<double>(raw.maxval);
  return img;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw InputError("only 1- or 3-channel images can be written");
  std::vector<unsigned char> bytes(image.data.size());
  for (std::size_t k = 0; k < bytes.size(); ++k) {
    const double v = std::clamp(image.data[k], 0.0, 1.0);
    bytes[k] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  write_netpbm(path, image.channels == 3 ? "P6" : "P5", image.width, image.height, bytes);
}

LabelGrid read_label_pgm(const std::filesystem::path& path) {
  const auto raw = read_netpbm(path);
  if (raw.magic != "P5") throw InputError(path.string() + ": masks must be single-channel PGM (P5)");
  return LabelGrid(raw.height, raw.width, std::vector<int>(raw.bytes.begin(), raw.bytes.end()));
}

void write_label_pgm(const std::filesystem::path& path, const LabelGrid& labels) {
  std::vector<unsigned char> bytes(labels.pixels());
  for (std::size_t k = 0; k < bytes.size(); ++k) {
    const int v = labels.labels()[k];
    if (v < 0 || v > 255) throw InputError("class index " + std::to_string(v) + " does not fit an 8-bit mask");
    bytes[k] = static_cast<unsigned char>(v);
  }
  write_netpbm(path, "P5", labels.width(), labels.height(), bytes);
}

}  // namespace fuzzyseg
