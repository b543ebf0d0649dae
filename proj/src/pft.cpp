#include "fuzzyseg/pft.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fuzzyseg/error.hpp"

namespace fuzzyseg {

namespace {

static_assert(sizeof(float) == 4);

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

}  // namespace

PftTensor read_pft(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open PFT file " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw InputError(path.string() + ": missing PFT header line");

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": malformed PFT header: " + e.what());
  }
  PftTensor t;
  try {
    t.height = j.at("h").get<int>();
    t.width = j.at("w").get<int>();
    t.channels = j.at("c").get<int>();
    if (j.at("dtype").get<std::string>() != "f32") {
      throw InputError(path.string() + ": unsupported dtype " + j.at("dtype").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": PFT header field error: " + e.what());
  }
  if (t.height < 1 || t.width < 1 || t.channels < 1) {
    throw InputError(path.string() + ": PFT dimensions must be positive");
  }
  const std::size_t n = static_cast<std::size_t>(t.height) * static_cast<std::size_t>(t.width) *
                        static_cast<std::size_t>(t.channels);
  std::vector<std::uint32_t> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 4));
  if (static_cast<std::size_t>(in.gcount()) != n * 4) {
    throw InputError(path.string() + ": PFT payload truncated, expected " + std::to_string(n) + " floats");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw InputError(path.string() + ": trailing bytes after PFT payload");
  }
  t.data.resize(n);
  for (std::size_t k = 0; k < n; ++k) t.data[k] = std::bit_cast<float>(to_little_endian(raw[k]));
  return t;
}

void write_pft(const std::filesystem::path& path, int height, int width, int channels, std::span<const double> values) {
  const std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                        static_cast<std::size_t>(channels);
  if (values.size() != n) throw InputError("PFT payload size does not match its header");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write PFT file " + path.string());
  nlohmann::ordered_json header;
  header["h"] = height;
  header["w"] = width;
  header["c"] = channels;
  header["dtype"] = "f32";
  out << header.dump() << '\n';
  std::vector<std::uint32_t> raw(n);
  for (std::size_t k = 0; k < n; ++k) raw[k] = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(values[k])));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(n * 4));
  if (!out) throw Error("failed writing PFT file " + path.string());
}

LogitField read_logit_field(const std::filesystem::path& path) {
  auto t = read_pft(path);
  const GridShape shape{t.height, t.width, t.channels};
  validate_shape(shape);
  LogitField field(shape, std::vector<double>(t.data.begin(), t.data.end()));
  check_finite(field);
  return field;
}

void write_logit_field(const std::filesystem::path& path, const LogitField& logits) {
  write_pft(path, logits.height(), logits.width(), logits.classes(), logits.values());
}

ProbField read_prob_field(const std::filesystem::path& path) {
  auto t = read_pft(path);
  const GridShape shape{t.height, t.width, t.channels};
  validate_shape(shape);
  const auto c = static_cast<std::size_t>(shape.classes);
  std::vector<double> values(t.data.begin(), t.data.end());
  for (std::size_t p = 0; p < shape.pixels(); ++p) {
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double v = values[p * c + k];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InputError(path.string() + ": probability outside [0, 1] at pixel index " + std::to_string(p));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      throw InputError(path.string() + ": probabilities at pixel index " + std::to_string(p) + " sum to " +
                       std::to_string(sum));
    }
    for (std::size_t k = 0; k < c; ++k) values[p * c + k] /= sum;
  }
  return ProbField(shape, std::move(values));
}

void write_prob_field(const std::filesystem::path& path, const ProbField& probs) {
  write_pft(path, probs.height(), probs.width(), probs.classes(), probs.values());
}

}  // namespace fuzzyseg
