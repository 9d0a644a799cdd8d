#include "supergraph/image.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include "supergraph/rng.hpp"

namespace supergraph {

namespace {

// Next whitespace-delimited token, skipping '#' comments to end of line.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch = in.get();
  for (;;) {
    if (ch == EOF) return tok;
    if (ch == '#') {
      while (ch != '\n' && ch != EOF) ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  while (ch != EOF && !std::isspace(ch)) {
    tok.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  return tok;
}

int parse_dim(const std::string& tok, const std::string& path) {
  if (tok.empty() || tok.size() > 9 || tok.find_first_not_of("0123456789") != std::string::npos)
    throw std::runtime_error("malformed header in " + path);
  return std::stoi(tok);
}

}  // namespace

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  const std::string magic = next_token(in);
  int channels = 0;
  if (magic == "P6")
    channels = 3;
  else if (magic == "P5")
    channels = 1;
  else
    throw std::runtime_error("malformed header in " + path + " (expected P5 or P6)");

  Image img;
  img.channels = channels;
  img.width = parse_dim(next_token(in), path);
  img.height = parse_dim(next_token(in), path);
  const int maxval = parse_dim(next_token(in), path);
  if (img.width <= 0 || img.height <= 0) throw std::runtime_error("malformed header in " + path);
  if (maxval != 255) throw std::runtime_error("unsupported maxval " + std::to_string(maxval) +
                                              " in " + path + " (only 255)");
  // Exactly one whitespace byte separates header and payload; next_token
  // already consumed it.
  const std::size_t count =
      static_cast<std::size_t>(img.width) * img.height * channels;
  img.data.resize(count);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count)
    throw std::runtime_error("truncated payload in " + path);
  return img;
}

void write_ppm(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_ppm: channels must be 1 or 3");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw std::runtime_error("cannot write " + path);
}

void write_pgm16(const std::vector<int>& labels, int width, int height, const std::string& path) {
  if (labels.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("write_pgm16: label count does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << width << " " << height << "\n65535\n";
  for (int v : labels) {
    if (v < 0 || v > 65535) throw std::invalid_argument("write_pgm16: label out of 16-bit range");
    const unsigned char hi = static_cast<unsigned char>(v >> 8);
    const unsigned char lo = static_cast<unsigned char>(v & 0xff);
    out.put(static_cast<char>(hi));
    out.put(static_cast<char>(lo));
  }
  if (!out) throw std::runtime_error("cannot write " + path);
}

std::vector<int> load_pgm16(const std::string& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (next_token(in) != "P5") throw std::runtime_error("malformed header in " + path);
  width = parse_dim(next_token(in), path);
  height = parse_dim(next_token(in), path);
  if (parse_dim(next_token(in), path) != 65535)
    throw std::runtime_error("unsupported maxval in " + path + " (only 65535)");
  const std::size_t count = static_cast<std::size_t>(width) * height;
  std::vector<int> labels(count);
  for (std::size_t k = 0; k < count; ++k) {
    const int hi = in.get();
    const int lo = in.get();
    if (hi == EOF || lo == EOF) throw std::runtime_error("truncated payload in " + path);
    labels[k] = (hi << 8) | lo;
  }
  return labels;
}

Image render_labels(const std::vector<int>& labels, int width, int height,
                    std::uint64_t palette_seed) {
  Image img;
  img.width = width;
  img.height = height;
  img.channels = 3;
  img.data.resize(static_cast<std::size_t>(width) * height * 3);

  auto color_of = [palette_seed](int label) {
    Rng r(palette_seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(label + 1)));
    // Keep channels in [64, 255] so the darkened boundary stays visible.
    std::uint8_t rgb[3];
    for (auto& c : rgb) c = static_cast<std::uint8_t>(64 + r.next_below(192));
    return std::array<std::uint8_t, 3>{rgb[0], rgb[1], rgb[2]};
  };

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int lab = labels[static_cast<std::size_t>(y) * width + x];
      auto rgb = color_of(lab);
      const bool boundary =
          (x > 0 && labels[static_cast<std::size_t>(y) * width + x - 1] != lab) ||
          (x + 1 < width && labels[static_cast<std::size_t>(y) * width + x + 1] != lab) ||
          (y > 0 && labels[static_cast<std::size_t>(y - 1) * width + x] != lab) ||
          (y + 1 < height && labels[static_cast<std::size_t>(y + 1) * width + x] != lab);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = boundary ? rgb[c] / 2 : rgb[c];
    }
  }
  return img;
}

}  // namespace supergraph
