#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "egrt/rng.hpp"

namespace egrt::diffusion {

/// Row-major grayscale raster with pixel values in [0, 1].
class GrayImage {
 public:
  GrayImage(std::size_t width, std::size_t height, double fill = 0.0)
      : GrayImage(width, height, std::vector<double>(width * height, fill)) {}

  GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width == 0 || height == 0) throw std::invalid_argument("image dimensions must be >= 1");
    if (pixels_.size() != width * height)
      throw std::invalid_argument("pixel count does not match width*height");
    for (double p : pixels_)
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("pixel value outside [0,1]");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  const std::vector<double>& pixels() const noexcept { return pixels_; }
  double at(std::size_t x, std::size_t y) const { return pixels_.at(y * width_ + x); }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> pixels_;
};

struct UniformBlend {
  double alpha;
};

/// Noise drawn from the density a*x^(a-1) on [0,1], blended with `alpha`.
struct PowerMask {
  double shape;
  double alpha = 0.75;
};

using NoiseSpec = std::variant<UniformBlend, PowerMask>;

inline void validate(const NoiseSpec& spec) {
  std::visit(
      [](const auto& s) {
        if (!(s.alpha >= 0.0 && s.alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, PowerMask>)
          if (!(s.shape > 0.0)) throw std::invalid_argument("power shape must be > 0");
      },
      spec);
}

inline double blend_alpha(const NoiseSpec& spec) {
  return std::visit([](const auto& s) { return s.alpha; }, spec);
}

/// i.i.d. pixels, row-major. Power samples use the inverse CDF u^(1/a).
inline GrayImage gen_noise_field(std::size_t w, std::size_t h, const NoiseSpec& spec, std::uint64_t seed) {
  validate(spec);
  SplitMix64 rng(seed);
  std::vector<double> px(w * h);
  if (const auto* pm = std::get_if<PowerMask>(&spec)) {
    const double inv = 1.0 / pm->shape;
    for (auto& p : px) p = std::pow(rng.uniform(), inv);
  } else {
    for (auto& p : px) p = rng.uniform();
  }
  return GrayImage(w, h, std::move(px));
}

/// (1 - alpha) * img + alpha * noise, pixelwise. Results are pinned to the
/// interval spanned by the two inputs so rounding never leaves it.
inline GrayImage blend(const GrayImage& img, const GrayImage& noise, double alpha) {
  if (img.width() != noise.width() || img.height() != noise.height())
    throw std::invalid_argument("blend: image and noise dimensions differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
  std::vector<double> out(img.size());
  const auto& a = img.pixels();
  const auto& b = noise.pixels();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp((1.0 - alpha) * a[i] + alpha * b[i], std::min(a[i], b[i]), std::max(a[i], b[i]));
  return GrayImage(img.width(), img.height(), std::move(out));
}

using NoiseSchedule = std::vector<NoiseSpec>;

/// One output per step. Each step draws a fresh field from a sub-seed split
/// off SplitMix64(seed); by default every step noises the original image,
/// with `cumulative` each step noises the previous step's output instead.
inline std::vector<GrayImage> run_schedule(const GrayImage& img, const NoiseSchedule& sched,
                                           std::uint64_t seed, bool cumulative = false) {
  if (sched.empty()) throw std::invalid_argument("noise schedule must be non-empty");
  for (const auto& s : sched) validate(s);
  SplitMix64 root(seed);
  std::vector<GrayImage> out;
  out.reserve(sched.size());
  for (const auto& spec : sched) {
    const std::uint64_t sub = root.next();
    const GrayImage& base = cumulative && !out.empty() ? out.back() : img;
    const GrayImage noise = gen_noise_field(img.width(), img.height(), spec, sub);
    out.push_back(blend(base, noise, blend_alpha(spec)));
  }
  return out;
}

/// Uniform blends at evenly spaced alphas from `lo` to `hi`.
inline NoiseSchedule uniform_schedule(std::size_t steps = 5, double lo = 0.2, double hi = 0.9) {
  NoiseSchedule s;
  for (std::size_t i = 0; i < steps; ++i)
    s.push_back(UniformBlend{steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1)});
  return s;
}

/// Power masks at progressively sharper shapes.
inline NoiseSchedule power_schedule(const std::vector<double>& shapes = {0.8, 0.6, 0.4, 0.2, 0.01},
                                    double alpha = 0.75) {
  NoiseSchedule s;
  for (double a : shapes) s.push_back(PowerMask{a, alpha});
  return s;
}

struct ImageStats {
  double mean;
  double variance;  // population variance
  std::array<std::size_t, 256> histogram;
};

inline ImageStats image_stats(const GrayImage& img) {
  const auto& px = img.pixels();
  const double n = static_cast<double>(px.size());
  double sum = 0.0;
  for (double p : px) sum += p;
  const double mean = sum / n;
  double ss = 0.0;
  ImageStats st{mean, 0.0, {}};
  for (double p : px) {
    ss += (p - mean) * (p - mean);
    const auto bin = std::min<std::size_t>(255, static_cast<std::size_t>(p * 256.0));
    ++st.histogram[bin];
  }
  st.variance = ss / n;
  return st;
}

// --- PGM ---------------------------------------------------------------------

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void write_pgm(std::ostream& os, const GrayImage& img, bool ascii = false) {
  os << (ascii ? "P2" : "P5") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
  if (ascii) {
    for (std::size_t y = 0; y < img.height(); ++y) {
      for (std::size_t x = 0; x < img.width(); ++x) {
        if (x) os << ' ';
        os << static_cast<int>(quantize(img.at(x, y)));
      }
      os << '\n';
    }
  } else {
    for (double p : img.pixels()) os.put(static_cast<char>(quantize(p)));
  }
}

namespace detail {

inline void skip_space_and_comments(std::istream& is) {
  for (;;) {
    const int c = is.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(is, ignored);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      is.get();
    } else {
      return;
    }
  }
}

inline long read_header_int(std::istream& is, const char* what) {
  skip_space_and_comments(is);
  long v = -1;
  if (!(is >> v) || v < 0) throw std::invalid_argument(std::string("PNM: bad ") + what);
  return v;
}

}  // namespace detail

/// Reads P2/P5 grayscale, and P3/P6 color converted by Rec. 601 luminance.
/// Values are scaled by 1/maxval.
inline GrayImage read_pnm(std::istream& is) {
  char magic[2] = {0, 0};
  if (!is.read(magic, 2) || magic[0] != 'P') throw std::invalid_argument("PNM: missing magic number");
  const char kind = magic[1];
  if (kind != '2' && kind != '5' && kind != '3' && kind != '6')
    throw std::invalid_argument(std::string("PNM: unsupported format P") + kind);
  const bool color = kind == '3' || kind == '6';
  const bool binary = kind == '5' || kind == '6';

  const long w = detail::read_header_int(is, "width");
  const long h = detail::read_header_int(is, "height");
  const long maxval = detail::read_header_int(is, "maxval");
  if (w == 0 || h == 0) throw std::invalid_argument("PNM: empty image");
  if (maxval < 1 || maxval > 255) throw std::invalid_argument("PNM: only maxval 1..255 is supported");
  if (binary) is.get();  // single whitespace before the raster

  const std::size_t channels = color ? 3 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<double> raw(n * channels);
  for (auto& v : raw) {
    long s = 0;
    if (binary) {
      const int c = is.get();
      if (c == EOF) throw std::invalid_argument("PNM: truncated raster");
      s = c;
    } else {
      detail::skip_space_and_comments(is);
      if (!(is >> s)) throw std::invalid_argument("PNM: truncated raster");
    }
    if (s > maxval) throw std::invalid_argument("PNM: sample exceeds maxval");
    v = static_cast<double>(s) / static_cast<double>(maxval);
  }
  if (!color) return GrayImage(static_cast<std::size_t>(w), static_cast<std::size_t>(h), std::move(raw));

  std::vector<double> gray(n);
  for (std::size_t i = 0; i < n; ++i)
    gray[i] = std::clamp(0.299 * raw[3 * i] + 0.587 * raw[3 * i + 1] + 0.114 * raw[3 * i + 2], 0.0, 1.0);
  return GrayImage(static_cast<std::size_t>(w), static_cast<std::size_t>(h), std::move(gray));
}

/// Diagonal gradient test card, for runs without an input image.
inline GrayImage gradient_image(std::size_t w, std::size_t h) {
  std::vector<double> px(w * h);
  const double denom = static_cast<double>(w + h > 2 ? w + h - 2 : 1);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) px[y * w + x] = static_cast<double>(x + y) / denom;
  return GrayImage(w, h, std::move(px));
}

}  // namespace egrt::diffusion
