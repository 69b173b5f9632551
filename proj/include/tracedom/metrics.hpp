#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "tracedom/error.hpp"
#include "tracedom/image.hpp"

namespace tracedom {

/// Tier-1 visual comparison of two screenshots.
struct VisualMetrics {
  double phash_similarity = 1.0;   // [0, 1], 1 = identical hash
  double ssim = 1.0;               // [-1, 1]
  double pixel_change_ratio = 0.0; // [0, 1]

  friend bool operator==(const VisualMetrics&, const VisualMetrics&) = default;
};

/// Pixels whose largest per-channel delta exceeds this count as changed.
inline constexpr int kPixelChangeDelta = 8;
/// Side of the square SSIM window.
inline constexpr int kSsimWindow = 8;

namespace detail {

inline void require_nonempty(const Image& a, const Image& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::ZeroAreaImage, "metric input has zero area");
}

// Summed-area table with a zero border: (w+1) x (h+1).
template <typename T, typename F>
std::vector<T> integral(int w, int h, F value) {
  std::vector<T> s(static_cast<std::size_t>(w + 1) * (h + 1), T{0});
  for (int y = 0; y < h; ++y) {
    T row = 0;
    for (int x = 0; x < w; ++x) {
      row += value(x, y);
      s[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] = s[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
    }
  }
  return s;
}

template <typename T>
T box_sum(const std::vector<T>& s, int w, int x0, int y0, int x1, int y1) {
  const auto W = static_cast<std::size_t>(w + 1);
  return s[y1 * W + x1] - s[y0 * W + x1] - s[y1 * W + x0] + s[y0 * W + x0];
}

inline const std::array<double, 32 * 32>& dct_matrix_32() {
  static const auto m = [] {
    std::array<double, 32 * 32> c{};
    const double n = 32.0;
    for (int x = 0; x < 32; ++x) c[x] = 1.0 / std::sqrt(n);
    const double c1 = std::sqrt(2.0 / n);
    for (int u = 1; u < 32; ++u) {
      for (int x = 0; x < 32; ++x) c[u * 32 + x] = c1 * std::cos(std::numbers::pi / 2.0 / n * u * (2 * x + 1));
    }
    return c;
  }();
  return m;
}

}  // namespace detail

/// 64-bit DCT perceptual hash: luma, 7x7 mean filter, area-resample to
/// 32x32, 2-D DCT-II, then the 8x8 block of lowest non-DC frequencies
/// thresholded against its median.
inline std::uint64_t perceptual_hash(const Image& image) {
  if (image.empty()) throw Error(ErrorCode::ZeroAreaImage, "cannot hash a zero-area image");
  const int w = image.width;
  const int h = image.height;
  const auto y = luma(image);
  const auto sat = detail::integral<std::int64_t>(w, h, [&](int x, int yy) { return y[static_cast<std::size_t>(yy) * w + x]; });

  // 7x7 mean filter, window clipped at the borders.
  std::vector<double> filtered(static_cast<std::size_t>(w) * h);
  for (int yy = 0; yy < h; ++yy) {
    const int y0 = std::max(0, yy - 3), y1 = std::min(h, yy + 4);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - 3), x1 = std::min(w, x + 4);
      const auto sum = detail::box_sum(sat, w, x0, y0, x1, y1);
      filtered[static_cast<std::size_t>(yy) * w + x] = static_cast<double>(sum) / ((x1 - x0) * (y1 - y0));
    }
  }

  // Area resample to 32x32.
  std::array<double, 32 * 32> small{};
  for (int j = 0; j < 32; ++j) {
    const int sy0 = j * h / 32;
    const int sy1 = std::max(sy0 + 1, (j + 1) * h / 32);
    for (int i = 0; i < 32; ++i) {
      const int sx0 = i * w / 32;
      const int sx1 = std::max(sx0 + 1, (i + 1) * w / 32);
      double acc = 0.0;
      for (int yy = sy0; yy < sy1; ++yy)
        for (int x = sx0; x < sx1; ++x) acc += filtered[static_cast<std::size_t>(yy) * w + x];
      small[j * 32 + i] = acc / ((sx1 - sx0) * (sy1 - sy0));
    }
  }
  // Removing the mean leaves every non-DC coefficient unchanged and makes a
  // flat image transform to exact zeros.
  double mean = 0.0;
  for (double v : small) mean += v;
  mean /= small.size();
  for (double& v : small) v -= mean;

  const auto& c = detail::dct_matrix_32();
  // coeff(u, v) = sum_y sum_x C[u][y] * small[y][x] * C[v][x], for u, v in 1..8
  std::array<double, 8 * 32> rows{};
  for (int u = 1; u <= 8; ++u) {
    for (int x = 0; x < 32; ++x) {
      double acc = 0.0;
      for (int yy = 0; yy < 32; ++yy) acc += c[u * 32 + yy] * small[yy * 32 + x];
      rows[(u - 1) * 32 + x] = acc;
    }
  }
  std::array<double, 64> coeffs{};
  for (int u = 0; u < 8; ++u) {
    for (int v = 1; v <= 8; ++v) {
      double acc = 0.0;
      for (int x = 0; x < 32; ++x) acc += rows[u * 32 + x] * c[v * 32 + x];
      coeffs[u * 8 + (v - 1)] = acc;
    }
  }
  auto sorted = coeffs;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[31] + sorted[32]);
  std::uint64_t hash = 0;
  for (int i = 0; i < 64; ++i) {
    if (coeffs[i] > median) hash |= std::uint64_t{1} << i;
  }
  return hash;
}

inline double hash_similarity(std::uint64_t a, std::uint64_t b) {
  return 1.0 - static_cast<double>(std::popcount(a ^ b)) / 64.0;
}

inline double compute_phash_similarity(const Image& a, const Image& b) {
  detail::require_nonempty(a, b);
  return hash_similarity(perceptual_hash(a), perceptual_hash(b));
}

/// Mean SSIM over every 8x8 window (stride 1) of the integer luma planes.
/// `b` is resampled to `a`'s size when they differ. Window sums are exact
/// integers, so an image compared with itself scores exactly 1.
inline double compute_ssim(const Image& a, const Image& b_in) {
  detail::require_nonempty(a, b_in);
  const Image b = resize_bilinear(b_in, a.width, a.height);
  const int w = a.width;
  const int h = a.height;
  const auto la = luma(a);
  const auto lb = luma(b);
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  const auto sa = detail::integral<std::int64_t>(w, h, [&](int x, int y) { return la[idx(x, y)]; });
  const auto sb = detail::integral<std::int64_t>(w, h, [&](int x, int y) { return lb[idx(x, y)]; });
  const auto saa = detail::integral<std::int64_t>(w, h, [&](int x, int y) { return la[idx(x, y)] * la[idx(x, y)]; });
  const auto sbb = detail::integral<std::int64_t>(w, h, [&](int x, int y) { return lb[idx(x, y)] * lb[idx(x, y)]; });
  const auto sab = detail::integral<std::int64_t>(w, h, [&](int x, int y) { return la[idx(x, y)] * lb[idx(x, y)]; });

  const int ww = std::min(kSsimWindow, w);
  const int wh = std::min(kSsimWindow, h);
  const double n = static_cast<double>(ww) * wh;
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const double c1n = c1 * n * n;
  const double c2n = c2 * n * n;
  const auto N = static_cast<std::int64_t>(ww) * wh;

  double total = 0.0;
  std::size_t windows = 0;
  for (int y = 0; y + wh <= h; ++y) {
    for (int x = 0; x + ww <= w; ++x) {
      const auto A = detail::box_sum(sa, w, x, y, x + ww, y + wh);
      const auto B = detail::box_sum(sb, w, x, y, x + ww, y + wh);
      const auto AA = detail::box_sum(saa, w, x, y, x + ww, y + wh);
      const auto BB = detail::box_sum(sbb, w, x, y, x + ww, y + wh);
      const auto AB = detail::box_sum(sab, w, x, y, x + ww, y + wh);
      // Everything scaled by N^2 so the moments stay integral.
      const auto var_a = N * AA - A * A;
      const auto var_b = N * BB - B * B;
      const auto cov = N * AB - A * B;
      const double num = (2.0 * static_cast<double>(A * B) + c1n) * (2.0 * static_cast<double>(cov) + c2n);
      const double den = (static_cast<double>(A * A + B * B) + c1n) * (static_cast<double>(var_a + var_b) + c2n);
      total += num / den;
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

inline double compute_pixel_change_ratio(const Image& a, const Image& b_in) {
  detail::require_nonempty(a, b_in);
  const Image b = resize_bilinear(b_in, a.width, a.height);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    const auto* p = a.rgb.data() + 3 * i;
    const auto* q = b.rgb.data() + 3 * i;
    int delta = 0;
    for (int c = 0; c < 3; ++c) delta = std::max(delta, std::abs(int{p[c]} - int{q[c]}));
    if (delta > kPixelChangeDelta) ++changed;
  }
  return static_cast<double>(changed) / static_cast<double>(a.pixel_count());
}

inline VisualMetrics compute_visual_metrics(const Image& a, const Image& b) {
  return {compute_phash_similarity(a, b), compute_ssim(a, b), compute_pixel_change_ratio(a, b)};
}

}  // namespace tracedom
