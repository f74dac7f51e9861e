// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "psl/common/errors.hpp"

namespace psl::metrics {
namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_taps(std::size_t n) {
  std::vector<double> w(n);
  const double centre = (static_cast<double>(n) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - centre;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

// Separable 'valid' filtering of one plane.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::vector<double>& th, const std::vector<double>& tw) {
  const std::size_t oh = h - th.size() + 1;
  const std::size_t ow = w - tw.size() + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < tw.size(); ++k) acc += tw[k] * img[r * w + c + k];
      rows[r * ow + c] = acc;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < th.size(); ++k) acc += th[k] * rows[(r + k) * ow + c];
      out[r * ow + c] = acc;
    }
  }
  return out;
}

double ssim_plane(const double* x, const double* y, std::size_t h, std::size_t w) {
  const auto th = gaussian_taps(std::min(kWindow, h));
  const auto tw = gaussian_taps(std::min(kWindow, w));
  const std::size_t n = h * w;
  std::vector<double> vx(x, x + n), vy(y, y + n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(vx, h, w, th, tw);
  const auto my = filter_valid(vy, h, w, th, tw);
  const auto sxx = filter_valid(xx, h, w, th, tw);
  const auto syy = filter_valid(yy, h, w, th, tw);
  const auto sxy = filter_valid(xy, h, w, th, tw);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vxv = sxx[i] - mx[i] * mx[i];
    const double vyv = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + kC1) * (vxv + vyv + kC2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

// Pairwise Euclidean distances between rows.
std::vector<double> distances(const nn::Tensor& t, std::size_t n) {
  const std::size_t d = t.size() / n;
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = t[i * d + k] - t[j * d + k];
        s += diff * diff;
      }
      out[i * n + j] = out[j * n + i] = std::sqrt(s);
    }
  }
  return out;
}

struct Marginals {
  std::vector<double> row;
  double grand = 0.0;
};

Marginals marginals(const std::vector<double>& a, std::size_t n) {
  Marginals m;
  m.row.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m.row[i] += a[i * n + j];
    m.row[i] /= static_cast<double>(n);
    m.grand += m.row[i];
  }
  m.grand /= static_cast<double>(n);
  return m;
}

// Squared distance covariance via the identity
// (1/n^2) sum a_ij b_ij - (2/n) sum a_i. b_i. + a.. b..
double dcov2(const std::vector<double>& a, const Marginals& ma, const std::vector<double>& b,
             const Marginals& mb, std::size_t n) {
  const double nn = static_cast<double>(n);
  double cross = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) cross += a[i] * b[i];
  double rows = 0.0;
  for (std::size_t i = 0; i < n; ++i) rows += ma.row[i] * mb.row[i];
  return cross / (nn * nn) - 2.0 * rows / nn + ma.grand * mb.grand;
}

}  // namespace

double ssim(const nn::Tensor& reference, const nn::Tensor& candidate) {
  if (reference.shape() != candidate.shape()) {
    throw ShapeError("ssim: " + nn::shape_to_string(reference.shape()) + " vs " +
                     nn::shape_to_string(candidate.shape()));
  }
  std::size_t c = 1, h = 1, w = 1;
  switch (reference.rank()) {
    case 1: w = reference.dim(0); break;
    case 2: h = reference.dim(0); w = reference.dim(1); break;
    case 3: c = reference.dim(0); h = reference.dim(1); w = reference.dim(2); break;
    default: throw ShapeError("ssim expects [L], [H,W] or [C,H,W]");
  }
  if (reference.size() == 0) throw ShapeError("ssim of empty images");
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    total += ssim_plane(reference.data() + ch * h * w, candidate.data() + ch * h * w, h, w);
  }
  return total / static_cast<double>(c);
}

double mse(const nn::Tensor& reference, const nn::Tensor& candidate) {
  if (reference.shape() != candidate.shape()) throw ShapeError("mse: shape mismatch");
  if (reference.size() == 0) throw ShapeError("mse of empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - candidate[i];
    s += d * d;
  }
  return s / static_cast<double>(reference.size());
}

double distance_correlation(const nn::Tensor& x, const nn::Tensor& y) {
  if (x.rank() == 0 || y.rank() == 0) throw ShapeError("distance_correlation: empty input");
  const std::size_t n = x.dim(0);
  if (y.dim(0) != n) throw ShapeError("distance_correlation: sample counts differ");
  if (n < 2) throw DomainError("distance_correlation needs at least 2 samples");
  const auto a = distances(x, n);
  const auto b = distances(y, n);
  const auto ma = marginals(a, n);
  const auto mb = marginals(b, n);
  const double vx = dcov2(a, ma, a, ma, n);
  const double vy = dcov2(b, mb, b, mb, n);
  if (!(vx > 0.0) || !(vy > 0.0)) return 0.0;
  const double cxy = std::max(0.0, dcov2(a, ma, b, mb, n));
  return std::min(1.0, std::sqrt(cxy / std::sqrt(vx * vy)));
}

double dtw(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("dtw of an empty series");
  std::vector<double> prev(b.size()), cur(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double cost = std::abs(a[i] - b[j]);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else if (i == 0) {
        best = cur[j - 1];
      } else if (j == 0) {
        best = prev[j];
      } else {
        best = std::min({prev[j], cur[j - 1], prev[j - 1]});
      }
      cur[j] = cost + best;
    }
    std::swap(prev, cur);
  }
  return prev.back();
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

double accuracy(const nn::Tensor& logits, std::span<const nn::Label> labels) {
  if (logits.rank() != 2) throw ShapeError("accuracy expects [batch, classes] logits");
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  if (n == 0) throw DomainError("accuracy of an empty batch");
  if (labels.size() != n) throw ShapeError("accuracy: label count does not match batch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    correct += argmax(std::span<const double>(logits.data() + i * k, k)) == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace psl::metrics
