// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>

#include "psl/common/errors.hpp"
#include "psl/common/rng.hpp"
#include "psl/data/dataset.hpp"

namespace psl::data {
namespace {

// Circular Gaussian filter along one axis of length n. Taps that wrap more
// than once are folded, so the filter is exact for any n.
std::vector<double> circular_kernel(std::size_t n, double sigma) {
  std::vector<double> k(n, 0.0);
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
  double total = 0.0;
  for (long t = -radius; t <= radius; ++t) total += std::exp(-0.5 * (t * t) / (sigma * sigma));
  const auto ln = static_cast<long>(n);
  for (long t = -radius; t <= radius; ++t) {
    const auto j = static_cast<std::size_t>(((t % ln) + ln) % ln);
    k[j] += std::exp(-0.5 * (t * t) / (sigma * sigma)) / total;
  }
  return k;
}

// Blur each [H,W] plane of `field` in place and rescale so white unit noise
// comes out with unit variance again.
void smooth_planes(std::vector<double>& field, std::size_t planes, std::size_t h, std::size_t w,
                   double sigma) {
  const auto kh = circular_kernel(h, sigma);
  const auto kw = circular_kernel(w, sigma);
  double nh = 0.0, nw = 0.0;
  for (double v : kh) nh += v * v;
  for (double v : kw) nw += v * v;
  const double scale = 1.0 / std::sqrt(nh * nw);
  std::vector<double> tmp(h * w);
  for (std::size_t p = 0; p < planes; ++p) {
    double* f = field.data() + p * h * w;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w; ++j) acc += kw[j] * f[r * w + (c + w - j) % w];
        tmp[r * w + c] = acc;
      }
    }
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < h; ++j) acc += kh[j] * tmp[((r + h - j) % h) * w + c];
        f[r * w + c] = acc * scale;
      }
    }
  }
}

std::vector<double> gaussian_field(Rng& rng, std::size_t dims, const nn::Shape& shape,
                                   double smoothness) {
  std::vector<double> v(dims);
  for (auto& x : v) x = rng.normal();
  if (smoothness > 0.0 && shape.size() == 3) smooth_planes(v, shape[0], shape[1], shape[2], smoothness);
  return v;
}

}  // namespace

Dataset synth_classification(std::size_t samples, std::size_t classes,
                             const nn::Shape& sample_shape, std::uint64_t seed,
                             const ClassificationSynth& options, std::uint64_t stream) {
  if (classes == 0 || samples < classes) {
    throw DomainError("synth_classification needs samples >= classes > 0");
  }
  if (sample_shape.empty()) throw ShapeError("synth_classification: empty sample shape");
  if (!(options.noise >= 0.0) || !(options.separation >= 0.0) || !(options.smoothness >= 0.0)) {
    throw DomainError("synth_classification: options must be non-negative");
  }
  const std::size_t dims = nn::shape_size(sample_shape);

  std::vector<std::vector<double>> means;
  for (std::size_t c = 0; c < classes; ++c) {
    Rng rng(derive_seed(seed, {0x6d65616e, c}));
    means.push_back(gaussian_field(rng, dims, sample_shape, options.smoothness));
  }

  nn::Shape shape{samples};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  nn::Tensor x(shape);
  std::vector<Label> y(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t c = i % classes;
    y[i] = static_cast<Label>(c);
    Rng rng(derive_seed(seed, {0x6e6f6973, stream, i}));
    const auto eps = gaussian_field(rng, dims, sample_shape, options.smoothness);
    double* row = x.data() + i * dims;
    for (std::size_t d = 0; d < dims; ++d) {
      const double z = options.separation * means[c][d] + options.noise * eps[d];
      row[d] = std::clamp(0.5 + z / 6.0, 0.0, 1.0);
    }
  }
  return Dataset(std::move(x), std::move(y), classes);
}

Dataset synth_series(std::size_t samples, std::size_t classes, std::size_t length,
                     std::uint64_t seed, const SeriesSynth& options, std::uint64_t stream) {
  if (length < 8) throw DomainError("synth_series needs length >= 8");
  if (classes == 0 || samples < classes) throw DomainError("synth_series needs samples >= classes > 0");
  if (!(options.noise >= 0.0)) throw DomainError("synth_series: noise must be non-negative");

  const double len = static_cast<double>(length);
  const double width = len / (4.0 * static_cast<double>(classes));
  std::vector<std::vector<double>> templates(classes, std::vector<double>(length));
  for (std::size_t c = 0; c < classes; ++c) {
    const double freq = static_cast<double>(c + 1);
    const double centre = (static_cast<double>(c) + 0.5) / static_cast<double>(classes) * len;
    for (std::size_t t = 0; t < length; ++t) {
      const double tt = static_cast<double>(t);
      const double d = (tt - centre) / width;
      templates[c][t] = 0.5 + 0.2 * std::sin(2.0 * std::numbers::pi * freq * tt / len) +
                        0.3 * std::exp(-0.5 * d * d);
    }
  }

  nn::Tensor x({samples, 1, length});
  std::vector<Label> y(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t c = i % classes;
    y[i] = static_cast<Label>(c);
    Rng rng(derive_seed(seed, {0x73657269, stream, i}));
    for (std::size_t t = 0; t < length; ++t) {
      x[i * length + t] = std::clamp(templates[c][t] + options.noise * rng.normal(), 0.0, 1.0);
    }
  }
  return Dataset(std::move(x), std::move(y), classes);
}

}  // namespace psl::data
