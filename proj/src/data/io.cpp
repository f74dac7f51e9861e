// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "psl/common/errors.hpp"
#include "psl/data/dataset.hpp"

namespace psl::data {
namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
}

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at, const char* what) {
  if (at + 4 > b.size()) throw FormatError(std::string(what) + ": truncated header");
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

std::size_t infer_classes(const std::vector<Label>& labels, std::size_t given) {
  if (given != 0) return given;
  Label top = 0;
  for (auto l : labels) top = std::max(top, l);
  return labels.empty() ? 1 : std::size_t{top} + 1;
}

}  // namespace

Dataset decode_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                   std::size_t class_count) {
  if (be32(images, 0, "idx images") != 0x00000803) throw FormatError("idx images: bad magic");
  if (be32(labels, 0, "idx labels") != 0x00000801) throw FormatError("idx labels: bad magic");
  const std::size_t n = be32(images, 4, "idx images");
  const std::size_t rows = be32(images, 8, "idx images");
  const std::size_t cols = be32(images, 12, "idx images");
  const std::size_t n_labels = be32(labels, 4, "idx labels");
  if (n != n_labels) {
    throw FormatError("idx count mismatch: " + std::to_string(n) + " images, " +
                      std::to_string(n_labels) + " labels");
  }
  const std::size_t plane = rows * cols;
  if (images.size() != 16 + n * plane) throw FormatError("idx images: payload size mismatch");
  if (labels.size() != 8 + n) throw FormatError("idx labels: payload size mismatch");

  nn::Tensor x({n, 1, rows, cols});
  for (std::size_t i = 0; i < n * plane; ++i) x[i] = images[16 + i] / 255.0;
  std::vector<Label> y(labels.begin() + 8, labels.end());
  const auto classes = infer_classes(y, class_count);
  return Dataset(std::move(x), std::move(y), classes);
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t class_count) {
  return decode_idx(read_bytes(images), read_bytes(labels), class_count);
}

Dataset parse_csv_series(const std::string& text, std::size_t class_count) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> values;
  std::vector<Label> labels;
  std::size_t length = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      auto end = line.find(',', pos);
      if (end == std::string::npos) end = line.size();
      auto first = line.data() + pos;
      auto last = line.data() + end;
      while (first < last && (*first == ' ' || *first == '\t')) ++first;
      while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
      double v = 0;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last) {
        throw FormatError("csv line " + std::to_string(line_no) + ": bad number");
      }
      row.push_back(v);
      pos = end + 1;
    }
    if (row.size() < 2) throw FormatError("csv line " + std::to_string(line_no) + ": no values");
    if (row[0] < 0 || row[0] != static_cast<double>(static_cast<Label>(row[0]))) {
      throw FormatError("csv line " + std::to_string(line_no) + ": label must be a class index");
    }
    if (length == 0) length = row.size() - 1;
    if (row.size() - 1 != length) {
      throw FormatError("csv line " + std::to_string(line_no) + ": expected " +
                        std::to_string(length) + " values");
    }
    labels.push_back(static_cast<Label>(row[0]));
    values.insert(values.end(), row.begin() + 1, row.end());
  }
  if (labels.empty()) throw FormatError("csv: no series");
  const auto classes = infer_classes(labels, class_count);
  const std::size_t n = labels.size();
  return Dataset(nn::Tensor({n, 1, length}, std::move(values)), std::move(labels), classes);
}

Dataset load_csv_series(const std::filesystem::path& path, std::size_t class_count) {
  const auto bytes = read_bytes(path);
  return parse_csv_series(std::string(bytes.begin(), bytes.end()), class_count);
}

}  // namespace psl::data
