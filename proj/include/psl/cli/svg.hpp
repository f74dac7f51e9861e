// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace psl::cli {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Bar {
  std::string label;
  double value = 0.0;
};

// Standalone SVG documents; no scripts, no external fonts.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series);
std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<Bar>& bars);

std::string xml_escape(const std::string& s);

}  // namespace psl::cli
