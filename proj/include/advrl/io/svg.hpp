#pragma once

#include <string>
#include <utility>
#include <vector>

#include "advrl/io/csv.hpp"

namespace advrl {

struct PlotSeries {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

struct PlotPanel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

/// Side-by-side line-chart panels in one standalone SVG document. Panels with
/// no data still get axes.
std::string render_svg(const std::vector<PlotPanel>& panels, const std::string& title);

/// Rolling-mean learning curves from an episodes.csv table: one panel per
/// exploration variant, one line per run, colored by attack probability.
std::string training_curves_svg(const CsvTable& episodes);

/// Mean evaluation return against attack probability from an evals.csv table:
/// one panel per variant, one line per (checkpoint, condition).
std::string evaluations_svg(const CsvTable& evals);

}  // namespace advrl
