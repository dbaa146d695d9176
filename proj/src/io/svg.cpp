#include "advrl/io/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace advrl {
namespace {

constexpr double kPanelW = 480, kPanelH = 340, kMarginL = 60, kMarginR = 20, kMarginT = 50, kMarginB = 50;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Run ids look like "<variant>_p<probability>_s<seed>".
struct RunKey {
  std::string variant;
  std::string probability;
};

RunKey parse_run_id(const std::string& id) {
  const auto p = id.rfind("_p");
  const auto s = id.rfind("_s");
  if (p == std::string::npos || s == std::string::npos || s < p) return {id, ""};
  return {id.substr(0, p), id.substr(p + 2, s - p - 2)};
}

const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

void render_panel(std::ostringstream& os, const PlotPanel& panel, double x0, double y0) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : panel.series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pw = kPanelW - kMarginL - kMarginR, ph = kPanelH - kMarginT - kMarginB;
  const double left = x0 + kMarginL, top = y0 + kMarginT;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return top + ph - (y - ymin) / (ymax - ymin) * ph; };

  os << "<g>\n";
  os << "<text x=\"" << num(x0 + kPanelW / 2) << "\" y=\"" << num(y0 + 30)
     << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(panel.title) << "</text>\n";
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"#000\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0, yv = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(top + ph + 15)
       << "\" text-anchor=\"middle\" font-size=\"10\">" << tick(xv) << "</text>\n";
    os << "<text x=\"" << num(left - 5) << "\" y=\"" << num(sy(yv) + 3)
       << "\" text-anchor=\"end\" font-size=\"10\">" << tick(yv) << "</text>\n";
  }
  os << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(top + ph + 35)
     << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(panel.x_label) << "</text>\n";
  os << "<text x=\"" << num(x0 + 15) << "\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"12\" "
     << "transform=\"rotate(-90 " << num(x0 + 15) << ' ' << num(top + ph / 2) << ")\">" << escape(panel.y_label)
     << "</text>\n";

  std::map<std::string, std::string> legend;
  for (const auto& s : panel.series) {
    legend.emplace(s.label, s.color);
    if (s.points.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1\" points=\"";
    for (const auto& [x, y] : s.points) os << num(sx(x)) << ',' << num(sy(y)) << ' ';
    os << "\"/>\n";
  }
  double ly = top + 12;
  for (const auto& [label, color] : legend) {
    os << "<rect x=\"" << num(left + pw - 110) << "\" y=\"" << num(ly - 8) << "\" width=\"10\" height=\"10\" fill=\""
       << color << "\"/>";
    os << "<text x=\"" << num(left + pw - 95) << "\" y=\"" << num(ly) << "\" font-size=\"10\">" << escape(label)
       << "</text>\n";
    ly += 14;
  }
  os << "</g>\n";
}

}  // namespace

std::string render_svg(const std::vector<PlotPanel>& panels, const std::string& title) {
  const std::size_t n = std::max<std::size_t>(1, panels.size());
  const double width = kPanelW * static_cast<double>(n), height = kPanelH + 30;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
     << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  os << "<text x=\"" << num(width / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"16\">" << escape(title)
     << "</text>\n";
  if (panels.empty()) {
    render_panel(os, PlotPanel{"", "episode", "return", {}}, 0, 20);
  } else {
    for (std::size_t i = 0; i < panels.size(); ++i) render_panel(os, panels[i], kPanelW * static_cast<double>(i), 20);
  }
  os << "</svg>\n";
  return os.str();
}

std::string training_curves_svg(const CsvTable& episodes) {
  std::vector<PlotPanel> panels;
  if (!episodes.header.empty() && !episodes.rows.empty()) {
    const auto c_run = episodes.column("run_id"), c_ep = episodes.column("episode"),
               c_roll = episodes.column("rolling_mean_100");
    std::map<std::string, std::map<std::string, PlotSeries>> by_variant;  // variant -> run -> series
    std::map<std::string, std::size_t> colors;
    for (const auto& row : episodes.rows) {
      const RunKey key = parse_run_id(row[c_run]);
      auto [it, fresh] = colors.emplace(key.probability, colors.size());
      PlotSeries& s = by_variant[key.variant][row[c_run]];
      s.label = key.probability.empty() ? row[c_run] : "p = " + key.probability;
      s.color = palette(it->second);
      s.points.emplace_back(std::stod(row[c_ep]), std::stod(row[c_roll]));
    }
    for (auto& [variant, runs] : by_variant) {
      PlotPanel panel{variant, "episode", "mean return (last 100 episodes)", {}};
      for (auto& [id, s] : runs) panel.series.push_back(std::move(s));
      panels.push_back(std::move(panel));
    }
  }
  return render_svg(panels, "Training-time attacks");
}

std::string evaluations_svg(const CsvTable& evals) {
  std::vector<PlotPanel> panels;
  if (!evals.header.empty() && !evals.rows.empty()) {
    const auto c_run = evals.column("run_id"), c_ck = evals.column("checkpoint"), c_cond = evals.column("condition"),
               c_mean = evals.column("mean_return");
    // variant -> line -> training p -> returns over seeds
    std::map<std::string, std::map<std::string, std::map<double, std::vector<double>>>> acc;
    for (const auto& row : evals.rows) {
      const RunKey key = parse_run_id(row[c_run]);
      if (key.probability.empty()) continue;
      acc[key.variant][row[c_ck] + " / " + row[c_cond]][std::stod(key.probability)].push_back(std::stod(row[c_mean]));
    }
    for (auto& [variant, lines] : acc) {
      PlotPanel panel{variant, "training attack probability p", "mean evaluation return", {}};
      std::size_t k = 0;
      for (auto& [label, points] : lines) {
        PlotSeries s{label, palette(k++), {}};
        for (auto& [p, vals] : points) {
          double sum = 0;
          for (double v : vals) sum += v;
          s.points.emplace_back(p, sum / static_cast<double>(vals.size()));
        }
        panel.series.push_back(std::move(s));
      }
      panels.push_back(std::move(panel));
    }
  }
  return render_svg(panels, "Evaluation returns");
}

}  // namespace advrl
