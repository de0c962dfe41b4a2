#include "poststrat/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "poststrat/csv.hpp"
#include "poststrat/stats.hpp"

namespace poststrat {

std::vector<SummaryRecord> read_summary_csv(std::istream& in) {
  CsvTable table = read_csv(in);
  const char* required[] = {"condition",    "p_nb_male",  "representation",
                            "method",       "estimator",  "target",
                            "mean_bias",    "bias_q025",  "bias_q975",
                            "mean_width",   "width_q025", "width_q975",
                            "n_effective_replicates"};
  std::vector<int> cols;
  for (const char* name : required) {
    int c = table.column(name);
    if (c < 0) throw CsvError(1, std::string("missing column '") + name + "'");
    cols.push_back(c);
  }
  std::vector<SummaryRecord> rows;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& fields = table.rows[r];
    const int line = table.line_numbers[r];
    SummaryRecord rec;
    try {
      rec.condition = parse_condition_label(fields[static_cast<std::size_t>(cols[0])]);
      rec.representation = parse_representation(fields[static_cast<std::size_t>(cols[2])]);
      rec.method = parse_method(fields[static_cast<std::size_t>(cols[3])]);
      rec.estimator = parse_estimator(fields[static_cast<std::size_t>(cols[4])]);
      rec.target = parse_target(fields[static_cast<std::size_t>(cols[5])]);
    } catch (const std::invalid_argument& e) {
      throw CsvError(line, e.what());
    }
    rec.p_nb_male = parse_csv_double(fields[static_cast<std::size_t>(cols[1])], line);
    rec.mean_bias = parse_csv_double(fields[static_cast<std::size_t>(cols[6])], line);
    rec.bias_q025 = parse_csv_double(fields[static_cast<std::size_t>(cols[7])], line);
    rec.bias_q975 = parse_csv_double(fields[static_cast<std::size_t>(cols[8])], line);
    rec.mean_width = parse_csv_double(fields[static_cast<std::size_t>(cols[9])], line);
    rec.width_q025 = parse_csv_double(fields[static_cast<std::size_t>(cols[10])], line);
    rec.width_q975 = parse_csv_double(fields[static_cast<std::size_t>(cols[11])], line);
    rec.n_effective_replicates = static_cast<int>(
        parse_csv_double(fields[static_cast<std::size_t>(cols[12])], line));
    rows.push_back(rec);
  }
  return rows;
}

namespace {

struct Metric {
  const char* name;
  double point(const SummaryRecord& r) const {
    return std::string(name) == "bias" ? r.mean_bias : r.mean_width;
  }
  double lo(const SummaryRecord& r) const {
    return std::string(name) == "bias" ? r.bias_q025 : r.width_q025;
  }
  double hi(const SummaryRecord& r) const {
    return std::string(name) == "bias" ? r.bias_q975 : r.width_q975;
  }
  bool include_zero() const { return std::string(name) == "bias"; }
};

const char* representation_color(Representation r) {
  return r == Representation::Under ? "#1f77b4" : "#d62728";
}

std::string svg_num(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string tick_label(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

struct PanelGeometry {
  double x0, y0, width, height;
};

/// Renders one figure: panels laid out rows = p values, columns = estimators;
/// within a panel, methods stack vertically with a point at the metric mean
/// and a segment over the quantile span, colored by representation.
std::string render_svg(const std::vector<SummaryRecord>& rows,
                       ConditionLabel condition, const Metric& metric,
                       const std::vector<double>& p_values,
                       const std::vector<Estimator>& estimators,
                       const std::vector<HarmonizationMethodKind>& methods,
                       Target target) {
  const double left = 150, top = 56, hgap = 24, vgap = 18;
  const double panel_w = 300;
  const double row_h = 22;
  const double panel_h = row_h * static_cast<double>(methods.size()) + 12;
  const double width =
      left + (panel_w + hgap) * static_cast<double>(estimators.size()) + 100;
  const double height =
      top + (panel_h + vgap) * static_cast<double>(p_values.size()) + 46;

  double vmin = metric.include_zero() ? 0.0 : std::numeric_limits<double>::max();
  double vmax = metric.include_zero() ? 0.0 : std::numeric_limits<double>::lowest();
  for (const auto& r : rows) {
    vmin = std::min(vmin, metric.lo(r));
    vmax = std::max(vmax, metric.hi(r));
  }
  if (!(vmax > vmin)) {
    vmin -= 1.0;
    vmax += 1.0;
  }
  const double pad = 0.05 * (vmax - vmin);
  vmin -= pad;
  vmax += pad;

  auto scale_x = [&](const PanelGeometry& g, double v) {
    return g.x0 + (v - vmin) / (vmax - vmin) * g.width;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(width)
      << "\" height=\"" << svg_num(height) << "\" font-family=\"sans-serif\">\n";
  svg << "<text x=\"" << svg_num(left) << "\" y=\"22\" font-size=\"15\">"
      << to_string(condition) << " / " << metric.name << " / "
      << target_name(target) << "</text>\n";

  const double tick_step = (vmax - vmin) / 4.0;

  for (std::size_t pr = 0; pr < p_values.size(); ++pr) {
    for (std::size_t ec = 0; ec < estimators.size(); ++ec) {
      PanelGeometry g{left + (panel_w + hgap) * static_cast<double>(ec),
                      top + (panel_h + vgap) * static_cast<double>(pr), panel_w,
                      panel_h};
      svg << "<rect x=\"" << svg_num(g.x0) << "\" y=\"" << svg_num(g.y0)
          << "\" width=\"" << svg_num(g.width) << "\" height=\""
          << svg_num(g.height) << "\" fill=\"none\" stroke=\"#888\"/>\n";
      if (pr == 0) {
        svg << "<text x=\"" << svg_num(g.x0 + g.width / 2) << "\" y=\""
            << svg_num(top - 10) << "\" font-size=\"12\" text-anchor=\"middle\">"
            << to_string(estimators[ec]) << "</text>\n";
      }
      if (ec + 1 == estimators.size()) {
        svg << "<text x=\"" << svg_num(g.x0 + g.width + 8) << "\" y=\""
            << svg_num(g.y0 + g.height / 2) << "\" font-size=\"11\">p = "
            << tick_label(p_values[pr]) << "</text>\n";
      }
      if (metric.include_zero() && vmin < 0.0 && vmax > 0.0) {
        double zx = scale_x(g, 0.0);
        svg << "<line x1=\"" << svg_num(zx) << "\" y1=\"" << svg_num(g.y0)
            << "\" x2=\"" << svg_num(zx) << "\" y2=\"" << svg_num(g.y0 + g.height)
            << "\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n";
      }
      // Ticks on the bottom row of panels.
      if (pr + 1 == p_values.size()) {
        for (int t = 0; t <= 4; ++t) {
          double v = vmin + tick_step * t;
          double tx = scale_x(g, v);
          svg << "<line x1=\"" << svg_num(tx) << "\" y1=\""
              << svg_num(g.y0 + g.height) << "\" x2=\"" << svg_num(tx)
              << "\" y2=\"" << svg_num(g.y0 + g.height + 4)
              << "\" stroke=\"#888\"/>\n";
          svg << "<text x=\"" << svg_num(tx) << "\" y=\""
              << svg_num(g.y0 + g.height + 16)
              << "\" font-size=\"10\" text-anchor=\"middle\">" << tick_label(v)
              << "</text>\n";
        }
      }
      // Method labels on the leftmost column.
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        double cy = g.y0 + row_h * (static_cast<double>(mi) + 0.5) + 6;
        if (ec == 0) {
          svg << "<text x=\"" << svg_num(left - 8) << "\" y=\"" << svg_num(cy + 3)
              << "\" font-size=\"10\" text-anchor=\"end\">"
              << method_name(methods[mi]) << "</text>\n";
        }
        for (const auto& r : rows) {
          if (r.p_nb_male != p_values[pr] || r.estimator != estimators[ec] ||
              r.method != methods[mi]) {
            continue;
          }
          double offset = r.representation == Representation::Under ? -3.0 : 3.0;
          double y = cy + offset;
          const char* color = representation_color(r.representation);
          svg << "<line x1=\"" << svg_num(scale_x(g, metric.lo(r))) << "\" y1=\""
              << svg_num(y) << "\" x2=\"" << svg_num(scale_x(g, metric.hi(r)))
              << "\" y2=\"" << svg_num(y) << "\" stroke=\"" << color
              << "\" stroke-width=\"1.4\"/>\n";
          svg << "<circle cx=\"" << svg_num(scale_x(g, metric.point(r)))
              << "\" cy=\"" << svg_num(y) << "\" r=\"2.6\" fill=\"" << color
              << "\"/>\n";
        }
      }
    }
  }
  // Legend.
  double ly = height - 14;
  double lx = left;
  for (Representation rep : {Representation::Under, Representation::Over}) {
    svg << "<circle cx=\"" << svg_num(lx) << "\" cy=\"" << svg_num(ly - 3)
        << "\" r=\"3\" fill=\"" << representation_color(rep) << "\"/>\n";
    svg << "<text x=\"" << svg_num(lx + 8) << "\" y=\"" << svg_num(ly)
        << "\" font-size=\"11\">" << to_string(rep) << "-represented</text>\n";
    lx += 150;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_table(const std::vector<SummaryRecord>& rows,
                         const Metric& metric) {
  std::ostringstream out;
  out << std::left << std::setw(20) << "method" << std::setw(16) << "estimator"
      << std::setw(8) << "p" << std::setw(7) << "repr" << std::right
      << std::setw(11) << "mean" << std::setw(11) << "q025" << std::setw(11)
      << "q975" << std::setw(6) << "n" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << std::left << std::setw(20) << method_name(r.method) << std::setw(16)
        << to_string(r.estimator) << std::setw(8) << r.p_nb_male << std::setw(7)
        << to_string(r.representation) << std::right << std::setw(11)
        << metric.point(r) << std::setw(11) << metric.lo(r) << std::setw(11)
        << metric.hi(r) << std::setw(6) << r.n_effective_replicates << '\n';
  }
  return out.str();
}

}  // namespace

std::vector<std::string> write_report(const std::vector<SummaryRecord>& rows,
                                      const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::set<ConditionLabel> conditions;
  for (const auto& r : rows) conditions.insert(r.condition);

  std::vector<std::string> written;
  for (ConditionLabel condition : conditions) {
    // The figure grammar plots the population-mean rows; per-target tables
    // accompany each figure.
    std::vector<SummaryRecord> selected;
    std::set<double> p_set;
    std::set<int> estimator_set;
    std::set<int> method_set;
    for (const auto& r : rows) {
      if (r.condition != condition || r.target != Target::PopulationMean) continue;
      selected.push_back(r);
      p_set.insert(r.p_nb_male);
      estimator_set.insert(static_cast<int>(r.estimator));
      method_set.insert(static_cast<int>(r.method));
    }
    std::vector<double> p_values(p_set.begin(), p_set.end());
    std::vector<Estimator> estimators;
    for (Estimator e : {Estimator::Mrp, Estimator::WeightedRaking}) {
      if (estimator_set.count(static_cast<int>(e))) estimators.push_back(e);
    }
    std::vector<HarmonizationMethodKind> methods;
    for (int k = 0; k < 8; ++k) {
      if (method_set.count(k)) {
        methods.push_back(static_cast<HarmonizationMethodKind>(k));
      }
    }
    if (selected.empty()) continue;

    for (const Metric& metric : {Metric{"bias"}, Metric{"width"}}) {
      const std::string stem = to_string(condition) + "_" + metric.name;
      const fs::path svg_path = fs::path(out_dir) / (stem + ".svg");
      std::ofstream svg(svg_path);
      svg << render_svg(selected, condition, metric, p_values, estimators,
                        methods, Target::PopulationMean);
      written.push_back(svg_path.string());

      const fs::path txt_path = fs::path(out_dir) / (stem + ".txt");
      std::ofstream txt(txt_path);
      txt << render_table(selected, metric);
      written.push_back(txt_path.string());
    }
  }
  return written;
}

}  // namespace poststrat
