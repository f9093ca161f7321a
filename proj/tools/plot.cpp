#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "statelab/error.hpp"

namespace statelab::cli {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
  return nice * mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& s = rows.at(row).at(col);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw ValidationError("CSV row " + std::to_string(row + 2) + ": '" + s + "' is not a number");
  }
  return v;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw ValidationError(path + ": missing CSV header");
  t.header = split_line(line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " fields");
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.rows.empty()) throw ValidationError(path + ": no data rows");
  return t;
}

std::string render_svg(const Figure& fig) {
  Range xr;
  Range yr;
  for (const auto& s : fig.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  if (fig.identity_line) {
    const double lo = std::min(xr.lo, yr.lo);
    const double hi = std::max(xr.hi, yr.hi);
    xr.lo = yr.lo = lo;
    xr.hi = yr.hi = hi;
  }
  xr.finish();
  yr.finish();
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(fig.title) << "</text>\n";
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  const double xs = nice_step(xr.hi - xr.lo);
  for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi; t += xs) {
    os << "<line x1=\"" << px(t) << "\" y1=\"" << kTop + ph << "\" x2=\"" << px(t) << "\" y2=\"" << kTop + ph + 5
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(t) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
       << fmt(std::abs(t) < xs * 1e-9 ? 0.0 : t) << "</text>\n";
  }
  const double ys = nice_step(yr.hi - yr.lo);
  for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi; t += ys) {
    os << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py(t) << "\" x2=\"" << kLeft << "\" y2=\"" << py(t)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
       << fmt(std::abs(t) < ys * 1e-9 ? 0.0 : t) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">"
     << escape(fig.x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(fig.y_label) << "</text>\n";

  if (fig.identity_line) {
    os << "<line x1=\"" << px(xr.lo) << "\" y1=\"" << py(xr.lo) << "\" x2=\"" << px(xr.hi) << "\" y2=\""
       << py(xr.hi) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (std::size_t k = 0; k < fig.series.size(); ++k) {
    const Series& s = fig.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (s.line && s.x.size() > 1) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      os << "\"/>\n";
    }
    const double radius = s.line ? 3.0 : 2.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"" << radius << "\" fill=\""
         << color << "\" fill-opacity=\"0.75\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    os << "<rect x=\"" << kLeft + pw + 12 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\""
       << color << "\"/>\n";
    os << "<text x=\"" << kLeft + pw + 28 << "\" y=\"" << ly + 1 << "\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "auto") return PlotKind::kAuto;
  if (name == "report") return PlotKind::kReport;
  if (name == "embedding") return PlotKind::kEmbedding;
  if (name == "predictions") return PlotKind::kPredictions;
  if (name == "log") return PlotKind::kTrainingLog;
  throw ValidationError("unknown plot kind '" + name + "'");
}

Figure figure_from_csv(const CsvTable& t, PlotKind kind) {
  if (kind == PlotKind::kAuto) {
    const std::string& first = t.header.front();
    if (first == "kind") {
      kind = PlotKind::kReport;
    } else if (first == "x") {
      kind = PlotKind::kEmbedding;
    } else if (first == "index") {
      kind = PlotKind::kPredictions;
    } else if (first == "epoch") {
      kind = PlotKind::kTrainingLog;
    } else {
      throw ValidationError("cannot infer the plot kind from column '" + first + "'");
    }
  }
  Figure fig;
  switch (kind) {
    case PlotKind::kReport: {
      fig.title = "Mean query fidelity by stellar rank";
      fig.x_label = "stellar rank r";
      fig.y_label = "classical fidelity";
      const auto ck = t.column("kind");
      const auto cs = t.column("split");
      const auto cr = t.column("r");
      const auto cv = t.column("value");
      std::map<std::string, Series> by_split;
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.rows[i][ck] != "rank") continue;
        Series& s = by_split[t.rows[i][cs]];
        s.name = t.rows[i][cs];
        s.line = true;
        s.x.push_back(t.number(i, cr));
        s.y.push_back(t.number(i, cv));
      }
      if (by_split.empty()) throw ValidationError("report CSV has no rank rows");
      for (auto& [name, s] : by_split) fig.series.push_back(std::move(s));
      break;
    }
    case PlotKind::kEmbedding: {
      fig.title = "t-SNE of state representations";
      fig.x_label = "t-SNE 1";
      fig.y_label = "t-SNE 2";
      const auto cx = t.column("x");
      const auto cy = t.column("y");
      const auto cf = t.column("family");
      std::map<std::string, Series> by_family;
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        Series& s = by_family[t.rows[i][cf]];
        s.name = t.rows[i][cf];
        s.x.push_back(t.number(i, cx));
        s.y.push_back(t.number(i, cy));
      }
      for (auto& [name, s] : by_family) fig.series.push_back(std::move(s));
      break;
    }
    case PlotKind::kPredictions: {
      fig.title = "Prediction vs truth";
      fig.x_label = "truth";
      fig.y_label = "prediction";
      fig.identity_line = true;
      const auto ct = t.column("truth");
      const auto cp = t.column("prediction");
      Series s;
      s.name = "test states";
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        s.x.push_back(t.number(i, ct));
        s.y.push_back(t.number(i, cp));
      }
      fig.series.push_back(std::move(s));
      break;
    }
    case PlotKind::kTrainingLog: {
      fig.title = "Training loss";
      fig.x_label = "epoch";
      fig.y_label = "loss";
      const auto ce = t.column("epoch");
      for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (c == ce || t.header[c] == "lambda_start") continue;
        Series s;
        s.name = t.header[c];
        s.line = true;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
          s.x.push_back(t.number(i, ce));
          s.y.push_back(t.number(i, c));
        }
        fig.series.push_back(std::move(s));
      }
      break;
    }
    case PlotKind::kAuto: break;
  }
  return fig;
}

}  // namespace statelab::cli
