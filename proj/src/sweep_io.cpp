#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mprg/errors.hpp"
#include "mprg/harness.hpp"
#include "mprg/numfmt.hpp"

namespace mprg {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

void write_sweep_csv(const SweepResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "m,algorithm,trial,restart,final_error\n";
  for (const SweepRow& r : result.rows)
    out << r.m << ',' << r.algorithm << ',' << r.trial << ',' << r.restart << ','
        << format_double(r.final_error) << '\n';
  out << "\nm,algorithm,mean,stderr\n";
  for (const AggregateRow& a : result.aggregates)
    out << a.m << ',' << a.algorithm << ',' << format_double(a.mean) << ','
        << format_double(a.stderr_) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

SweepResult read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  SweepResult result;
  enum { none, rows, aggregates } block = none;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "m,algorithm,trial,restart,final_error") {
      block = rows;
      continue;
    }
    if (line == "m,algorithm,mean,stderr") {
      block = aggregates;
      continue;
    }
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      if (block == rows && f.size() == 5) {
        result.rows.push_back({std::stol(f[0]), f[1], std::stoi(f[2]), std::stoi(f[3]),
                               parse_double(f[4])});
      } else if (block == aggregates && f.size() == 4) {
        AggregateRow a;
        a.m = std::stol(f[0]);
        a.algorithm = f[1];
        a.mean = parse_double(f[2]);
        a.stderr_ = parse_double(f[3]);
        result.aggregates.push_back(std::move(a));
      } else {
        throw IoError(where + ": unexpected line");
      }
    } catch (const std::logic_error&) {
      throw IoError(where + ": malformed integer field");
    } catch (const IoError& e) {
      throw IoError(std::string(e.what()).find(where) == 0 ? e.what()
                                                           : where + ": " + e.what());
    }
  }
  // Counts are not serialized; rebuild them from the rows.
  for (AggregateRow& a : result.aggregates)
    a.count = static_cast<std::size_t>(std::count_if(
        result.rows.begin(), result.rows.end(),
        [&](const SweepRow& r) { return r.m == a.m && r.algorithm == a.algorithm; }));
  result.slopes = fit_slopes(result.aggregates);
  return result;
}

std::string render_svg(const SweepResult& result) {
  if (result.aggregates.empty()) throw InvalidArgument("nothing to plot: no aggregates");

  constexpr double kWidth = 640, kHeight = 480;
  constexpr double kLeft = 70, kRight = 150, kTop = 30, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  std::set<std::string> names;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const AggregateRow& a : result.aggregates) {
    names.insert(a.algorithm);
    if (a.m <= 0 || !(a.mean > 0.0)) continue;
    const double lx = std::log10(static_cast<double>(a.m));
    xmin = std::min(xmin, lx);
    xmax = std::max(xmax, lx);
    const double lo = a.mean - a.stderr_ > 0.0 ? a.mean - a.stderr_ : a.mean;
    ymin = std::min(ymin, std::log10(lo));
    ymax = std::max(ymax, std::log10(a.mean + a.stderr_));
  }
  if (!std::isfinite(xmin)) throw InvalidArgument("nothing to plot: no positive errors");
  if (xmax - xmin < 1e-9) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-9) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto sx = [&](double lx) { return kLeft + (lx - xmin) / (xmax - xmin) * plot_w; };
  auto sy = [&](double ly) { return kTop + (ymax - ly) / (ymax - ymin) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << fixed3(kLeft) << "\" y=\"" << fixed3(kTop) << "\" width=\""
      << fixed3(plot_w) << "\" height=\"" << fixed3(plot_h)
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  // Decade ticks, plus the end points when the range spans less than a decade.
  auto ticks = [](double lo, double hi) {
    std::vector<double> t;
    for (double d = std::ceil(lo); d <= std::floor(hi); d += 1.0) t.push_back(d);
    if (t.size() < 2) t = {lo, hi};
    return t;
  };
  for (double lx : ticks(xmin, xmax)) {
    svg << "<text x=\"" << fixed3(sx(lx)) << "\" y=\"" << fixed3(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\">" << format_double(std::round(std::pow(10.0, lx) * 100) / 100)
        << "</text>\n";
  }
  for (double ly : ticks(ymin, ymax)) {
    char label[32];
    std::snprintf(label, sizeof(label), "%.3g", std::pow(10.0, ly));
    svg << "<text x=\"" << fixed3(kLeft - 6) << "\" y=\"" << fixed3(sy(ly) + 4)
        << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  svg << "<text x=\"" << fixed3(kLeft + plot_w / 2) << "\" y=\"" << fixed3(kHeight - 15)
      << "\" text-anchor=\"middle\">m (log scale)</text>\n";
  svg << "<text x=\"15\" y=\"" << fixed3(kTop + plot_h / 2) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 15 " << fixed3(kTop + plot_h / 2)
      << ")\">reconstruction error (log scale)</text>\n";

  std::size_t color = 0;
  for (const std::string& name : names) {
    const char* stroke = kPalette[color % std::size(kPalette)];
    std::vector<const AggregateRow*> pts;
    for (const AggregateRow& a : result.aggregates)
      if (a.algorithm == name && a.m > 0 && a.mean > 0.0) pts.push_back(&a);
    std::sort(pts.begin(), pts.end(),
              [](const AggregateRow* a, const AggregateRow* b) { return a->m < b->m; });

    svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) svg << ' ';
      svg << fixed3(sx(std::log10(double(pts[i]->m)))) << ','
          << fixed3(sy(std::log10(pts[i]->mean)));
    }
    svg << "\"/>\n";
    for (const AggregateRow* p : pts) {
      const double x = sx(std::log10(double(p->m)));
      const double lo = p->mean - p->stderr_ > 0.0 ? p->mean - p->stderr_ : p->mean;
      svg << "<line x1=\"" << fixed3(x) << "\" y1=\"" << fixed3(sy(std::log10(lo)))
          << "\" x2=\"" << fixed3(x) << "\" y2=\"" << fixed3(sy(std::log10(p->mean + p->stderr_)))
          << "\" stroke=\"" << stroke << "\"/>\n";
    }
    const double ly = kTop + 16 + 18 * static_cast<double>(color);
    svg << "<text x=\"" << fixed3(kLeft + plot_w + 12) << "\" y=\"" << fixed3(ly) << "\" fill=\""
        << stroke << "\">" << name << "</text>\n";
    ++color;
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_outputs(const SweepResult& result, OutputFormat format,
                  const std::filesystem::path& path) {
  if (result.rows.empty()) throw InvalidArgument("sweep result has no rows; nothing written");
  if (format == OutputFormat::csv) {
    write_sweep_csv(result, path);
    return;
  }
  const std::string svg = render_svg(result);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << svg;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace mprg
