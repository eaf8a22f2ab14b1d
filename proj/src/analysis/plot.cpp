#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "deffx/analysis/response.hpp"
#include "deffx/core/error.hpp"

namespace deffx::analysis {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kTitleHeight = 30.0;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Series {
  std::string label;
  const std::vector<double>* y;
};

struct Panel {
  std::string ylabel;
  const std::vector<double>* x;
  std::vector<Series> series;
  bool log_x = false;
};

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

void write_plot(const std::filesystem::path& path, const std::string& title, const std::vector<Panel>& panels,
                const std::string& xlabel) {
  std::ofstream out = open_for_write(path);
  out << fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, escape(title));
  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double slot = (kHeight - kTitleHeight - 30.0) / static_cast<double>(panels.size());
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double top = kTitleHeight + slot * static_cast<double>(p);
    const double h = slot - 25.0;
    auto xmap = [&](double v) { return panel.log_x ? std::log10(std::max(v, 1e-12)) : v; };
    double x0 = xmap(panel.x->front()), x1 = xmap(panel.x->back());
    if (x1 == x0) x1 = x0 + 1.0;
    double y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : panel.series)
      for (double v : *s.y)
        if (std::isfinite(v)) {
          y0 = std::min(y0, v);
          y1 = std::max(y1, v);
        }
    if (!std::isfinite(y0)) y0 = 0.0, y1 = 1.0;
    if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
    out << fmt::format(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n"
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.4g}</text>\n"
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.4g}</text>\n"
        "<text x=\"12\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        kMarginLeft, top, plot_w, h, kMarginLeft - 4, top + 10, y1, kMarginLeft - 4, top + h, y0, top + h / 2,
        escape(panel.ylabel));
    for (std::size_t s = 0; s < panel.series.size(); ++s) {
      const auto& ys = *panel.series[s].y;
      out << fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"",
                         kColors[s % std::size(kColors)]);
      const std::size_t n = std::min(ys.size(), panel.x->size());
      // Long traces are decimated to at most ~4 points per pixel column.
      const std::size_t stride = std::max<std::size_t>(1, n / 3200);
      for (std::size_t i = 0; i < n; i += stride) {
        if (!std::isfinite(ys[i])) continue;
        const double px = kMarginLeft + (xmap((*panel.x)[i]) - x0) / (x1 - x0) * plot_w;
        const double py = top + h - (ys[i] - y0) / (y1 - y0) * h;
        out << fmt::format("{:.2f},{:.2f} ", px, py);
      }
      out << "\"/>\n";
      out << fmt::format(
          "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{}\" text-anchor=\"end\">{}</text>\n",
          kWidth - kMarginRight - 4, top + 14 + 13 * static_cast<double>(s), kColors[s % std::size(kColors)],
          escape(panel.series[s].label));
    }
  }
  out << fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n</svg>\n",
      kWidth / 2, kHeight - 8, escape(xlabel));
  finish(out, path);
}

}  // namespace

void write_csv(const ResponseCurve& curve, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << "freq_hz,mag_db,phase_rad\n";
  for (std::size_t i = 0; i < curve.freqs.size(); ++i)
    out << curve.freqs[i] << ',' << curve.magnitude_db[i] << ',' << curve.phase_rad[i] << '\n';
  finish(out, path);
}

ResponseCurve read_response_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "freq_hz,mag_db,phase_rad")
    throw IoError(path.string() + ": missing freq_hz,mag_db,phase_rad header");
  ResponseCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double f, m, p;
    char c1, c2;
    if (!(row >> f >> c1 >> m >> c2 >> p) || c1 != ',' || c2 != ',')
      throw IoError(path.string() + ": malformed row '" + line + "'");
    curve.freqs.push_back(f);
    curve.magnitude_db.push_back(m);
    curve.phase_rad.push_back(p);
  }
  return curve;
}

void write_csv(const AmplitudeCurve& curve, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << "x,y,tanh\n";
  for (std::size_t i = 0; i < curve.x.size(); ++i)
    out << curve.x[i] << ',' << curve.y[i] << ',' << curve.reference[i] << '\n';
  finish(out, path);
}

void write_csv(const TimeTrace& trace, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << "time_s,input,output";
  for (const auto& n : trace.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < trace.input.size(); ++i) {
    out << static_cast<double>(i) / trace.fs << ',' << trace.input[i] << ',' << trace.output[i];
    for (const auto& v : trace.values) out << ',' << v[i];
    out << '\n';
  }
  finish(out, path);
}

void write_svg(const ResponseCurve& curve, const std::filesystem::path& path, const std::string& title) {
  write_plot(path, title,
             {{"magnitude (dB)", &curve.freqs, {{"magnitude", &curve.magnitude_db}}, true},
              {"phase (rad)", &curve.freqs, {{"phase", &curve.phase_rad}}, true}},
             "frequency (Hz, log)");
}

void write_svg(const AmplitudeCurve& curve, const std::filesystem::path& path, const std::string& title) {
  write_plot(path, title, {{"output", &curve.x, {{"model", &curve.y}, {"tanh", &curve.reference}}, false}}, "input");
}

void write_svg(const TimeTrace& trace, const std::filesystem::path& path, const std::string& title) {
  std::vector<double> time(trace.input.size());
  for (std::size_t i = 0; i < time.size(); ++i) time[i] = static_cast<double>(i) / trace.fs;
  std::vector<Panel> panels = {{"signal", &time, {{"input", &trace.input}, {"output", &trace.output}}, false}};
  for (std::size_t i = 0; i < trace.values.size(); ++i)
    panels.push_back({trace.names[i], &time, {{trace.names[i], &trace.values[i]}}, false});
  write_plot(path, title, panels, "time (s)");
}

}  // namespace deffx::analysis
