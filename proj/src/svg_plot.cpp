#include "bsde/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsde/report_io.hpp"

namespace bsde {

namespace {

constexpr double kW = 640, kH = 420;
constexpr double kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 50;

struct Axis {
  double lo, hi;
  bool log;
  double to_unit(double v) const {
    const double a = log ? std::log10(lo) : lo;
    const double b = log ? std::log10(hi) : hi;
    const double x = log ? std::log10(v) : v;
    return (x - a) / (b - a);
  }
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

}  // namespace

void write_line_chart_svg(const std::string& file, const PlotSpec& spec,
                          const PlotSeries& series) {
  if (series.x.empty() || series.x.size() != series.y.size())
    throw std::invalid_argument("write_line_chart_svg: empty or ragged series");
  const bool has_band = !series.band_lo.empty();
  if (has_band && (series.band_lo.size() != series.x.size() ||
                   series.band_hi.size() != series.x.size()))
    throw std::invalid_argument("write_line_chart_svg: band length mismatch");

  auto positive_floor = [](double v) { return std::max(v, 1e-300); };
  double xlo = series.x.front(), xhi = series.x.front();
  double ylo = series.y.front(), yhi = series.y.front();
  for (std::size_t i = 0; i < series.x.size(); ++i) {
    xlo = std::min(xlo, series.x[i]);
    xhi = std::max(xhi, series.x[i]);
    double lo = has_band ? series.band_lo[i] : series.y[i];
    double hi = has_band ? series.band_hi[i] : series.y[i];
    if (spec.log_y) {
      lo = positive_floor(lo);
      hi = positive_floor(hi);
    }
    ylo = std::min(ylo, lo);
    yhi = std::max(yhi, hi);
  }
  if (spec.log_y) {
    ylo = positive_floor(ylo);
    yhi = positive_floor(yhi);
  }
  if (xhi == xlo) xhi = xlo + 1.0;
  if (yhi == ylo) {
    yhi = spec.log_y ? yhi * 10.0 : yhi + 1.0;
    ylo = spec.log_y ? ylo / 10.0 : ylo - 1.0;
  }

  Axis ax{xlo, xhi, spec.log_x};
  Axis ay{ylo, yhi, spec.log_y};
  auto px = [&](double v) { return kMarginL + ax.to_unit(v) * (kW - kMarginL - kMarginR); };
  auto py = [&](double v) { return kH - kMarginB - ay.to_unit(v) * (kH - kMarginT - kMarginB); };

  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open " + file);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << kW / 2 << "' y='20' text-anchor='middle' font-size='15'>" << spec.title
      << "</text>\n";
  out << "<text x='" << kW / 2 << "' y='" << kH - 10 << "' text-anchor='middle' font-size='12'>"
      << spec.x_label << "</text>\n";
  out << "<text x='16' y='" << kH / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
      << kH / 2 << ")'>" << spec.y_label << "</text>\n";

  // Frame and a few tick labels.
  out << "<rect x='" << kMarginL << "' y='" << kMarginT << "' width='" << kW - kMarginL - kMarginR
      << "' height='" << kH - kMarginT - kMarginB << "' fill='none' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double u = i / 4.0;
    const double xv = spec.log_x ? std::pow(10.0, std::log10(xlo) + u * (std::log10(xhi) - std::log10(xlo)))
                                 : xlo + u * (xhi - xlo);
    const double yv = spec.log_y ? std::pow(10.0, std::log10(ylo) + u * (std::log10(yhi) - std::log10(ylo)))
                                 : ylo + u * (yhi - ylo);
    out << "<text x='" << px(xv) << "' y='" << kH - kMarginB + 16
        << "' text-anchor='middle' font-size='10'>" << fmt(xv) << "</text>\n";
    out << "<text x='" << kMarginL - 6 << "' y='" << py(yv) + 3
        << "' text-anchor='end' font-size='10'>" << fmt(yv) << "</text>\n";
  }

  if (has_band) {
    out << "<polygon fill='#9ecae1' fill-opacity='0.5' stroke='none' points='";
    for (std::size_t i = 0; i < series.x.size(); ++i) {
      double v = spec.log_y ? positive_floor(series.band_hi[i]) : series.band_hi[i];
      out << px(series.x[i]) << ',' << py(std::min(std::max(v, ylo), yhi)) << ' ';
    }
    for (std::size_t i = series.x.size(); i-- > 0;) {
      double v = spec.log_y ? positive_floor(series.band_lo[i]) : series.band_lo[i];
      out << px(series.x[i]) << ',' << py(std::min(std::max(v, ylo), yhi)) << ' ';
    }
    out << "'/>\n";
  }

  out << "<polyline fill='none' stroke='#08519c' stroke-width='1.5' points='";
  for (std::size_t i = 0; i < series.x.size(); ++i) {
    double v = spec.log_y ? std::max(series.y[i], ylo) : series.y[i];
    out << px(series.x[i]) << ',' << py(v) << ' ';
  }
  out << "'/>\n</svg>\n";
}

std::vector<std::string> emit_plots(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> written;

  const std::string agg = dir + "/training_aggregate.csv";
  if (fs::exists(agg)) {
    CsvTable t = read_csv(agg);
    const int c_step = t.column("step");
    const int c_loss = t.column("val_loss_mean");
    const int c_loss_sd = t.column("val_loss_sd");
    const int c_err = t.column("rel_error_mean");
    const int c_err_sd = t.column("rel_error_sd");
    PlotSeries loss, err;
    for (const auto& r : t.rows) {
      loss.x.push_back(r[static_cast<std::size_t>(c_step)]);
      loss.y.push_back(r[static_cast<std::size_t>(c_loss)]);
      loss.band_lo.push_back(r[static_cast<std::size_t>(c_loss)] - r[static_cast<std::size_t>(c_loss_sd)]);
      loss.band_hi.push_back(r[static_cast<std::size_t>(c_loss)] + r[static_cast<std::size_t>(c_loss_sd)]);
      const double e = r[static_cast<std::size_t>(c_err)];
      if (!std::isfinite(e)) continue;
      err.x.push_back(r[static_cast<std::size_t>(c_step)]);
      err.y.push_back(e);
      err.band_lo.push_back(e - r[static_cast<std::size_t>(c_err_sd)]);
      err.band_hi.push_back(e + r[static_cast<std::size_t>(c_err_sd)]);
    }
    write_line_chart_svg(dir + "/loss_vs_step.svg",
                         {"Validation loss", "step", "loss", false, true}, loss);
    written.push_back(dir + "/loss_vs_step.svg");
    if (!err.x.empty()) {
      write_line_chart_svg(dir + "/rel_error_vs_step.svg",
                           {"Relative error of Y0", "step", "relative error", false, true}, err);
      written.push_back(dir + "/rel_error_vs_step.svg");
    }
  }

  const std::string conv = dir + "/convergence.csv";
  if (fs::exists(conv)) {
    CsvTable t = read_csv(conv);
    const int c_h = t.column("h");
    const int c_err = t.column("mean_rel_error");
    const int c_sd = t.column("sd_rel_error");
    PlotSeries s;
    std::vector<std::size_t> order(t.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return t.rows[a][static_cast<std::size_t>(c_h)] < t.rows[b][static_cast<std::size_t>(c_h)];
    });
    for (std::size_t i : order) {
      s.x.push_back(t.rows[i][static_cast<std::size_t>(c_h)]);
      s.y.push_back(t.rows[i][static_cast<std::size_t>(c_err)]);
      s.band_lo.push_back(s.y.back() - t.rows[i][static_cast<std::size_t>(c_sd)]);
      s.band_hi.push_back(s.y.back() + t.rows[i][static_cast<std::size_t>(c_sd)]);
    }
    write_line_chart_svg(dir + "/rel_error_vs_h.svg",
                         {"Relative error of Y0 vs step size", "h", "relative error", false, false},
                         s);
    written.push_back(dir + "/rel_error_vs_h.svg");
  }

  if (written.empty())
    throw std::runtime_error("emit_plots: no training_aggregate.csv or convergence.csv in " + dir);
  return written;
}

}  // namespace bsde
