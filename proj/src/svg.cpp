#include "refx/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace refx {

namespace {

using L = SvgLayout;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string tick_label(double v, double step) {
  int decimals = 0;
  if (step < 1) decimals = static_cast<int>(std::ceil(-std::log10(step) - 1e-9));
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", std::clamp(decimals, 0, 12), v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos) s = "0";
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header() {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         num(L::kWidth) + "\" height=\"" + num(L::kHeight) + "\" viewBox=\"0 0 " +
         num(L::kWidth) + " " + num(L::kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         "<rect x=\"0\" y=\"0\" width=\"" + num(L::kWidth) + "\" height=\"" +
         num(L::kHeight) + "\" fill=\"white\"/>\n";
}

struct Axis {
  double lo, hi, step;
};

Axis nice_axis(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = lo == 0 ? 1.0 : std::abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  const double step = nice_step(hi - lo);
  return {std::floor(lo / step) * step, std::ceil(hi / step) * step, step};
}

}  // namespace

double nice_step(double range, int target_ticks) {
  if (!(range > 0) || target_ticks < 1) return 1.0;
  const double raw = range / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  double nf;
  if (f < 1.5) nf = 1;
  else if (f < 3) nf = 2;
  else if (f < 7) nf = 5;
  else nf = 10;
  return nf * mag;
}

std::string emit_svg(const std::vector<Profile>& profiles) {
  if (profiles.empty()) throw InvalidArgument("emit_svg: no profiles");
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& p : profiles) {
    xlo = std::min(xlo, p.grid.minCoeff());
    xhi = std::max(xhi, p.grid.maxCoeff());
    ylo = std::min(ylo, p.values.minCoeff());
    yhi = std::max(yhi, p.values.maxCoeff());
  }
  const Axis xa = nice_axis(xlo, xhi), ya = nice_axis(ylo, yhi);
  auto px = [&](double x) { return L::kLeft + (x - xa.lo) / (xa.hi - xa.lo) * (L::kRight - L::kLeft); };
  auto py = [&](double y) { return L::kBottom - (y - ya.lo) / (ya.hi - ya.lo) * (L::kBottom - L::kTop); };

  std::string s = header();
  const auto& first = profiles.front();
  s += "<text x=\"" + num(L::kLeft) + "\" y=\"24\" font-size=\"14\">" +
       escape(std::string(to_string(first.kind))) + " of " + escape(first.feature) +
       "</text>\n";
  // Axes and ticks.
  s += "<g stroke=\"#444\" stroke-width=\"1\">\n";
  s += "<line x1=\"" + num(L::kLeft) + "\" y1=\"" + num(L::kBottom) + "\" x2=\"" +
       num(L::kRight) + "\" y2=\"" + num(L::kBottom) + "\"/>\n";
  s += "<line x1=\"" + num(L::kLeft) + "\" y1=\"" + num(L::kTop) + "\" x2=\"" +
       num(L::kLeft) + "\" y2=\"" + num(L::kBottom) + "\"/>\n";
  s += "</g>\n<g fill=\"#444\">\n";
  for (long k = 0, nk = std::lround((xa.hi - xa.lo) / xa.step); k <= nk; ++k) {
    const double t = xa.lo + static_cast<double>(k) * xa.step;
    const double x = px(t);
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(L::kBottom) + "\" x2=\"" + num(x) +
         "\" y2=\"" + num(L::kBottom + 5) + "\" stroke=\"#444\"/>\n";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(L::kBottom + 18) +
         "\" text-anchor=\"middle\">" + tick_label(t, xa.step) + "</text>\n";
  }
  for (long k = 0, nk = std::lround((ya.hi - ya.lo) / ya.step); k <= nk; ++k) {
    const double t = ya.lo + static_cast<double>(k) * ya.step;
    const double y = py(t);
    s += "<line x1=\"" + num(L::kLeft - 5) + "\" y1=\"" + num(y) + "\" x2=\"" +
         num(L::kLeft) + "\" y2=\"" + num(y) + "\" stroke=\"#444\"/>\n";
    s += "<text x=\"" + num(L::kLeft - 8) + "\" y=\"" + num(y + 4) +
         "\" text-anchor=\"end\">" + tick_label(t, ya.step) + "</text>\n";
  }
  s += "</g>\n";
  s += "<text x=\"" + num((L::kLeft + L::kRight) / 2) + "\" y=\"" +
       num(L::kBottom + 40) + "\" text-anchor=\"middle\">" + escape(first.feature) +
       "</text>\n";

  for (std::size_t c = 0; c < profiles.size(); ++c) {
    const auto& p = profiles[c];
    const char* color = kPalette[c % std::size(kPalette)];
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
         "\" stroke-width=\"2\" points=\"";
    for (Index i = 0; i < p.grid.size(); ++i) {
      if (i) s += ' ';
      s += num(px(p.grid[i])) + "," + num(py(p.values[i]));
    }
    s += "\"/>\n";
    std::string legend = p.reference.label;
    if (p.instance_id) legend += " #" + std::to_string(*p.instance_id);
    const double ly = L::kTop + 16.0 * static_cast<double>(c);
    s += "<rect x=\"" + num(L::kRight - 150) + "\" y=\"" + num(ly - 9) +
         "\" width=\"12\" height=\"3\" fill=\"" + color + "\"/>\n";
    s += "<text x=\"" + num(L::kRight - 132) + "\" y=\"" + num(ly) + "\">" +
         escape(legend) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string emit_svg(const AttributionSet& a) {
  const auto n = static_cast<std::size_t>(a.values.size());
  if (n == 0) throw InvalidArgument("emit_svg: empty attribution set");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(a.values[static_cast<Index>(x)]) >
           std::abs(a.values[static_cast<Index>(y)]);
  });
  double m = a.values.cwiseAbs().maxCoeff();
  if (!(m > 0)) m = 1;
  const double step = nice_step(m, 2);
  const double span = std::ceil(m / step - 1e-12) * step;
  const double zero = (L::kLeft + L::kRight) / 2;
  const double scale = (L::kRight - zero) / span;
  const double band = (L::kBottom - L::kTop) / static_cast<double>(n);
  const double bar_h = std::min(band * 0.7, 28.0);

  std::string s = header();
  s += "<text x=\"" + num(L::kLeft) + "\" y=\"24\" font-size=\"14\">" +
       escape(std::string(to_string(a.method))) + " vs reference '" +
       escape(a.reference.label) + "' (baseline " + tick_label(a.baseline, 0.001) +
       ", prediction " + tick_label(a.prediction, 0.001) + ")</text>\n";
  s += "<g fill=\"#444\">\n";
  for (long k = 0, nk = std::lround(2 * span / step); k <= nk; ++k) {
    const double t = -span + static_cast<double>(k) * step;
    const double x = zero + t * scale;
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(L::kBottom) + "\" x2=\"" + num(x) +
         "\" y2=\"" + num(L::kBottom + 5) + "\" stroke=\"#444\"/>\n";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(L::kBottom + 18) +
         "\" text-anchor=\"middle\">" + tick_label(t, step) + "</text>\n";
  }
  s += "</g>\n";
  s += "<line x1=\"" + num(zero) + "\" y1=\"" + num(L::kTop) + "\" x2=\"" + num(zero) +
       "\" y2=\"" + num(L::kBottom) + "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = order[r];
    const double v = a.values[static_cast<Index>(i)];
    const double width = std::abs(v) * scale;
    const double x = v >= 0 ? zero : zero - width;
    const double y = L::kTop + band * static_cast<double>(r) + (band - bar_h) / 2;
    s += "<rect class=\"bar\" data-feature=\"" + escape(a.features[i]) + "\" x=\"" +
         num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(width) + "\" height=\"" +
         num(bar_h) + "\" fill=\"" + (v >= 0 ? "#2ca02c" : "#d62728") + "\"/>\n";
    s += "<text x=\"" + num(L::kLeft - 8) + "\" y=\"" + num(y + bar_h / 2 + 4) +
         "\" text-anchor=\"end\">" + escape(a.features[i]) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace refx
