#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "qflip/errors.hpp"
#include "qflip/io.hpp"

namespace qflip::io {

namespace {

constexpr double kWidth = 640.0, kHeight = 420.0;
constexpr double kLeft = 70.0, kRight = 20.0, kTop = 30.0, kBottom = 50.0;

struct Range {
  double lo, hi;
  double map(double v, double a, double b) const {
    return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : 0.5 * (a + b);
  }
};

void axes(std::ostringstream& s, const std::string& xl, const std::string& yl, Range xr, Range yr) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  s << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)",
                   x0, y1, x1 - x0, y0 - y1)
    << '\n';
  for (int k = 0; k <= 4; ++k) {
    const double xv = xr.lo + (xr.hi - xr.lo) * k / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * k / 4.0;
    s << fmt::format(R"(<text x="{:.1f}" y="{}" font-size="11" text-anchor="middle">{:.3g}</text>)",
                     xr.map(xv, x0, x1), y0 + 16, xv)
      << '\n';
    s << fmt::format(R"(<text x="{}" y="{:.1f}" font-size="11" text-anchor="end">{:.3g}</text>)",
                     x0 - 6, yr.map(yv, y0, y1) + 4, yv)
      << '\n';
  }
  s << fmt::format(R"(<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>)",
                   0.5 * (x0 + x1), kHeight - 12, xl)
    << '\n';
  s << fmt::format(
           R"svg(<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>)svg",
           0.5 * (y0 + y1), 0.5 * (y0 + y1), yl)
    << '\n';
}

std::string title(const bench::SweepResult& res) {
  for (const auto& [k, v] : res.metadata) {
    if (k == "method") return res.kind + " / " + v;
  }
  return res.kind;
}

}  // namespace

std::string render_svg(const bench::SweepResult& res) {
  if (res.points.empty()) throw ConfigError("render_svg: empty sweep");
  std::ostringstream s;
  s << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}">)", kWidth,
                   kHeight)
    << '\n';
  s << fmt::format(R"(<text x="{}" y="18" font-size="14" text-anchor="middle">{}</text>)",
                   kWidth / 2, title(res))
    << '\n';
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;

  if (res.y_label.empty()) {
    Range xr{res.points.front().x, res.points.front().x};
    Range yr{1.0, 0.0};
    for (const auto& p : res.points) {
      xr.lo = std::min(xr.lo, p.x);
      xr.hi = std::max(xr.hi, p.x);
      yr.lo = std::min(yr.lo, p.estimate.p_hat);
      yr.hi = std::max(yr.hi, p.estimate.p_hat);
    }
    if (yr.hi - yr.lo < 1e-6) {
      yr.lo -= 0.01;
      yr.hi += 0.01;
    }
    axes(s, res.x_label, "population", xr, yr);
    s << R"(<polyline fill="none" stroke="#1f77b4" stroke-width="2" points=")";
    for (const auto& p : res.points) {
      s << fmt::format("{:.2f},{:.2f} ", xr.map(p.x, x0, x1), yr.map(p.estimate.p_hat, y0, y1));
    }
    s << "\"/>\n";
    for (const auto& p : res.points) {
      s << fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="3" fill="#1f77b4"/>)",
                       xr.map(p.x, x0, x1), yr.map(p.estimate.p_hat, y0, y1))
        << '\n';
    }
  } else {
    std::set<double> xs, ys;
    for (const auto& p : res.points) {
      xs.insert(p.x);
      ys.insert(p.y.value_or(0.0));
    }
    const Range xr{*xs.begin(), *xs.rbegin()};
    const Range yr{*ys.begin(), *ys.rbegin()};
    axes(s, res.x_label, res.y_label, xr, yr);
    const double cw = (x1 - x0) / static_cast<double>(xs.size());
    const double ch = (y0 - y1) / static_cast<double>(ys.size());
    for (const auto& p : res.points) {
      const double v = p.log_infidelity.value_or(bench::log_infidelity(p.estimate.p_hat));
      // -6 (best) maps to dark blue, 0 to yellow.
      const double u = std::clamp((v + 6.0) / 6.0, 0.0, 1.0);
      const int r = static_cast<int>(255 * u);
      const int g = static_cast<int>(40 + 200 * u);
      const int b = static_cast<int>(120 * (1.0 - u));
      const auto ix = static_cast<double>(std::distance(xs.begin(), xs.find(p.x)));
      const auto iy = static_cast<double>(std::distance(ys.begin(), ys.find(p.y.value_or(0.0))));
      s << fmt::format(
               R"svg(<rect x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="rgb({},{},{})"><title>{:.3f}</title></rect>)svg",
               x0 + ix * cw, y0 - (iy + 1.0) * ch, cw, ch, r, g, b, v)
        << '\n';
    }
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace qflip::io
