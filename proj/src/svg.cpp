#include "reachsynth/svg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reachsynth {

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

SvgPlot::SvgPlot(double x_min, double x_max, double y_min, double y_max, int width, int height)
    : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max), width_(width),
      height_(height) {}

double SvgPlot::sx(double x) const {
  return margin_ + (x - x_min_) / (x_max_ - x_min_) * (width_ - 2 * margin_);
}

double SvgPlot::sy(double y) const {
  return height_ - margin_ - (y - y_min_) / (y_max_ - y_min_) * (height_ - 2 * margin_);
}

void SvgPlot::add_box(const Box& b, const std::string& fill, const std::string& stroke,
                      double stroke_width, double fill_opacity) {
  if (b.is_empty() || b.dim() < 2) return;
  double x0 = std::max(b.lo()[0], x_min_), x1 = std::min(b.hi()[0], x_max_);
  double y0 = std::max(b.lo()[1], y_min_), y1 = std::min(b.hi()[1], y_max_);
  if (x0 > x1 || y0 > y1) return;
  std::ostringstream os;
  os << "<rect x=\"" << num(sx(x0)) << "\" y=\"" << num(sy(y1)) << "\" width=\""
     << num(sx(x1) - sx(x0)) << "\" height=\"" << num(sy(y0) - sy(y1)) << "\" fill=\"" << fill
     << "\" fill-opacity=\"" << num(fill_opacity) << "\" stroke=\"" << stroke
     << "\" stroke-width=\"" << num(stroke_width) << "\"/>";
  elements_.push_back(os.str());
}

void SvgPlot::add_polyline(const std::vector<Vec>& points, const std::string& color,
                           double width) {
  if (points.size() < 2) return;
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << num(width)
     << "\" points=\"";
  for (const Vec& p : points) os << num(sx(p[0])) << ',' << num(sy(p[1])) << ' ';
  os << "\"/>";
  elements_.push_back(os.str());
}

void SvgPlot::add_heading_arrow(double x, double y, double angle, double length,
                                const std::string& color) {
  /* heading 0 points along +x (first plotted axis), growing toward +y */
  double dx = length * std::cos(angle), dy = length * std::sin(angle);
  double x1 = sx(x), y1 = sy(y), x2 = sx(x + dx), y2 = sy(y + dy);
  double hx = x2 - x1, hy = y2 - y1;
  double n = std::hypot(hx, hy);
  if (n < 1e-9) return;
  hx /= n;
  hy /= n;
  double px = -hy, py = hx;
  std::ostringstream os;
  os << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\""
     << num(y2) << "\" stroke=\"" << color << "\" stroke-width=\"1.2\"/>";
  os << "<polygon points=\"" << num(x2) << ',' << num(y2) << ' ' << num(x2 - 4 * hx + 2 * px)
     << ',' << num(y2 - 4 * hy + 2 * py) << ' ' << num(x2 - 4 * hx - 2 * px) << ','
     << num(y2 - 4 * hy - 2 * py) << "\" fill=\"" << color << "\"/>";
  elements_.push_back(os.str());
}

void SvgPlot::add_label(double x, double y, const std::string& text) {
  std::ostringstream os;
  os << "<text x=\"" << num(sx(x)) << "\" y=\"" << num(sy(y)) << "\" font-size=\"13\" "
     << "font-family=\"sans-serif\">" << text << "</text>";
  elements_.push_back(os.str());
}

void SvgPlot::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
     << height_ << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n";
  os << "<rect width=\"" << width_ << "\" height=\"" << height_ << "\" fill=\"white\"/>\n";
  for (const std::string& e : elements_) os << e << '\n';
  os << "</svg>\n";
  if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace reachsynth
