/*
 * svg.hpp
 *
 * Minimal deterministic SVG writer for the planar scenario plots: the
 * constraint/avoid/target boxes, both closed-loop position traces and
 * heading arrows at the sampling instants.
 */

#pragma once

#include "reachsynth/box.hpp"
#include "reachsynth/types.hpp"

#include <string>
#include <vector>

namespace reachsynth {

class SvgPlot {
 public:
  /* world window: x right, y up (first two coordinates of the plotted data) */
  SvgPlot(double x_min, double x_max, double y_min, double y_max, int width = 860,
          int height = 600);

  /* draws the first two dimensions of the box */
  void add_box(const Box& b, const std::string& fill, const std::string& stroke,
               double stroke_width = 1.0, double fill_opacity = 1.0);
  void add_polyline(const std::vector<Vec>& points, const std::string& color, double width);
  /* arrow anchored at (x, y) pointing along `angle` (radians, 0 = +x
   * axis, pi/2 = +y axis; with (N, E) on (x, y) this matches headings) */
  void add_heading_arrow(double x, double y, double angle, double length,
                         const std::string& color);
  void add_label(double x, double y, const std::string& text);

  void save(const std::string& path) const;

 private:
  double sx(double x) const;
  double sy(double y) const;
  double x_min_, x_max_, y_min_, y_max_;
  int width_, height_;
  int margin_ = 40;
  std::vector<std::string> elements_;
};

}  // namespace reachsynth
