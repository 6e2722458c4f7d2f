#pragma once

#include <string>
#include <vector>

namespace regimescan {

// Minimal deterministic SVG plotting surface: fixed layout, fixed number
// formatting, no timestamps, so identical inputs give identical bytes.
class Plot {
 public:
  Plot(double x_min, double x_max, double y_min, double y_max, std::string title,
       std::string x_label, std::string y_label);

  void hband(double x0, double x1, const std::string& color, double opacity);
  void bar(double x0, double x1, double y, const std::string& color);
  void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& color, double stroke_width = 1.5);
  // Piecewise-constant line through (x_i, y_i) with jumps at the next x.
  void steps(const std::vector<double>& xs, const std::vector<double>& ys,
             const std::string& color, double stroke_width = 1.5);
  void vline(double x, const std::string& color, bool dashed = false);
  void legend(const std::vector<std::pair<std::string, std::string>>& entries);

  std::string finish() const;

  static const std::vector<std::string>& palette();

 private:
  double sx(double x) const;
  double sy(double y) const;

  double x_min_, x_max_, y_min_, y_max_;
  std::string title_, x_label_, y_label_;
  std::string body_;
};

void write_text_file(const std::string& path, const std::string& content);

}  // namespace regimescan
