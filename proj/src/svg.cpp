#include "regimescan/svg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "regimescan/errors.hpp"

namespace regimescan {

namespace {

constexpr double kWidth = 720.0, kHeight = 420.0;
constexpr double kLeft = 70.0, kRight = 20.0, kTop = 40.0, kBottom = 50.0;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

std::vector<double> ticks(double lo, double hi, int target = 6) {
  std::vector<double> out;
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * m >= raw) {
      step = mag * m;
      break;
    }
  }
  const double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + 1e-9 * span; v += step) out.push_back(v);
  return out;
}

}  // namespace

Plot::Plot(double x_min, double x_max, double y_min, double y_max, std::string title,
           std::string x_label, std::string y_label)
    : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max), title_(std::move(title)),
      x_label_(std::move(x_label)), y_label_(std::move(y_label)) {
  if (!(x_max_ > x_min_)) x_max_ = x_min_ + 1.0;
  if (!(y_max_ > y_min_)) y_max_ = y_min_ + 1.0;
}

double Plot::sx(double x) const {
  return kLeft + (x - x_min_) / (x_max_ - x_min_) * (kWidth - kLeft - kRight);
}

double Plot::sy(double y) const {
  return kHeight - kBottom - (y - y_min_) / (y_max_ - y_min_) * (kHeight - kTop - kBottom);
}

void Plot::hband(double x0, double x1, const std::string& color, double opacity) {
  const double a = sx(std::max(x0, x_min_)), b = sx(std::min(x1, x_max_));
  body_ += "<rect x=\"" + num(a) + "\" y=\"" + num(kTop) + "\" width=\"" + num(b - a) +
           "\" height=\"" + num(kHeight - kTop - kBottom) + "\" fill=\"" + color +
           "\" opacity=\"" + num(opacity) + "\"/>\n";
}

void Plot::bar(double x0, double x1, double y, const std::string& color) {
  const double a = sx(x0), b = sx(x1);
  const double top = sy(std::min(std::max(y, y_min_), y_max_));
  const double base = sy(y_min_);
  body_ += "<rect x=\"" + num(a) + "\" y=\"" + num(top) + "\" width=\"" + num(b - a) +
           "\" height=\"" + num(base - top) + "\" fill=\"" + color + "\"/>\n";
}

void Plot::polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::string& color, double stroke_width) {
  std::string pts;
  for (size_t i = 0; i < xs.size(); ++i)
    pts += num(sx(xs[i])) + "," + num(sy(ys[i])) + (i + 1 < xs.size() ? " " : "");
  body_ += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
           num(stroke_width) + "\" points=\"" + pts + "\"/>\n";
}

void Plot::steps(const std::vector<double>& xs, const std::vector<double>& ys,
                 const std::string& color, double stroke_width) {
  std::vector<double> px, py;
  for (size_t i = 0; i < xs.size(); ++i) {
    px.push_back(xs[i]);
    py.push_back(ys[i]);
    if (i + 1 < xs.size()) {
      px.push_back(xs[i + 1]);
      py.push_back(ys[i]);
    }
  }
  polyline(px, py, color, stroke_width);
}

void Plot::vline(double x, const std::string& color, bool dashed) {
  body_ += "<line x1=\"" + num(sx(x)) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(sx(x)) +
           "\" y2=\"" + num(kHeight - kBottom) + "\" stroke=\"" + color + "\"" +
           (dashed ? " stroke-dasharray=\"5,4\"" : "") + " stroke-width=\"1.2\"/>\n";
}

void Plot::legend(const std::vector<std::pair<std::string, std::string>>& entries) {
  double y = kTop + 14.0;
  for (const auto& [label, color] : entries) {
    body_ += "<rect x=\"" + num(kWidth - kRight - 150) + "\" y=\"" + num(y - 9) +
             "\" width=\"12\" height=\"12\" fill=\"" + color + "\"/>\n";
    body_ += "<text x=\"" + num(kWidth - kRight - 133) + "\" y=\"" + num(y + 1) +
             "\" font-family=\"monospace\" font-size=\"12\">" + esc(label) + "</text>\n";
    y += 18.0;
  }
}

std::string Plot::finish() const {
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += body_;
  // Frame and ticks drawn last so data never covers them.
  out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" +
         num(kWidth - kLeft - kRight) + "\" height=\"" + num(kHeight - kTop - kBottom) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(x_min_, x_max_)) {
    out += "<line x1=\"" + num(sx(t)) + "\" y1=\"" + num(kHeight - kBottom) + "\" x2=\"" +
           num(sx(t)) + "\" y2=\"" + num(kHeight - kBottom + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(sx(t)) + "\" y=\"" + num(kHeight - kBottom + 18) +
           "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">" + num(t) +
           "</text>\n";
  }
  for (double t : ticks(y_min_, y_max_)) {
    out += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(sy(t)) + "\" x2=\"" + num(kLeft) +
           "\" y2=\"" + num(sy(t)) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(sy(t) + 4) +
           "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">" + num(t) +
           "</text>\n";
  }
  out += "<text x=\"" + num((kLeft + kWidth - kRight) / 2) + "\" y=\"" + num(kTop - 14) +
         "\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">" + esc(title_) +
         "</text>\n";
  out += "<text x=\"" + num((kLeft + kWidth - kRight) / 2) + "\" y=\"" + num(kHeight - 12) +
         "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">" + esc(x_label_) +
         "</text>\n";
  out += "<text x=\"16\" y=\"" + num((kTop + kHeight - kBottom) / 2) +
         "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num((kTop + kHeight - kBottom) / 2) + ")\">" + esc(y_label_) + "</text>\n";
  out += "</svg>\n";
  return out;
}

const std::vector<std::string>& Plot::palette() {
  static const std::vector<std::string> colors = {"#1f77b4", "#d62728", "#2ca02c",
                                                  "#9467bd", "#ff7f0e", "#8c564b"};
  return colors;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << content;
  if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace regimescan
