#include "svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "repralign/error.hpp"

namespace repralign::cli {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

// Fixed two-decimal coordinates keep the output byte-stable.
std::string num(double v) {
    char buf[48];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    return std::string(buf, ptr);
}

std::string tick_label(double v) {
    char buf[48];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 4);
    return std::string(buf, ptr);
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

struct Range {
    double lo = INFINITY, hi = -INFINITY;
    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle() {
        if (!(lo <= hi)) lo = 0, hi = 1;
        if (lo == hi) lo -= 0.5, hi += 0.5;
    }
};

struct Frame {
    Range xr, yr;
    bool log_x = false;

    double tx(double x) const {
        const double v = log_x ? std::log10(x) : x;
        return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight);
    }
    double ty(double y) const { return kHeight - kBottom - (y - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom); }
};

bool usable(double x, double y, bool log_x) { return std::isfinite(x) && std::isfinite(y) && (!log_x || x > 0); }

std::string open(const std::string& title, const std::string& x_label, const std::string& y_label, const Frame& f) {
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
         "</text>\n";
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y1) +
         "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = f.xr.lo + (f.xr.hi - f.xr.lo) * i / 4.0;
        const double px = x0 + (x1 - x0) * i / 4.0;
        s += "<text x=\"" + num(px) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" +
             tick_label(f.log_x ? std::pow(10.0, xv) : xv) + "</text>\n";
        const double yv = f.yr.lo + (f.yr.hi - f.yr.lo) * i / 4.0;
        const double py = y0 - (y0 - y1) * i / 4.0;
        s += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" + tick_label(yv) +
             "</text>\n";
    }
    s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
         escape(x_label) + (f.log_x ? " (log)" : "") + "</text>\n";
    s += "<text transform=\"translate(16," + num((y0 + y1) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(y_label) + "</text>\n";
    return s;
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<SvgSeries>& series, bool log_x) {
    Frame f;
    f.log_x = log_x;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i], log_x)) continue;
            f.xr.add(log_x ? std::log10(s.x[i]) : s.x[i]);
            f.yr.add(s.y[i]);
        }
    }
    f.xr.settle();
    f.yr.settle();
    std::string out = open(title, x_label, y_label, f);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i], log_x)) continue;
            if (!pts.empty()) pts += ' ';
            pts += num(f.tx(s.x[i])) + "," + num(f.ty(s.y[i]));
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
               "\"/>\n";
        out += "<text x=\"" + num(kWidth - kRight - 4) + "\" y=\"" + num(kTop + 14 * (k + 1)) +
               "\" text-anchor=\"end\" fill=\"" + color + "\">" + escape(s.name) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string scatter_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<std::string>& tags) {
    Frame f;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (!usable(x[i], y[i], false)) continue;
        f.xr.add(x[i]);
        f.yr.add(y[i]);
    }
    f.xr.settle();
    f.yr.settle();
    std::string out = open(title, x_label, y_label, f);
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (!usable(x[i], y[i], false)) continue;
        out += "<circle cx=\"" + num(f.tx(x[i])) + "\" cy=\"" + num(f.ty(y[i])) + "\" r=\"3.5\" fill=\"" +
               kPalette[0] + "\"><title>" + escape(i < tags.size() ? tags[i] : std::string()) +
               "</title></circle>\n";
    }
    out += "</svg>\n";
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace repralign::cli
