#include "mlbp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mlbp/linalg.hpp"

namespace mlbp {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 80;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 60;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct AxisScale {
    double lo, hi;
    bool log;
    double to_unit(double v) const {
        double a = log ? std::log10(v) : v;
        double l = log ? std::log10(lo) : lo;
        double h = log ? std::log10(hi) : hi;
        if (h == l) return 0.5;
        return (a - l) / (h - l);
    }
};

bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0); }

std::string tick_label(double v) {
    std::ostringstream ss;
    ss.precision(3);
    ss << v;
    return ss.str();
}

std::vector<double> make_ticks(const AxisScale& s, int want = 5) {
    std::vector<double> ticks;
    if (s.log) {
        int lo = static_cast<int>(std::floor(std::log10(s.lo)));
        int hi = static_cast<int>(std::ceil(std::log10(s.hi)));
        int step = std::max(1, (hi - lo) / want);
        for (int e = lo; e <= hi; e += step) {
            double v = std::pow(10.0, e);
            if (v >= s.lo * 0.999 && v <= s.hi * 1.001) ticks.push_back(v);
        }
    } else {
        double span = s.hi - s.lo;
        if (span <= 0) return {s.lo};
        double raw = span / want;
        double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = std::ceil(raw / mag) * mag;
        double start = std::ceil(s.lo / step) * step;
        for (double v = start; v <= s.hi + step * 1e-9; v += step) ticks.push_back(v);
    }
    return ticks;
}

}  // namespace

void write_svg_line_chart(const std::filesystem::path& path,
                          const std::vector<Series>& series, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel,
                          bool logx, bool logy) {
    double xmin = kInf, xmax = -kInf, ymin = kInf, ymax = -kInf;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], logx) || !usable(s.y[i], logy)) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmin <= xmax)) {  // nothing plottable
        xmin = logx ? 1 : 0;
        xmax = logx ? 10 : 1;
        ymin = logy ? 1 : 0;
        ymax = logy ? 10 : 1;
    }
    if (ymin == ymax) {
        ymin = logy ? ymin / 2 : ymin - 1;
        ymax = logy ? ymax * 2 : ymax + 1;
    }
    AxisScale xs{xmin, xmax, logx};
    AxisScale ys{ymin, ymax, logy};

    auto px = [&](double v) { return kMarginLeft + xs.to_unit(v) * (kWidth - kMarginLeft - kMarginRight); };
    auto py = [&](double v) { return kHeight - kMarginBottom - ys.to_unit(v) * (kHeight - kMarginTop - kMarginBottom); };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n";

    // axes
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\""
        << kMarginLeft << "\" y2=\"" << kHeight - kMarginBottom
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kHeight - kMarginBottom
        << "\" x2=\"" << kWidth - kMarginRight << "\" y2=\"" << kHeight - kMarginBottom
        << "\" stroke=\"black\"/>\n";

    for (double t : make_ticks(xs)) {
        double x = px(t);
        out << "<line x1=\"" << x << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\""
            << x << "\" y2=\"" << kHeight - kMarginBottom + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << x << "\" y=\"" << kHeight - kMarginBottom + 18
            << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
    }
    for (double t : make_ticks(ys)) {
        double y = py(t);
        out << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << y << "\" x2=\""
            << kMarginLeft << "\" y2=\"" << y << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
    }
    out << "<text x=\"" << (kMarginLeft + kWidth - kMarginRight) / 2 << "\" y=\""
        << kHeight - 15 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    out << "<text x=\"18\" y=\"" << kHeight / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << kHeight / 2 << ")\">"
        << ylabel << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % std::size(kPalette)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], logx) || !usable(s.y[i], logy)) continue;
            out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        }
        out << "\"/>\n";
        double ly = kMarginTop + 16.0 * static_cast<double>(si);
        out << "<line x1=\"" << kWidth - kMarginRight - 130 << "\" y1=\"" << ly
            << "\" x2=\"" << kWidth - kMarginRight - 110 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << kWidth - kMarginRight - 105 << "\" y=\"" << ly + 4 << "\">"
            << s.label << "</text>\n";
    }
    out << "</svg>\n";
}

void plot_csv(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path,
              const std::string& x_col, const std::vector<std::string>& y_cols,
              bool logx, bool logy) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open: " + csv_path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + csv_path.string());
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    auto col_index = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw std::runtime_error("column not found in " + csv_path.string() + ": " + name);
        return static_cast<size_t>(it - header.begin());
    };

    size_t xi = col_index(x_col);
    std::vector<std::string> wanted =
        y_cols.empty() ? std::vector<std::string>() : y_cols;
    if (wanted.empty())
        for (const auto& h : header)
            if (h != x_col) wanted.push_back(h);

    std::vector<Series> series;
    std::vector<size_t> yidx;
    for (const auto& name : wanted) {
        series.push_back({name, {}, {}});
        yidx.push_back(col_index(name));
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() <= xi) continue;
        double xv = std::stod(cells[xi]);
        for (size_t s = 0; s < series.size(); ++s) {
            if (cells.size() <= yidx[s]) continue;
            series[s].x.push_back(xv);
            series[s].y.push_back(std::stod(cells[yidx[s]]));
        }
    }
    write_svg_line_chart(svg_path, series, csv_path.filename().string(), x_col, "value",
                         logx, logy);
}

}  // namespace mlbp
