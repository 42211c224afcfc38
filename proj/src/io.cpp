#include "cqed/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace cqed {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_int(long long v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string join_row(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    return line;
}

}  // namespace

void write_csv(const std::string& path, const CsvTable& table) {
    std::string content = join_row(table.header);
    content += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw std::invalid_argument("write_csv: row width mismatch in " + path);
        content += join_row(row);
        content += '\n';
    }
    write_file(path, content);
}

void write_text(const std::string& path, const std::string& content) {
    write_file(path, content);
}

void write_metadata(const std::string& csv_path, const std::string& subcommand,
                    const std::string& resolved_config_json, double wall_time_s) {
    std::string base = csv_path;
    if (base.size() > 4 && base.compare(base.size() - 4, 4, ".csv") == 0)
        base.resize(base.size() - 4);
    nlohmann::json meta;
    meta["subcommand"] = subcommand;
    meta["code_version"] = kCodeVersion;
    meta["wall_time_s"] = wall_time_s;
    meta["config"] = nlohmann::json::parse(resolved_config_json);
    write_file(base + ".meta.json", meta.dump(2) + "\n");
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt2(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
}

std::string fmt_tick(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 4);
    return std::string(buf, res.ptr);
}

}  // namespace

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<SvgSeries>& series, bool logx, bool logy) {
    const double w = 640.0, h = 420.0;
    const double ml = 70.0, mr = 20.0, mt = 40.0, mb = 50.0;

    auto tx = [logx](double v) { return logx ? std::log10(v) : v; };
    auto ty = [logy](double v) { return logy ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!logx || x > 0.0) &&
               (!logy || y > 0.0);
    };

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            xmin = std::min(xmin, tx(s.x[i]));
            xmax = std::max(xmax, tx(s.x[i]));
            ymin = std::min(ymin, ty(s.y[i]));
            ymax = std::max(ymax, ty(s.y[i]));
        }
    if (xmin > xmax) { xmin = 0.0; xmax = 1.0; }
    if (ymin > ymax) { ymin = 0.0; ymax = 1.0; }
    if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
    if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }

    auto px = [&](double v) { return ml + (tx(v) - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double v) { return h - mb - (ty(v) - ymin) / (ymax - ymin) * (h - mt - mb); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt2(w) +
           "\" height=\"" + fmt2(h) + "\" viewBox=\"0 0 " + fmt2(w) + " " + fmt2(h) +
           "\">\n";
    svg += "<rect width=\"" + fmt2(w) + "\" height=\"" + fmt2(h) + "\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt2(w / 2) + "\" y=\"22\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">" + title + "</text>\n";
    // frame
    svg += "<rect x=\"" + fmt2(ml) + "\" y=\"" + fmt2(mt) + "\" width=\"" +
           fmt2(w - ml - mr) + "\" height=\"" + fmt2(h - mt - mb) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    // axis labels and extreme ticks
    auto tick_val = [](double lo, double hi, double f, bool lg) {
        const double v = lo + f * (hi - lo);
        return lg ? std::pow(10.0, v) : v;
    };
    for (double f : {0.0, 0.5, 1.0}) {
        svg += "<text x=\"" + fmt2(ml + f * (w - ml - mr)) + "\" y=\"" + fmt2(h - mb + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               fmt_tick(tick_val(xmin, xmax, f, logx)) + "</text>\n";
        svg += "<text x=\"" + fmt2(ml - 6) + "\" y=\"" + fmt2(h - mb - f * (h - mt - mb) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               fmt_tick(tick_val(ymin, ymax, f, logy)) + "</text>\n";
    }
    svg += "<text x=\"" + fmt2((ml + w - mr) / 2) + "\" y=\"" + fmt2(h - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
           xlabel + "</text>\n";
    svg += "<text x=\"16\" y=\"" + fmt2((mt + h - mb) / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 16 " + fmt2((mt + h - mb) / 2) + ")\">" + ylabel +
           "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            if (!pts.empty()) pts += ' ';
            pts += fmt2(px(s.x[i])) + "," + fmt2(py(s.y[i]));
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        if (!s.label.empty()) {
            const double ly = mt + 16.0 + 16.0 * static_cast<double>(si);
            svg += "<line x1=\"" + fmt2(w - mr - 120) + "\" y1=\"" + fmt2(ly - 4) +
                   "\" x2=\"" + fmt2(w - mr - 100) + "\" y2=\"" + fmt2(ly - 4) +
                   "\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"/>\n";
            svg += "<text x=\"" + fmt2(w - mr - 94) + "\" y=\"" + fmt2(ly) +
                   "\" font-family=\"sans-serif\" font-size=\"11\">" + s.label +
                   "</text>\n";
        }
    }
    svg += "</svg>\n";
    write_file(path, svg);
}

}  // namespace cqed
