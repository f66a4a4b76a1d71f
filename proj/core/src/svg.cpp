#include "molang/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "molang/error.hpp"

namespace molang {

namespace {

constexpr double kCellW = 120.0;
constexpr double kCellH = 160.0;
constexpr double kFill = 0.8;  // fraction of the cell the figure may occupy

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    // "-0.00" and "0.00" are the same point; pick one spelling
    if (std::string(buf) == "-0.00") return "0.00";
    return buf;
}

}  // namespace

std::string render_svg(const MotionSequence& motion, long columns) {
    const long m = motion.frame_count();
    const long j_count = motion.joint_count();
    if (m < 1) throw ContractError("render_svg requires at least one frame");
    if (columns < 1) throw ContractError("render_svg requires columns >= 1");

    const long stride = (m + columns - 1) / columns;
    std::vector<long> frames;
    for (long t = 0; t < m; t += stride) frames.push_back(t);
    const long panels = (long)frames.size();

    // shared scale: the largest x/y extent over the sampled frames
    double ext_x = 0.0, ext_y = 0.0;
    std::vector<double> cx(frames.size()), cy(frames.size());
    for (std::size_t p = 0; p < frames.size(); ++p) {
        double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
        for (long j = 0; j < j_count; ++j) {
            const double x = motion.positions.at(frames[p], j, 0);
            const double y = motion.positions.at(frames[p], j, 1);
            lo_x = std::min(lo_x, x);
            hi_x = std::max(hi_x, x);
            lo_y = std::min(lo_y, y);
            hi_y = std::max(hi_y, y);
        }
        cx[p] = 0.5 * (lo_x + hi_x);
        cy[p] = 0.5 * (lo_y + hi_y);
        ext_x = std::max(ext_x, hi_x - lo_x);
        ext_y = std::max(ext_y, hi_y - lo_y);
    }
    double scale = 1.0;
    if (ext_x > 1e-12 || ext_y > 1e-12)
        scale = std::min(kFill * kCellW / std::max(ext_x, 1e-12), kFill * kCellH / std::max(ext_y, 1e-12));

    const double width = kCellW * (double)panels;
    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(kCellH) +
           "\" viewBox=\"0 0 " + num(width) + " " + num(kCellH) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(kCellH) + "\" fill=\"#ffffff\"/>\n";

    for (long p = 0; p < panels; ++p) {
        const long t = frames[(std::size_t)p];
        const double ox = kCellW * (double)p + kCellW / 2.0;
        const double oy = kCellH / 2.0;
        out += "<g>\n";
        out += "<rect x=\"" + num(kCellW * (double)p) + "\" y=\"0\" width=\"" + num(kCellW) + "\" height=\"" +
               num(kCellH) + "\" fill=\"none\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        auto px = [&](long j) { return ox + scale * (motion.positions.at(t, j, 0) - cx[(std::size_t)p]); };
        auto py = [&](long j) { return oy - scale * (motion.positions.at(t, j, 1) - cy[(std::size_t)p]); };
        for (long j = 0; j < j_count; ++j) {
            long parent = motion.skeleton.parent[(std::size_t)j];
            if (parent < 0) continue;
            out += "<line x1=\"" + num(px(parent)) + "\" y1=\"" + num(py(parent)) + "\" x2=\"" + num(px(j)) +
                   "\" y2=\"" + num(py(j)) + "\" stroke=\"#333333\" stroke-width=\"2\"/>\n";
        }
        for (long j = 0; j < j_count; ++j)
            out += "<circle cx=\"" + num(px(j)) + "\" cy=\"" + num(py(j)) +
                   "\" r=\"2.5\" fill=\"#1f6fb2\"/>\n";
        out += "<text x=\"" + num(kCellW * (double)p + 4.0) + "\" y=\"" + num(kCellH - 6.0) +
               "\" font-family=\"monospace\" font-size=\"10\" fill=\"#888888\">t=" + std::to_string(t) +
               "</text>\n";
        out += "</g>\n";
    }
    out += "</svg>\n";
    return out;
}

void save_svg(const std::string& path, const std::string& svg_text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError(0, "cannot open SVG output file: " + path);
    f.write(svg_text.data(), (std::streamsize)svg_text.size());
    if (!f) throw FormatError(0, "failed writing SVG output file: " + path);
}

}  // namespace molang
