#pragma once

#include "vizproxy/encode.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace vizproxy {

namespace detail {

constexpr double kSvgWidth = 400;
constexpr double kSvgHeight = 300;

inline std::string fmt(double d) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << d;
    std::string s = os.str();
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s == "-0" ? "0" : s;
}

inline double channelOr(const MarkTable& v, const std::vector<std::optional<double>>& row, Channel c, double dflt) {
    auto i = v.channelIndex(c);
    return i && row[*i] ? *row[*i] : dflt;
}

inline std::string fill(double hue) { return "hsl(" + fmt(hue) + ",60%,50%)"; }

} // namespace detail

/// Debug rendering: one shape element per mark row (circle, rect, or path).
/// Arc sweeps are laid out clockwise from 12 o'clock and carry data-sweep in degrees.
inline std::string emitSvg(const MarkTable& v) {
    using namespace detail;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kSvgWidth) << "\" height=\"" << fmt(kSvgHeight)
       << "\" viewBox=\"0 0 " << fmt(kSvgWidth) << " " << fmt(kSvgHeight) << "\">\n";
    double angle = 0;
    std::optional<std::pair<double, double>> prev;
    for (const auto& row : v.rows) {
        double color = channelOr(v, row, Channel::Color, 0);
        switch (v.mark) {
        case Mark::Point: {
            double x = channelOr(v, row, Channel::X, 0);
            double y = kSvgHeight - channelOr(v, row, Channel::Y, 0);
            double r = std::sqrt(std::max(0.0, channelOr(v, row, Channel::Size, 30)) / std::numbers::pi);
            os << "  <circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(r) << "\" fill=\""
               << fill(color) << "\"/>\n";
            break;
        }
        case Mark::Bar: {
            double x = channelOr(v, row, Channel::X, 0);
            double y1 = channelOr(v, row, Channel::Y, 0);
            double y2 = channelOr(v, row, Channel::Y2, 0);
            double top = kSvgHeight - std::max(y1, y2);
            constexpr double width = 40;
            os << "  <rect x=\"" << fmt(x - width / 2) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(width)
               << "\" height=\"" << fmt(std::fabs(y1 - y2)) << "\" fill=\"" << fill(color) << "\"/>\n";
            break;
        }
        case Mark::Arc: {
            double sweep = channelOr(v, row, Channel::ThetaExtent, 0);
            constexpr double cx = kSvgWidth / 2, cy = kSvgHeight / 2, r = 120;
            auto point = [&](double deg) {
                double rad = deg * std::numbers::pi / 180.0;
                return fmt(cx + r * std::sin(rad)) + " " + fmt(cy - r * std::cos(rad));
            };
            std::string d;
            if (sweep >= 360.0 - 1e-9) {
                // A full circle needs two half arcs.
                d = "M " + point(angle) + " A 120 120 0 1 1 " + point(angle + 180) + " A 120 120 0 1 1 " +
                    point(angle + 360) + " Z";
            } else {
                d = "M " + fmt(cx) + " " + fmt(cy) + " L " + point(angle) + " A 120 120 0 " +
                    (sweep > 180 ? "1" : "0") + " 1 " + point(angle + sweep) + " Z";
            }
            os << "  <path d=\"" << d << "\" data-sweep=\"" << formatNumber(sweep) << "\" fill=\"" << fill(color) << "\"/>\n";
            angle += sweep;
            break;
        }
        case Mark::Line: {
            double x = channelOr(v, row, Channel::X, 0);
            double y = kSvgHeight - channelOr(v, row, Channel::Y, 0);
            std::string d = prev ? "M " + fmt(prev->first) + " " + fmt(prev->second) + " L " + fmt(x) + " " + fmt(y)
                                 : "M " + fmt(x) + " " + fmt(y);
            os << "  <path d=\"" << d << "\" stroke=\"" << fill(color) << "\" fill=\"none\"/>\n";
            prev = {x, y};
            break;
        }
        }
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace vizproxy
