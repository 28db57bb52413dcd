#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "cantorlab/geometry.hpp"
#include "cantorlab/pencils.hpp"
#include "cantorlab/space.hpp"

namespace cantorlab {
namespace svg {

// Mathematical orientation: y grows upward. World coordinates are flipped at
// write time; viewBox is the ambient rectangle scaled to `pixelWidth`.
class Writer {
public:
    Writer(Rect world, double pixelWidth = 1024.0)
        : world_(world), scale_(pixelWidth / world.width()) {}

    void rect(const Rect& r, const std::string& fill, const std::string& stroke = "none",
              double strokeWidth = 0.0) {
        body_ << "<rect x=\"" << px(r.x0 - world_.x0) << "\" y=\"" << px(world_.y1 - r.y1) << "\" width=\""
              << px(r.width()) << "\" height=\"" << px(r.height()) << "\" fill=\"" << fill << "\" stroke=\""
              << stroke << "\" stroke-width=\"" << px(strokeWidth) << "\"/>\n";
    }

    void polyline(const std::vector<Vec2>& pts, const std::string& stroke, double strokeWidth) {
        body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << px(strokeWidth)
              << "\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) body_ << ' ';
            body_ << px(pts[i].x - world_.x0) << ',' << px(world_.y1 - pts[i].y);
        }
        body_ << "\"/>\n";
    }

    void path(const pencils::PolylinePath& p, const std::vector<std::string>& stagePalette,
              double strokeWidth) {
        if (p.stages.empty() || stagePalette.empty()) {
            polyline(p.pts, "#333333", strokeWidth);
            return;
        }
        for (std::size_t si = 0; si < p.stages.size(); ++si) {
            const int from = p.stages[si].firstPt == 0 ? 0 : p.stages[si].firstPt - 1;
            const int to = (si + 1 < p.stages.size()) ? p.stages[si + 1].firstPt : int(p.pts.size());
            if (to - from < 2) continue;
            std::vector<Vec2> seg(p.pts.begin() + from, p.pts.begin() + to);
            polyline(seg, stagePalette[si % stagePalette.size()], strokeWidth);
        }
    }

    std::string str() const {
        std::ostringstream out;
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" "
            << "viewBox=\"0 0 " << px(world_.width()) << ' ' << px(world_.height()) << "\">\n"
            << body_.str() << "</svg>\n";
        return out.str();
    }

    static const std::vector<std::string>& palette() {
        static const std::vector<std::string> colors = {"#1b6ca8", "#c0392b", "#27ae60", "#8e44ad",
                                                        "#d35400", "#16a085", "#7f8c8d", "#2c3e50"};
        return colors;
    }

private:
    std::string px(double v) const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v * scale_);
        return buf;
    }

    Rect world_;
    double scale_;
    std::ostringstream body_;
};

inline std::string renderSpace(const space::SpaceApprox& s,
                               const std::vector<pencils::PolylinePath>& paths = {}) {
    Writer w(Rect{0.0, 1.0, 0.0, s.params.ambientHeight()});
    for (const auto& q : s.cubes) w.rect(q.rect, "#d7dde4", "#9aa5b1", q.side() * 0.01);
    for (std::size_t i = 0; i < paths.size(); ++i) w.path(paths[i], Writer::palette(), 0.0015);
    return w.str();
}

} // namespace svg
} // namespace cantorlab
