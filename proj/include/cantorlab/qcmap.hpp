#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cantorlab/analysis.hpp"
#include "cantorlab/cantor.hpp"
#include "cantorlab/error.hpp"
#include "cantorlab/geometry.hpp"
#include "cantorlab/metric.hpp"
#include "cantorlab/pencils.hpp"
#include "cantorlab/space.hpp"

namespace cantorlab {
namespace qcmap {

// f(x,y) = (x + phi(y), y) with phi the Cantor-Vitali function of D.
// Constant phi on each row makes f a rigid translation on every cube.
inline Vec2 applyFUnchecked(const SpaceParams& p, Vec2 pt, int depth) {
    return {pt.x + cantor::vitali(p, pt.y, depth), pt.y};
}

inline Vec2 applyF(const SpaceParams& p, Vec2 pt, int depth, int classifyG = 10, double tol = 1e-9) {
    auto c = space::classifyPoint(p, pt, classifyG, tol);
    if (std::holds_alternative<space::Outside>(c)) fail(Errc::Domain, "applyF: point not in X");
    return applyFUnchecked(p, pt, depth);
}

// Image-side edge weights: each cube is rigidly translated, so the image
// metric reuses the domain graph topology with re-measured edge lengths.
inline std::vector<double> imageEdgeWeights(const metric::GridGraph& g, const SpaceParams& p, int depth) {
    std::vector<Vec2> fpos(g.pos.size());
    for (std::size_t i = 0; i < g.pos.size(); ++i) fpos[i] = applyFUnchecked(p, g.pos[i], depth);
    std::vector<double> w(g.edgeCount());
    for (int e = 0; e < g.edgeCount(); ++e) w[e] = dist(fpos[g.edgeV[e][0]], fpos[g.edgeV[e][1]]);
    return w;
}

struct DilatationRung {
    double r = 0.0;
    double L = 0.0; // sup image distance over d_X <= r
    double l = 0.0; // inf image distance over d_X >= r
    double H = 0.0;
};

struct DilatationLadder {
    std::vector<DilatationRung> rungs;
    double maxH = 0.0;
    double minH = std::numeric_limits<double>::infinity();
};

// Per-radius ratio L_f/l_f at x using intrinsic distances in domain and
// image (two Dijkstra sweeps from a virtual source inside x's cube).
inline DilatationLadder dilatation(const space::SpaceApprox& s, const metric::GridGraph& g,
                                   const std::vector<double>& imageWeights, Vec2 x,
                                   const std::vector<double>& radii, int depth) {
    if (radii.size() < 3) fail(Errc::Domain, "dilatation: need at least 3 radii");
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] < radii[i - 1])) fail(Errc::Domain, "dilatation: radii must decrease");
    const int cx = [&] {
        auto c = space::classifyPoint(s.params, x, s.G, 0.0);
        auto* in = std::get_if<space::InCube>(&c);
        if (!in) fail(Errc::Domain, "dilatation: x must lie in a cube");
        return s.cubeIndexOf(in->cube);
    }();
    const auto& L = g.lattices[cx];
    std::vector<std::pair<int, double>> sources;
    for (int j = 0; j <= L.ny; ++j)
        for (int i = 0; i <= L.nx; ++i) {
            const int v = g.vertexId(cx, i, j);
            sources.push_back({v, dist(x, g.pos[v])});
        }
    metric::ShortestPaths spX, spY;
    spX.run(g, sources); // same-cube seeding is isometric, so seeds agree
    spY.run(g, sources, &imageWeights);

    DilatationLadder out;
    const double minResolved = 2.0 * g.lattices[cx].pitchMax();
    for (double r : radii) {
        if (r < minResolved)
            fail(Errc::Resource, "dilatation: radius below graph resolution");
        DilatationRung rung;
        rung.r = r;
        rung.l = std::numeric_limits<double>::infinity();
        for (int v = 0; v < g.vertexCount(); ++v) {
            const double dx = spX.dist[v];
            if (!(dx < std::numeric_limits<double>::infinity())) continue;
            const double dy = spY.dist[v];
            if (dx <= r) rung.L = std::max(rung.L, dy);
            if (dx >= r) rung.l = std::min(rung.l, dy);
        }
        rung.H = rung.l > 0 ? rung.L / rung.l : std::numeric_limits<double>::infinity();
        out.maxH = std::max(out.maxH, rung.H);
        out.minH = std::min(out.minH, rung.H);
        out.rungs.push_back(rung);
    }
    return out;
}

// Variation decomposition of the first coordinate of f along eta_t.
// totalVariation is measured on nested dyadic parameter partitions; the
// absolutely continuous part is the exact x-variation of the polyline; the
// singular remainder converges to the phi-jump across the crossed D-portion.
struct AcDiagnostic {
    double totalVariation = 0.0;          // at the finest refinement
    double absolutelyContinuousPart = 0.0;
    double singularPart = 0.0;            // total - AC at the finest level
    std::vector<double> singularByLevel;  // one entry per refinement level
    bool stabilized = false;              // last two levels within 5%
};

inline AcDiagnostic acDiagnosticOnPath(const SpaceParams& p, const pencils::PolylinePath& path,
                                       int refinements, int vitaliDepth) {
    if (refinements < 2) fail(Errc::Domain, "acDiagnostic: need at least 2 refinement levels");
    AcDiagnostic out;
    for (std::size_t i = 0; i + 1 < path.pts.size(); ++i)
        out.absolutelyContinuousPart += std::abs(path.pts[i + 1].x - path.pts[i].x);
    auto F = [&](double s) {
        const Vec2 pt = path.at(s);
        return pt.x + cantor::vitali(p, std::clamp(pt.y, 0.0, p.scaleD()), vitaliDepth);
    };
    const double a = path.paramLo(), b = path.paramHi();
    for (int level = 1; level <= refinements; ++level) {
        const int n = 1 << (level + 3); // 16, 32, ... panels
        double tv = 0.0;
        double prev = F(a);
        for (int i = 1; i <= n; ++i) {
            const double cur = F(a + (b - a) * double(i) / n);
            tv += std::abs(cur - prev);
            prev = cur;
        }
        out.totalVariation = tv;
        out.singularByLevel.push_back(std::max(0.0, tv - out.absolutelyContinuousPart));
    }
    out.singularPart = out.singularByLevel.back();
    const double last = out.singularByLevel.back();
    const double prior = out.singularByLevel[out.singularByLevel.size() - 2];
    out.stabilized = last > 0 && std::abs(last - prior) <= 0.05 * std::max(last, prior);
    return out;
}

inline AcDiagnostic acDiagnostic(const SpaceParams& p, const space::Cube& q1, const space::Cube& q2,
                                 double t, int refinements, int pathDepth = 6, int vitaliDepth = 30) {
    pencils::PolylinePath path = pencils::gammaQ1Q2(p, q1, q2, t, pathDepth);
    return acDiagnosticOnPath(p, path, refinements, vitaliDepth);
}

// Box-counting of E = C x D via the construction cover: at scale
// lambda^{nu g} the cover needs 2^{nu g} columns and 2^g row pieces.
struct BoxDimensionReport {
    std::vector<int> scales;
    std::vector<double> logInvEps;
    std::vector<double> logCount;
    double dimension = 0.0;
};

inline BoxDimensionReport boxDimensionE(const SpaceParams& p, int gMax) {
    if (gMax < 2) fail(Errc::Domain, "boxDimensionE: need gMax >= 2");
    BoxDimensionReport rep;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int g = 1; g <= gMax; ++g) {
        const double eps = std::pow(p.lambda, p.nu * g);
        const double count = std::pow(2.0, p.nu * g) * std::pow(2.0, g);
        const double X = std::log(1.0 / eps), Y = std::log(count);
        rep.scales.push_back(g);
        rep.logInvEps.push_back(X);
        rep.logCount.push_back(Y);
        sx += X;
        sy += Y;
        sxx += X * X;
        sxy += X * Y;
    }
    const int n = gMax;
    rep.dimension = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return rep;
}

// Theorem 1.3 parameter solver: smallest nu with
// dimC + dimD = 2 - p exactly (lambda = 2^{-(1+1/nu)/(2-p)}) and p0 < p + eps.
struct ParamCertificate {
    SpaceParams params;
    double p = 0.0, eps = 0.0;
    double p0Value = 0.0;
    double dimSumResidual = 0.0;
    double margin = 0.0; // (p + eps) - p0
};

inline ParamCertificate solveParams(double p, double eps, int nuCap = 64) {
    if (!(p > 1.0 && p < 2.0)) fail(Errc::Domain, "solveParams: p must be in (1,2)");
    if (!(eps > 0.0)) fail(Errc::Domain, "solveParams: eps must be > 0");
    double bestMargin = -std::numeric_limits<double>::infinity();
    for (int nu = 2; nu <= nuCap; ++nu) {
        const double lambda = std::pow(2.0, -(1.0 + 1.0 / nu) / (2.0 - p));
        const SpaceParams prm(lambda, nu);
        const double thr = analysis::p0(prm);
        const double margin = (p + eps) - thr;
        bestMargin = std::max(bestMargin, margin);
        if (thr < p + eps) {
            ParamCertificate cert;
            cert.params = prm;
            cert.p = p;
            cert.eps = eps;
            cert.p0Value = thr;
            cert.dimSumResidual = std::abs(prm.dimC() + prm.dimD() - (2.0 - p));
            cert.margin = margin;
            return cert;
        }
    }
    fail(Errc::Capacity, "solveParams: nu cap " + std::to_string(nuCap) +
                             " reached; best margin " + std::to_string(bestMargin));
}

} // namespace qcmap
} // namespace cantorlab
