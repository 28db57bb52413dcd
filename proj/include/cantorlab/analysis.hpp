#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cantorlab/error.hpp"
#include "cantorlab/fields.hpp"
#include "cantorlab/geometry.hpp"
#include "cantorlab/metric.hpp"
#include "cantorlab/pencils.hpp"
#include "cantorlab/rng.hpp"
#include "cantorlab/space.hpp"

namespace cantorlab {
namespace analysis {

// --- the sharp Poincare exponent and the K_p convergence ratio ---------------

inline double p0(const SpaceParams& p) {
    const double l2 = std::log2(p.lambda);
    return (1.0 + p.nu + 2.0 * p.nu * l2) / (1.0 + p.nu * l2);
}

inline double p0(double lambda, double nu) {
    const double l2 = std::log2(lambda);
    return (1.0 + nu + 2.0 * nu * l2) / (1.0 + nu * l2);
}

// r = 2 (2^{-1/(p-1)} lambda^{(p-2)/(p-1)})^nu; r < 1 iff p > p0, r = 1 at p0.
inline double kpConvergenceRatio(const SpaceParams& prm, double p) {
    if (!(p > 1.0)) fail(Errc::Domain, "kpConvergenceRatio: p must be > 1");
    const double inner = std::pow(2.0, -1.0 / (p - 1.0)) * std::pow(prm.lambda, (p - 2.0) / (p - 1.0));
    return 2.0 * std::pow(inner, prm.nu);
}

struct KpGenerationTerm {
    int k = 0;              // row size = |I1| * lambda^{nu k}
    std::uint64_t rows = 0; // exact row count at this size
    double increment = 0.0; // contribution to the inner sum
    double partialKp = 0.0; // K_p of the sum truncated here
};

struct KpReport {
    double kp = 0.0;    // (inner sum)^{(p-1)/p}
    double inner = 0.0; // sum over Q of 2^{-pj/(p-1)} |I|^{(p-2)/(p-1)}
    std::vector<KpGenerationTerm> perGeneration;
    bool diverged = false; // partial sums exceeded the cap with p <= p0
};

// Truncated K_p(Q1,Q2) by exact row enumeration. Per row of relative depth j
// there are exactly 2^j cubes, which turns the cube sum into a row sum
// 2^{-j/(p-1)} |J|^{(p-2)/(p-1)}.
inline KpReport kpExact(const SpaceParams& prm, double p, const space::Cube& q1, const space::Cube& q2,
                        int maxGen, double divergenceCap = 1e12) {
    if (!(p > 1.0)) fail(Errc::Domain, "kpExact: p must be > 1");
    const bool below = q2.rect.y1 <= q1.rect.y0;
    if (!space::isFirstLargeCube(prm, q1, q2, below))
        fail(Errc::Precondition, "kpExact: Q2 is not the first large cube below/above Q1");
    const int g1 = q1.generation();
    auto rows = space::rowsBetween(prm, q1, q2, maxGen);
    std::map<int, std::uint64_t> counts;
    for (const auto& r : rows) ++counts[r.addr.generation - g1];

    KpReport rep;
    const double expo = (p - 2.0) / (p - 1.0);
    for (const auto& [k, n] : counts) {
        const int j = prm.nu * k;
        const double rowLen = q1.side() * std::pow(prm.lambda, j);
        const double term = double(n) * std::pow(2.0, -double(j) / (p - 1.0)) * std::pow(rowLen, expo);
        rep.inner += term;
        rep.perGeneration.push_back({k, n, term, std::pow(rep.inner, (p - 1.0) / p)});
        if (rep.inner > divergenceCap) {
            rep.diverged = true;
            break;
        }
    }
    rep.kp = std::pow(rep.inner, (p - 1.0) / p);
    if (p <= p0(prm) && rep.inner > divergenceCap) rep.diverged = true;
    return rep;
}

// Geometric-series bound of the paper: K_p <= C |I1|^{1-2/p} for p > p0.
inline double kpPaperBound(const SpaceParams& prm, double p, double i1) {
    const double r = 0.5 * kpConvergenceRatio(prm, p); // per-k ratio of 2^k inner^k is 2*inner^nu
    if (!(r < 0.5)) {
        // sum_k 2^k inner^{k nu} with ratio kpConvergenceRatio
        const double ratio = kpConvergenceRatio(prm, p);
        if (!(ratio < 1.0)) return std::numeric_limits<double>::infinity();
        const double c = ratio / (1.0 - ratio);
        return std::pow(c, (p - 1.0) / p) * std::pow(i1, 1.0 - 2.0 / p);
    }
    const double ratio = kpConvergenceRatio(prm, p);
    const double c = ratio / (1.0 - ratio);
    return std::pow(c, (p - 1.0) / p) * std::pow(i1, 1.0 - 2.0 / p);
}

// --- coarea on trapezoids ------------------------------------------------------

struct TrapezoidSpec {
    double L = 1.0;      // bottom segment [0, L] x {0}
    double ell = 1.0;    // top segment length, ell <= L
    double height = 1.0; // vertical separation
    double xTop = 0.0;   // left end of the top segment
};

struct CoareaReport {
    double lhs = 0.0; // int_0^L int_{gamma_t} g ds dt
    double rhs = 0.0; // (L/ell) int_E g dA
    double ratio = 0.0;
};

inline CoareaReport coareaCheck(const TrapezoidSpec& spec, const ScalarField& g, int nT, double quadStep) {
    if (spec.ell > spec.L) fail(Errc::Domain, "coareaCheck: ell must be <= L");
    if (spec.xTop > spec.L || spec.xTop + spec.ell < 0.0)
        fail(Errc::Domain, "coareaCheck: projections of the two segments must intersect");
    CoareaReport rep;
    // fibers: (t,0) -> (xTop + (t/L) ell, height), canonical bijection
    for (int i = 0; i < nT; ++i) {
        const double t = spec.L * (i + 0.5) / nT;
        const Vec2 a{t, 0.0};
        const Vec2 b{spec.xTop + (t / spec.L) * spec.ell, spec.height};
        const double len = dist(a, b);
        const int n = std::max(1, int(std::ceil(len / quadStep)));
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += g(a + ((k + 0.5) / n) * (b - a));
        rep.lhs += acc * (len / n) * (spec.L / nT);
    }
    // area integral over the trapezoid by horizontal slices
    const int ny = std::max(1, int(std::ceil(spec.height / quadStep)));
    double areaInt = 0.0;
    for (int j = 0; j < ny; ++j) {
        const double y = spec.height * (j + 0.5) / ny;
        const double u = y / spec.height;
        const double left = u * spec.xTop;
        const double right = spec.L + u * (spec.xTop + spec.ell - spec.L);
        if (right <= left) continue;
        const int nx = std::max(1, int(std::ceil((right - left) / quadStep)));
        double acc = 0.0;
        for (int k = 0; k < nx; ++k) acc += g({left + (right - left) * (k + 0.5) / nx, y});
        areaInt += acc * ((right - left) / nx) * (spec.height / ny);
    }
    rep.rhs = (spec.L / spec.ell) * areaInt;
    rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : 0.0;
    return rep;
}

// --- truncated maximal function -------------------------------------------------

// Average of g over B(x,r) cap X'_G by a deterministic per-cube midpoint grid;
// numerator and denominator use the same sampling so constants are exact.
inline double ballAverage(const space::SpaceApprox& s, const ScalarField& g, Vec2 x, double r,
                          int resolution) {
    double num = 0.0, den = 0.0;
    const double step = r / std::max(8, resolution);
    for (const auto& q : s.cubes) {
        if (rectPointDistance(q.rect, x) >= r) continue;
        const double x0 = std::max(q.rect.x0, x.x - r), x1 = std::min(q.rect.x1, x.x + r);
        const double y0 = std::max(q.rect.y0, x.y - r), y1 = std::min(q.rect.y1, x.y + r);
        const int nx = std::max(1, int(std::ceil((x1 - x0) / step)));
        const int nyq = std::max(1, int(std::ceil((y1 - y0) / step)));
        const double cell = ((x1 - x0) / nx) * ((y1 - y0) / nyq);
        for (int a = 0; a < nx; ++a)
            for (int b = 0; b < nyq; ++b) {
                const Vec2 pt{x0 + (x1 - x0) * (a + 0.5) / nx, y0 + (y1 - y0) * (b + 0.5) / nyq};
                if (dist(pt, x) >= r) continue;
                num += g(pt) * cell;
                den += cell;
            }
    }
    return den > 0 ? num / den : 0.0;
}

// sup over a geometric radius grid (16 per decade, 3 decades) of ball averages.
inline double truncatedMaximal(const space::SpaceApprox& s, const ScalarField& g, Vec2 x, double R,
                               int resolution = 32) {
    if (!(R > 0)) fail(Errc::Domain, "truncatedMaximal: R must be > 0");
    double best = 0.0;
    const double decayPerStep = std::pow(10.0, -1.0 / 16.0);
    double r = R;
    for (int j = 0; j < 49; ++j) {
        best = std::max(best, ballAverage(s, g, x, r, resolution));
        r *= decayPerStep;
    }
    return best;
}

// --- discrete p-modulus -----------------------------------------------------------

struct ModulusProblem {
    const metric::GridGraph* graph = nullptr;
    std::vector<metric::SnappedPath> family;
    double p = 2.0;
    double transverseWeight = 0.0; // defaults to graph->h
};

struct ModulusResult {
    double modulus = 0.0;   // objective of the returned admissible density
    double dualBound = 0.0; // certified lower bound on the discrete optimum
    double gap = 0.0;       // relative primal-dual gap at exit
    int iterations = 0;
    bool converged = false;
    double minPathIntegral = 0.0; // min over paths of int rho ds (1 after scaling)
    std::vector<int> activeEdges;
    std::vector<double> rho; // density per active edge
};

// min sum_e rho^p (len_e * h) s.t. every snapped path has int rho ds >= 1.
// Exponentiated dual ascent on path multipliers; the returned density is
// rescaled to exact admissibility, so `modulus` is a certified upper bound
// and `dualBound` a certified lower bound of the discrete optimum.
inline ModulusResult discreteModulus(const ModulusProblem& prob, double tol = 5e-3, int maxIter = 4000) {
    if (!(prob.p > 1.0)) fail(Errc::Domain, "discreteModulus: p must be > 1");
    if (prob.family.empty()) fail(Errc::Domain, "discreteModulus: family must be non-empty");
    const auto& g = *prob.graph;
    const double h = prob.transverseWeight > 0 ? prob.transverseWeight : g.h;
    const double p = prob.p;

    // active edges and per-path incidence (with multiplicity)
    std::vector<int> edgeLocal(g.edgeCount(), -1);
    std::vector<int> active;
    struct PathInc {
        std::vector<std::pair<int, double>> items; // (local edge, accumulated length)
    };
    std::vector<PathInc> inc(prob.family.size());
    for (std::size_t pi = 0; pi < prob.family.size(); ++pi) {
        std::map<int, double> acc;
        for (int e : prob.family[pi].edges)
            if (g.edgeLen[e] > 0) acc[e] += g.edgeLen[e]; // welds carry no arc length
        if (acc.empty()) fail(Errc::Domain, "discreteModulus: a path has zero graph-length");
        for (auto [e, len] : acc) {
            if (edgeLocal[e] < 0) {
                edgeLocal[e] = int(active.size());
                active.push_back(e);
            }
            inc[pi].items.push_back({edgeLocal[e], len});
        }
    }
    const int E = int(active.size());
    const int P = int(prob.family.size());
    std::vector<double> area(E);
    for (int i = 0; i < E; ++i) area[i] = g.edgeLen[active[i]] * h;

    std::vector<double> eta(P, 1.0), force(E), rho(E), lens(P);
    const double invPm1 = 1.0 / (p - 1.0);

    auto computeRho = [&]() {
        std::fill(force.begin(), force.end(), 0.0);
        for (int pi = 0; pi < P; ++pi)
            for (auto [e, len] : inc[pi].items) force[e] += eta[pi] * len;
        for (int e = 0; e < E; ++e) rho[e] = std::pow(force[e] / (p * area[e]), invPm1);
    };
    auto computeLens = [&]() {
        double mn = std::numeric_limits<double>::infinity();
        for (int pi = 0; pi < P; ++pi) {
            double L = 0.0;
            for (auto [e, len] : inc[pi].items) L += rho[e] * len;
            lens[pi] = L;
            mn = std::min(mn, L);
        }
        return mn;
    };
    auto objective = [&]() {
        double F = 0.0;
        for (int e = 0; e < E; ++e) F += area[e] * std::pow(rho[e], p);
        return F;
    };

    // scale eta so min path integral is 1 (rho scales as eta^{1/(p-1)})
    computeRho();
    double mn = computeLens();
    if (!(mn > 0)) fail(Errc::Domain, "discreteModulus: degenerate start");
    for (auto& e : eta) e *= std::pow(1.0 / mn, p - 1.0);

    ModulusResult out;
    double alpha = std::clamp(0.4 * (p - 1.0), 0.05, 0.5);
    double bestDual = -std::numeric_limits<double>::infinity();
    int sinceImprove = 0;
    for (int it = 0; it < maxIter; ++it) {
        computeRho();
        mn = computeLens();
        const double F = objective();
        const double dual = [&] {
            double s = 0.0;
            for (int pi = 0; pi < P; ++pi) s += eta[pi];
            return s - (p - 1.0) * F;
        }();
        const double primalUB = F / std::pow(mn, p);
        out.iterations = it + 1;
        if (dual > bestDual + 1e-18) {
            bestDual = dual;
            sinceImprove = 0;
        } else if (++sinceImprove >= 8) {
            alpha *= 0.5;
            sinceImprove = 0;
            if (alpha < 1e-4) alpha = 1e-4;
        }
        out.modulus = primalUB;
        out.dualBound = std::max(0.0, bestDual);
        out.gap = primalUB > 0 ? (primalUB - out.dualBound) / primalUB : 0.0;
        out.minPathIntegral = mn;
        if (out.gap < tol) {
            out.converged = true;
            break;
        }
        for (int pi = 0; pi < P; ++pi) {
            const double grad = 1.0 - lens[pi];
            eta[pi] *= std::exp(std::clamp(alpha * grad, -1.0, 1.0));
        }
    }
    // report the admissible density rho / mn
    computeRho();
    mn = computeLens();
    out.modulus = objective() / std::pow(mn, p);
    out.minPathIntegral = mn;
    out.activeEdges = active;
    out.rho.resize(E);
    for (int e = 0; e < E; ++e) out.rho[e] = rho[e] / mn;
    out.gap = out.modulus > 0 ? (out.modulus - out.dualBound) / out.modulus : 0.0;
    if (out.gap < tol) out.converged = true;
    return out;
}

// --- calibration fixtures ----------------------------------------------------------

struct ModulusFixture {
    metric::GridGraph graph;
    std::vector<metric::SnappedPath> family;
};

namespace detail {

inline metric::SnappedPath chainFromVertices(const metric::GridGraph& g, const std::vector<int>& verts) {
    metric::SnappedPath path;
    path.vertices = verts;
    for (std::size_t i = 0; i + 1 < verts.size(); ++i) {
        const int e = g.edgeBetween(verts[i], verts[i + 1]);
        if (e < 0) fail(Errc::Precondition, "chainFromVertices: vertices not adjacent");
        path.edges.push_back(e);
    }
    return path;
}

} // namespace detail

// Horizontal fiber family on [0,L] x [0,W]; continuum p-modulus is W L^{1-p}.
inline ModulusFixture rectangleFixture(double L, double W, double h) {
    ModulusFixture fx;
    fx.graph = metric::buildRectGraph({Rect{0.0, L, 0.0, W}}, h);
    const auto& lat = fx.graph.lattices[0];
    for (int j = 0; j <= lat.ny; ++j) {
        std::vector<int> verts;
        verts.reserve(lat.nx + 1);
        for (int i = 0; i <= lat.nx; ++i) verts.push_back(fx.graph.vertexId(0, i, j));
        fx.family.push_back(detail::chainFromVertices(fx.graph, verts));
    }
    return fx;
}

// Two unit squares joined through a neck of width ell at their shared edge;
// the family runs left edge to right edge via shortest paths, one per lattice
// row. Models the bow-tie pinch: the modulus collapses as ell -> 0 for
// p <= 2 and stays bounded below for p > 2.
inline ModulusFixture bowtieFixture(double ell, double h) {
    ModulusFixture fx;
    const Rect A{0.0, 1.0, 0.0, 1.0}, B{1.0, 2.0, 0.0, 1.0};
    metric::NeckSpec neck;
    neck.rectA = 0;
    neck.rectB = 1;
    neck.y0 = 0.5 - ell / 2;
    neck.y1 = 0.5 + ell / 2;
    fx.graph = metric::buildRectGraph({A, B}, h, {neck});
    const auto& la = fx.graph.lattices[0];
    const auto& lb = fx.graph.lattices[1];
    metric::ShortestPaths sp;
    for (int j = 0; j <= la.ny; ++j) {
        const int src = fx.graph.vertexId(0, 0, j);
        const int dst = fx.graph.vertexId(1, lb.nx, j);
        sp.runFromVertex(fx.graph, src);
        if (!(sp.dist[dst] < std::numeric_limits<double>::infinity())) continue;
        metric::SnappedPath path;
        int cur = dst;
        std::vector<int> redges;
        while (cur != src) {
            const int e = sp.prevEdge[cur];
            redges.push_back(e);
            cur = (fx.graph.edgeV[e][0] == cur) ? fx.graph.edgeV[e][1] : fx.graph.edgeV[e][0];
        }
        std::reverse(redges.begin(), redges.end());
        path.edges = std::move(redges);
        path.vertices = {src, dst};
        fx.family.push_back(std::move(path));
    }
    return fx;
}

// --- Gamma(Q1,Q2) modulus at a ladder of scales --------------------------------------

// Local strip complex around a Gamma(Q1,Q2) family: the cubes of
// Q(Q1,Q2) down to relDepth generations below Q1, plus thin pads just inside
// the facing edges of Q1 and Q2 so snapped paths terminate on real vertices.
struct StripComplex {
    metric::GridGraph graph;
    std::vector<Rect> cells;
    double yLo = 0.0, yHi = 0.0;

    int locate(Vec2 p) const {
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (cells[i].contains(p)) return int(i);
        return -1;
    }
};

inline StripComplex buildStripComplex(const SpaceParams& prm, const space::Cube& q1,
                                      const space::Cube& q2, int relDepth, double hRel) {
    const bool below = q2.rect.y1 <= q1.rect.y0;
    if (!space::isFirstLargeCube(prm, q1, q2, below))
        fail(Errc::Precondition, "buildStripComplex: not a first-large pair");
    StripComplex sc;
    const double yLo = below ? q2.rect.y1 : q1.rect.y1;
    const double yHi = below ? q1.rect.y0 : q2.rect.y0;
    sc.yLo = yLo;
    sc.yHi = yHi;
    const double h = hRel * q1.side();
    const double pad = 2.0 * h;

    // rows between, grouped bottom-up; pads book-end the stack
    auto rows = space::rowsBetween(prm, q1, q2, q1.generation() + relDepth);
    std::vector<std::vector<Rect>> levels;
    const Interval I1 = q1.rect.xSpan();
    levels.push_back({Rect{I1.lo, I1.hi, yLo - pad, yLo}}); // pad inside the lower cube
    for (const auto& r : rows) {
        std::vector<Rect> level;
        std::vector<cantor::RowInterval> single{r};
        const int colLevel = prm.nu * r.addr.generation;
        // cubes on this row with column inside I1
        const std::uint64_t firstJ = (q1.col.index - 1) << (colLevel - q1.col.level);
        const std::uint64_t nCols = std::uint64_t(1) << (colLevel - q1.col.level);
        for (std::uint64_t j = 0; j < nCols; ++j) {
            const Interval I = cantor::survivingInterval(prm, {colLevel, firstJ + j + 1});
            level.push_back(Rect{I.lo, I.hi, r.J.lo, r.J.hi});
        }
        levels.push_back(std::move(level));
    }
    levels.push_back({Rect{I1.lo, I1.hi, yHi, yHi + pad}}); // pad inside the upper cube

    metric::GridGraph g;
    g.h = h;
    std::vector<std::vector<int>> levelIdx;
    for (const auto& level : levels) {
        levelIdx.emplace_back();
        for (const Rect& r : level) {
            levelIdx.back().push_back(int(sc.cells.size()));
            sc.cells.push_back(r);
            metric::detail::addLattice(g, r, h);
        }
    }
    for (std::size_t li = 0; li + 1 < levelIdx.size(); ++li)
        for (int a : levelIdx[li])
            for (int b : levelIdx[li + 1]) {
                if (intervalGap(sc.cells[a].xSpan(), sc.cells[b].xSpan()) > 0) continue;
                const double pm = std::max(g.lattices[a].pitchMax(), g.lattices[b].pitchMax());
                metric::detail::stitch(g, prm, a, b, 1.01 * pm, std::max(h, pm));
            }
    g.finalize();
    sc.graph = std::move(g);
    return sc;
}

struct ModulusScalePoint {
    int scaleIndex = 0;
    double i1 = 0.0;
    double modulus = 0.0;
    double dualBound = 0.0;
    bool converged = false;
    int paths = 0;
};

struct ModulusScalingReport {
    std::vector<ModulusScalePoint> points;
    double slope = 0.0; // log(mod) vs log(|I1|) least-squares slope
    bool allPositive = true;
};

// Canonical self-similar pair at scale index g: Q1 sits on row (g, 2^g), the
// central gap of the rightmost level-g piece of D; its first large cube below
// lives on row (g-1, 2^{g-1}).
inline std::pair<space::Cube, space::Cube> canonicalPairAtScale(const SpaceParams& prm, int g) {
    if (g < 1) fail(Errc::Domain, "canonicalPairAtScale: scale index must be >= 1");
    const RowAddress rowTop{g, std::uint64_t(1) << g};
    const space::Cube q1 = space::makeCube(prm, rowTop, {prm.nu * g, 1});
    const space::Cube q2 = space::firstLargeCubeBelow(prm, q1);
    return {q1, q2};
}

inline ModulusScalingReport modulusScalingCheck(const SpaceParams& prm, double p, int gMax,
                                                int nSamples = 96, int relDepth = 2, double hRel = 1.0 / 96,
                                                std::uint64_t seed = 99, double tol = 5e-3,
                                                int maxIter = 4000) {
    if (!(p > p0(prm))) fail(Errc::Domain, "modulusScalingCheck: requires p > p0");
    if (gMax < 1) fail(Errc::Domain, "modulusScalingCheck: gMax must be >= 1");
    ModulusScalingReport rep;
    for (int g = 1; g <= gMax; ++g) {
        auto [q1, q2] = canonicalPairAtScale(prm, g);
        StripComplex sc = buildStripComplex(prm, q1, q2, relDepth, hRel);
        ModulusProblem prob;
        prob.graph = &sc.graph;
        prob.p = p;
        Rng rng(Rng::deriveSeed(seed, std::uint64_t(g)));
        const Interval I1 = q1.rect.xSpan();
        int made = 0;
        for (int attempt = 0; made < nSamples && attempt < 8 * nSamples; ++attempt) {
            const double frac = rng.uniform();
            if (pencils::isExceptionalIndex(frac, relDepth + 10)) continue;
            pencils::PolylinePath path = pencils::gammaQ1Q2Frac(prm, q1, q2, frac, relDepth + 1);
            auto snapped = metric::snapToGraph(sc.graph, path.pts,
                                               [&sc](Vec2 pt) { return sc.locate(pt); }, sc.graph.h / 2);
            if (snapped.edges.empty()) continue;
            prob.family.push_back(std::move(snapped));
            ++made;
        }
        ModulusResult res = discreteModulus(prob, tol, maxIter);
        ModulusScalePoint pt;
        pt.scaleIndex = g;
        pt.i1 = I1.length();
        pt.modulus = res.modulus;
        pt.dualBound = res.dualBound;
        pt.converged = res.converged;
        pt.paths = int(prob.family.size());
        rep.allPositive = rep.allPositive && res.modulus > 0;
        rep.points.push_back(pt);
    }
    // least-squares slope of log(mod) vs log(i1)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = int(rep.points.size());
    for (const auto& pt : rep.points) {
        const double X = std::log(pt.i1), Y = std::log(std::max(pt.modulus, 1e-300));
        sx += X;
        sy += Y;
        sxx += X * X;
        sxy += X * Y;
    }
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return rep;
}

// --- necessity witnesses -------------------------------------------------------------

struct NecessityWitness {
    int k = 0;
    std::uint64_t Nk = 0;
    double rowLen = 0.0; // lambda^{k nu}
    double slope = 0.0;  // 1 / (Nk * rowLen)
    std::shared_ptr<std::vector<Interval>> rows; // sorted by y
    std::vector<RowAddress> rowAddrs;

    double u(double y) const {
        const auto& R = *rows;
        if (R.empty()) return 0.0;
        // index of first row with lo > y
        std::size_t i = std::size_t(std::upper_bound(R.begin(), R.end(), y,
                                                     [](double v, const Interval& J) { return v < J.lo; }) -
                                    R.begin());
        if (i == 0) return 0.0;
        const Interval& J = R[i - 1];
        const double base = double(i - 1) / double(Nk);
        if (y >= J.hi) return double(i) / double(Nk);
        return base + (y - J.lo) / J.length() / double(Nk);
    }
    double g(double y) const {
        const auto& R = *rows;
        std::size_t i = std::size_t(std::upper_bound(R.begin(), R.end(), y,
                                                     [](double v, const Interval& J) { return v < J.lo; }) -
                                    R.begin());
        if (i == 0) return 0.0;
        return (y <= R[i - 1].hi) ? slope : 0.0;
    }
    ScalarField uField() const {
        return ScalarField::ofY([w = *this](double y) { return w.u(y); });
    }
    ScalarField gField() const {
        return ScalarField::ofY([w = *this](double y) { return w.g(y); });
    }
};

// J_k: rows of size lambda^{k nu} inside [inf J0 / 2, inf J0]. Exact
// enumeration; N_k = 2^{k-2} for k >= 2 and the k = 1 window is empty.
inline NecessityWitness necessityWitness(const SpaceParams& p, int k, int G) {
    if (k < 1) fail(Errc::Domain, "necessityWitness: k must be >= 1");
    if (k > G) fail(Errc::Domain, "necessityWitness: generation k exceeds truncation G");
    const double infJ0 = p.scaleD() * p.lambdaNu();
    std::vector<cantor::RowInterval> all;
    cantor::collectRows(p, {infJ0 / 2.0, infJ0}, k, all);
    NecessityWitness w;
    w.k = k;
    w.rowLen = std::pow(p.lambdaNu(), k);
    w.rows = std::make_shared<std::vector<Interval>>();
    for (const auto& r : all) {
        if (r.addr.generation != k) continue;
        w.rows->push_back(r.J);
        w.rowAddrs.push_back(r.addr);
    }
    std::sort(w.rows->begin(), w.rows->end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::sort(w.rowAddrs.begin(), w.rowAddrs.end(),
              [](const RowAddress& a, const RowAddress& b) { return a.index < b.index; });
    w.Nk = w.rows->size();
    if (w.Nk == 0)
        fail(Errc::Precondition, "necessityWitness: empty witness window at k=" + std::to_string(k) +
                                     " (N_k = 0; the construction starts at k = 2)");
    w.slope = 1.0 / (double(w.Nk) * w.rowLen);
    return w;
}

// Exact energy int g_k^q dmu = N_k^{1-q} 2^{k nu} lambda^{k nu (2-q)}.
inline double necessityEnergy(const SpaceParams& p, int k, double q, int G) {
    const NecessityWitness w = necessityWitness(p, k, G);
    return std::pow(double(w.Nk), 1.0 - q) * std::pow(2.0, double(k) * p.nu) *
           std::pow(p.lambda, double(k) * p.nu * (2.0 - q));
}

// e(q): log2(energy) growth per unit k when N_k = c 2^k exactly.
inline double energyExponent(const SpaceParams& p, double q) {
    const double l2 = std::log2(p.lambda);
    return (1.0 + p.nu + 2.0 * p.nu * l2) - q * (1.0 + p.nu * l2);
}

// Grid-quadrature cross-check of the energy (per-cube midpoint sampling).
inline double quadratureEnergy(const space::SpaceApprox& s, const NecessityWitness& w, double q,
                               int samplesPerCube = 3) {
    double total = 0.0;
    const int m = samplesPerCube;
    for (const auto& cube : s.cubes) {
        // cheap reject: cube's row must overlap the witness rows in y
        if (cube.rect.y1 < w.rows->front().lo || cube.rect.y0 > w.rows->back().hi) continue;
        const double cell = (cube.side() / m) * (cube.side() / m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                const double y = cube.rect.y0 + cube.side() * (b + 0.5) / m;
                const double gv = w.g(y);
                if (gv > 0) total += std::pow(gv, q) * cell;
            }
    }
    return total;
}

// --- Poincare probe ---------------------------------------------------------------

struct BallSpec {
    bool wholeSpace = true;
    Vec2 center;
    double radius = 0.0;
};

struct PoincareReport {
    double lhs = 0.0; // avg_B |u - u_B|
    double rhs = 0.0; // diam(B) (avg_B g^p)^{1/p}
    double ratio = 0.0;
    double uMean = 0.0;
    double mass = 0.0;
};

inline PoincareReport poincareProbe(const space::SpaceApprox& s, const ScalarField& u, const ScalarField& g,
                                    const BallSpec& ball, double p, int samplesPerCube = 3) {
    const int m = std::max(1, samplesPerCube);
    auto inBall = [&](Vec2 pt) { return ball.wholeSpace || dist(pt, ball.center) < ball.radius; };
    double mass = 0.0, uSum = 0.0;
    auto forEachSample = [&](auto&& fn) {
        for (const auto& cube : s.cubes) {
            if (!ball.wholeSpace && rectPointDistance(cube.rect, ball.center) >= ball.radius) continue;
            const double cell = (cube.side() / m) * (cube.side() / m);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) {
                    const Vec2 pt{cube.rect.x0 + cube.side() * (a + 0.5) / m,
                                  cube.rect.y0 + cube.side() * (b + 0.5) / m};
                    if (!inBall(pt)) continue;
                    fn(pt, cell);
                }
        }
    };
    forEachSample([&](Vec2 pt, double cell) {
        mass += cell;
        uSum += u(pt) * cell;
    });
    PoincareReport rep;
    rep.mass = mass;
    if (mass <= 0) return rep;
    rep.uMean = uSum / mass;
    double dev = 0.0, gp = 0.0;
    forEachSample([&](Vec2 pt, double cell) {
        dev += std::abs(u(pt) - rep.uMean) * cell;
        gp += std::pow(g(pt), p) * cell;
    });
    const double diam = ball.wholeSpace ? s.params.diamEuclid() : 2.0 * ball.radius;
    rep.lhs = dev / mass;
    rep.rhs = diam * std::pow(gp / mass, 1.0 / p);
    rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : 0.0;
    return rep;
}

// --- pointwise estimate probe -------------------------------------------------------

struct PointwiseReport {
    double lhs = 0.0; // avg over Gamma_{x,y} of int g ds
    double rhs = 0.0; // d(x,y) [ (M g^p(x))^{1/p} + (M g^p(y))^{1/p} ]
    double ratio = 0.0;
    const char* qmCase = "";
};

inline PointwiseReport pointwiseEstimateCheck(const space::SpaceApprox& s, Vec2 x, Vec2 y,
                                              const ScalarField& g, double p, int nSamples,
                                              int depth = 6, double quadStep = 1e-3,
                                              double dilation = 8.0, std::uint64_t seed = 1234,
                                              int maximalResolution = 24) {
    const SpaceParams& prm = s.params;
    pencils::DoubleConePlan plan = pencils::doubleConePlan(prm, x, y, s.G);
    PointwiseReport rep;
    rep.qmCase = plan.sameCubePair ? "same-cube" : pencils::qmCaseName(plan.kind);
    rep.lhs = pencils::familyAverage(
        [&](double frac) { return pencils::doubleConePath(prm, plan, frac, depth); }, g, nSamples, quadStep,
        seed);
    const double d = dist(x, y);
    ScalarField gp{[&g, p](Vec2 pt) { return std::pow(g(pt), p); }};
    const double mx = truncatedMaximal(s, gp, x, dilation * d, maximalResolution);
    const double my = truncatedMaximal(s, gp, y, dilation * d, maximalResolution);
    rep.rhs = d * (std::pow(mx, 1.0 / p) + std::pow(my, 1.0 / p));
    rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : 0.0;
    return rep;
}

} // namespace analysis
} // namespace cantorlab
