#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cantorlab/error.hpp"
#include "cantorlab/fields.hpp"
#include "cantorlab/geometry.hpp"
#include "cantorlab/rng.hpp"
#include "cantorlab/space.hpp"

namespace cantorlab {
namespace pencils {

// Finitely truncated curve from a pencil family.
struct PolylinePath {
    std::vector<Vec2> pts;
    std::vector<double> param; // nondecreasing, same size as pts
    double lipschitzBound = 1.0;
    int truncationDepth = 0;
    bool simplifiedSameCube = false;

    struct Stage {
        std::string kind;
        int firstPt = 0;
    };
    std::vector<Stage> stages;

    double paramLo() const { return param.front(); }
    double paramHi() const { return param.back(); }

    double length() const {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += dist(pts[i], pts[i + 1]);
        return s;
    }

    Vec2 at(double t) const {
        if (t <= param.front()) return pts.front();
        if (t >= param.back()) return pts.back();
        const auto it = std::upper_bound(param.begin(), param.end(), t);
        const std::size_t i = std::size_t(it - param.begin());
        const double t0 = param[i - 1], t1 = param[i];
        const double u = (t1 > t0) ? (t - t0) / (t1 - t0) : 0.0;
        return pts[i - 1] + u * (pts[i] - pts[i - 1]);
    }

    void append(Vec2 p) {
        if (!pts.empty() && dist(pts.back(), p) < 1e-14) return;
        pts.push_back(p);
    }
    void beginStage(const std::string& kind) { stages.push_back({kind, int(pts.size())}); }

    // parameterize by cumulative chord length (Lipschitz constant 1)
    void parameterizeByArclength() {
        param.assign(pts.size(), 0.0);
        for (std::size_t i = 1; i < pts.size(); ++i) param[i] = param[i - 1] + dist(pts[i - 1], pts[i]);
        lipschitzBound = 1.0;
    }

    void reverseInPlace() {
        const int n = int(pts.size());
        std::reverse(pts.begin(), pts.end());
        std::vector<Stage> rs;
        rs.reserve(stages.size());
        for (std::size_t i = stages.size(); i-- > 0;) {
            const int end = (i + 1 < stages.size()) ? stages[i + 1].firstPt : n;
            rs.push_back({stages[i].kind, n - end});
        }
        stages = std::move(rs);
    }
};

// Slanted segments of Gamma(I) deviate from the vertical by at most
// arctan((1-2*lambda)/lambda); height-parameterized paths are Lipschitz with
// the secant of that angle.
inline double gammaLipschitz(const SpaceParams& p) {
    const double slope = (1.0 - 2.0 * p.lambda) / p.lambda;
    return std::sqrt(1.0 + slope * slope);
}

// Descent through the surviving-interval tree driven by the binary expansion
// of the relative index. Doubling and subtracting one are exact in binary
// floating point, so the digit stream never drifts.
struct Descent {
    double lo, len, frac;
    double lambda;

    Descent(const SpaceParams& p, const Interval& I, double fracIn)
        : lo(I.lo), len(I.length()), frac(fracIn), lambda(p.lambda) {}

    double position() const { return lo + frac * len; }
    Interval interval() const { return {lo, lo + len}; }

    void step() {
        if (frac >= 0.5) {
            lo += (1.0 - lambda) * len;
            frac = 2.0 * frac - 1.0;
        } else {
            frac = 2.0 * frac;
        }
        len *= lambda;
    }

    double positionAfter(int steps) {
        for (int i = 0; i < steps; ++i) step();
        return position();
    }
};

inline bool isExceptionalIndex(double frac, int depth) {
    if (frac <= 0.0 || frac >= 1.0) return false;
    double v = frac;
    for (int m = 1; m <= depth; ++m) {
        v *= 2.0;
        if (v == std::floor(v)) return true;
        if (v >= 1.0) v -= 1.0;
    }
    return false;
}

inline void requireIndex(double frac, int depth) {
    if (frac < 0.0 || frac > 1.0) fail(Errc::Domain, "index parameter outside the indexing interval");
    if (isExceptionalIndex(frac, depth))
        fail(Errc::ExceptionalParameter, "index hits a construction midpoint; perturb or resample");
}

// Cantor endpoint the path with relative index frac lands on.
inline double landingAbscissa(const SpaceParams& p, const Interval& I, double frac) {
    Descent d(p, I, frac);
    while (d.len > 1e-17) d.step();
    return d.position();
}

// Vertices of the canonical Gamma(I) path in edge coordinates: x absolute,
// y = height above the landing edge. Starts at (t, lambdaStar*|I|), drops
// lambda^{i+1}*|I|/2 per level, then a final vertical segment onto the edge.
inline std::vector<Vec2> gammaVerticesRel(const SpaceParams& p, const Interval& I, double frac, int depth) {
    requireIndex(frac, depth);
    std::vector<Vec2> v;
    v.reserve(depth + 2);
    Descent d(p, I, frac);
    double h = p.lambdaStar() * I.length();
    v.push_back({d.position(), h});
    for (int i = 0; i < depth; ++i) {
        d.step();
        h *= p.lambda;
        v.push_back({d.position(), h});
    }
    v.push_back({v.back().x, 0.0});
    return v;
}

// Truncated landing abscissa: the last slanted vertex, matching
// gammaVerticesRel at the same depth exactly.
inline double truncatedAbscissa(const SpaceParams& p, const Interval& I, double frac, int depth) {
    Descent d(p, I, frac);
    return d.positionAfter(depth);
}

// Place a Gamma(I) copy against a horizontal edge. `up` selects whether the
// copy occupies [edgeY, edgeY + lambdaStar|I|] (standing on a bottom edge) or
// hangs below a top edge; `fromEdge` traverses Cantor end -> index segment.
inline void appendGammaCopy(PolylinePath& path, const SpaceParams& p, const Interval& I, double frac,
                            int depth, double edgeY, bool up, bool fromEdge) {
    std::vector<Vec2> rel = gammaVerticesRel(p, I, frac, depth);
    if (fromEdge) std::reverse(rel.begin(), rel.end());
    for (const Vec2& r : rel) path.append({r.x, up ? edgeY + r.y : edgeY - r.y});
}

// --- Gamma(I) ---------------------------------------------------------------

inline PolylinePath gammaIFrac(const SpaceParams& p, const Interval& I, double frac, int depth) {
    PolylinePath path;
    path.truncationDepth = depth;
    path.beginStage("gammaI");
    appendGammaCopy(path, p, I, frac, depth, 0.0, true, false);
    const double top = p.lambdaStar() * I.length();
    path.param.clear();
    for (const Vec2& q : path.pts) path.param.push_back(top - q.y);
    path.lipschitzBound = gammaLipschitz(p);
    return path;
}

inline PolylinePath gammaI(const SpaceParams& p, const IntervalAddress& addr, double t, int depth) {
    const Interval I = cantor::survivingInterval(p, addr);
    if (!I.contains(t)) fail(Errc::Domain, "gammaI: t outside I");
    return gammaIFrac(p, I, (t - I.lo) / I.length(), depth);
}

// --- Gamma(Q) ---------------------------------------------------------------

inline PolylinePath gammaQFrac(const SpaceParams& p, const space::Cube& q, double frac, int depth) {
    requireIndex(frac, depth);
    const Interval I = q.rect.xSpan();
    PolylinePath path;
    path.truncationDepth = depth;
    const double ls = p.lambdaStar();
    path.beginStage("gammaQ.bottom");
    appendGammaCopy(path, p, I, frac, depth, q.rect.y0, true, true);
    path.beginStage("gammaQ.mid");
    path.append({I.lo + frac * I.length(), q.rect.y1 - ls * q.side()});
    path.beginStage("gammaQ.top");
    appendGammaCopy(path, p, I, frac, depth, q.rect.y1, false, false);
    path.param.clear();
    for (const Vec2& v : path.pts) path.param.push_back(v.y - q.rect.y0);
    path.lipschitzBound = gammaLipschitz(p);
    return path;
}

inline PolylinePath gammaQ(const SpaceParams& p, const space::Cube& q, double t, int depth) {
    const Interval I = q.rect.xSpan();
    if (!I.contains(t)) fail(Errc::Domain, "gammaQ: t outside the cube's column");
    return gammaQFrac(p, q, (t - I.lo) / I.length(), depth);
}

// --- Gamma(Q1,Q2) -----------------------------------------------------------

// eta_t between Q1 and its first large cube Q2. Rows of generation
// <= gen(Q1)+depth are rendered as Gamma(Q) crossings; deeper rows and the
// D-dust collapse onto near-vertical segments through the crossing abscissa.
inline PolylinePath gammaQ1Q2Frac(const SpaceParams& p, const space::Cube& q1, const space::Cube& q2,
                                  double frac, int depth) {
    const bool below = q2.rect.y1 <= q1.rect.y0;
    if (!space::isFirstLargeCube(p, q1, q2, below))
        fail(Errc::Precondition, "gammaQ1Q2: Q2 is not the first large cube below/above Q1");
    requireIndex(frac, depth + 8);
    const Interval I1 = q1.rect.xSpan();
    const int g1 = q1.generation();
    auto rows = space::rowsBetween(p, q1, q2, g1 + depth);
    if (below) std::reverse(rows.begin(), rows.end()); // travel order: descending y

    PolylinePath path;
    path.truncationDepth = depth;
    path.beginStage("gammaQ1Q2");
    const double yStart = below ? q1.rect.y0 : q1.rect.y1;
    const double yEnd = below ? q2.rect.y1 : q2.rect.y0;
    const double xt = landingAbscissa(p, I1, frac);
    path.append({xt, yStart});

    // crossings must hit the Cantor abscissa to machine precision: the rows
    // accumulate, so truncation slack in x would blow up the slope of the
    // connectors between nearby rows
    const int crossDepth = std::max({2, depth, int(std::ceil(-44.0 / std::log2(p.lambda)))});

    // descent states per level (travel order is not monotone in generation)
    const int baseLevel = p.nu * g1;
    int maxLevel = baseLevel;
    for (const auto& r : rows) maxLevel = std::max(maxLevel, p.nu * r.addr.generation);
    std::vector<Descent> states;
    states.reserve(maxLevel - baseLevel + 1);
    states.push_back(Descent(p, I1, frac));
    for (int lv = baseLevel; lv < maxLevel; ++lv) {
        Descent next = states.back();
        next.step();
        states.push_back(next);
    }
    for (const auto& r : rows) {
        const int rowLevel = p.nu * r.addr.generation;
        const Descent& desc = states[rowLevel - baseLevel];
        IntervalAddress col;
        if (!cantor::locateInC(p, desc.interval().mid(), rowLevel, col))
            fail(Errc::Precondition, "gammaQ1Q2: descent escaped the surviving tree");
        const space::Cube cube = space::makeCube(p, r.addr, col);
        PolylinePath cross = gammaQFrac(p, cube, desc.frac, crossDepth);
        if (below) {
            path.append({xt, cube.rect.y1});
            for (std::size_t i = cross.pts.size(); i-- > 0;) path.append(cross.pts[i]);
            path.append({xt, cube.rect.y0});
        } else {
            path.append({xt, cube.rect.y0});
            for (const Vec2& v : cross.pts) path.append(v);
            path.append({xt, cube.rect.y1});
        }
    }
    path.append({xt, yEnd});

    path.param.clear();
    for (const Vec2& v : path.pts) path.param.push_back(below ? yStart - v.y : v.y - yStart);
    path.lipschitzBound = gammaLipschitz(p) * 1.01;
    return path;
}

inline PolylinePath gammaQ1Q2(const SpaceParams& p, const space::Cube& q1, const space::Cube& q2, double t,
                              int depth) {
    const Interval I1 = q1.rect.xSpan();
    if (!I1.contains(t)) fail(Errc::Domain, "gammaQ1Q2: t outside I1");
    return gammaQ1Q2Frac(p, q1, q2, (t - I1.lo) / I1.length(), depth);
}

// --- cones Gamma(Q0;QM) -------------------------------------------------------

inline bool validConePair(const SpaceParams& p, const space::Cube& q0, const space::Cube& qm) {
    if (q0.row == qm.row) return false;
    if (!cantor::containsColumn(qm.col, q0.col)) return false;
    const bool below = qm.rect.y1 <= q0.rect.y0;
    const bool above = qm.rect.y0 >= q0.rect.y1;
    if (!below && !above) return false;
    // every row strictly between must be smaller than |J_M|
    return space::rowsBetween(p, q0, qm, qm.generation()).empty();
}

inline std::vector<space::Cube> coneChain(const SpaceParams& p, const space::Cube& q0,
                                          const space::Cube& qm) {
    if (q0.row == qm.row || !cantor::containsColumn(qm.col, q0.col))
        fail(Errc::Precondition, "cone: column/row hypotheses violated (I0 not inside I_M)");
    const bool below = qm.rect.y1 <= q0.rect.y0;
    const bool above = qm.rect.y0 >= q0.rect.y1;
    if (!below && !above) fail(Errc::Precondition, "cone: QM is neither below nor above Q0");
    if (!space::rowsBetween(p, q0, qm, qm.generation()).empty())
        fail(Errc::Precondition, "cone: a row between Q0 and QM is at least as large as J_M");
    std::vector<space::Cube> chain{q0};
    while (!space::sameCube(chain.back(), qm)) {
        if (chain.size() > 64) fail(Errc::Precondition, "cone: chain failed to reach QM");
        space::Cube next = space::firstLargeCube(p, chain.back(), below);
        if (next.generation() < qm.generation())
            fail(Errc::Precondition, "cone: first-large-cube chain overshot QM");
        chain.push_back(next);
    }
    return chain;
}

namespace detail {

struct ConeGeometry {
    std::vector<space::Cube> chain; // Q0 .. Qm = QM
    bool down = false;              // QM lies below Q0
};

inline ConeGeometry conePlan(const SpaceParams& p, const space::Cube& q0, const space::Cube& qm) {
    ConeGeometry geo;
    geo.chain = coneChain(p, q0, qm);
    geo.down = qm.rect.y1 <= q0.rect.y0;
    return geo;
}

// Cone body from the exit edge of Q0 to the entry edge of QM. The index frac
// is relative to I0 and carries through every stage by canonical bijections.
inline void appendConeBody(PolylinePath& path, const SpaceParams& p, const ConeGeometry& geo, double frac,
                           int depth) {
    const bool down = geo.down;
    const double ls = p.lambdaStar();
    const auto& chain = geo.chain;
    const std::size_t m = chain.size() - 1;
    for (std::size_t i = 1; i <= m; ++i) {
        const space::Cube& prev = chain[i - 1];
        const space::Cube& cur = chain[i];
        path.beginStage("cone.eta" + std::to_string(i));
        {
            PolylinePath eta = gammaQ1Q2Frac(p, prev, cur, frac, depth);
            for (const Vec2& v : eta.pts) path.append(v);
        }
        if (i == m) break;
        const Interval Iprev = prev.rect.xSpan();
        const Interval Icur = cur.rect.xSpan();
        const double enterY = down ? cur.rect.y1 : cur.rect.y0;
        const double exitY = down ? cur.rect.y0 : cur.rect.y1;
        path.beginStage("cone.gammaIn" + std::to_string(i));
        appendGammaCopy(path, p, Iprev, frac, depth, enterY, !down, true);
        path.beginStage("cone.delta" + std::to_string(i));
        const double segAy = down ? enterY - ls * Iprev.length() : enterY + ls * Iprev.length();
        const double segBy = down ? exitY + ls * Icur.length() : exitY - ls * Icur.length();
        path.append({Iprev.lo + frac * Iprev.length(), segAy});
        path.append({Icur.lo + frac * Icur.length(), segBy});
        path.beginStage("cone.gammaOut" + std::to_string(i));
        appendGammaCopy(path, p, Icur, frac, depth, exitY, down, false);
    }
}

} // namespace detail

// Path of Gamma(Q0;QM) for index t in I0. With m = 1 this is exactly the
// Gamma(Q0,QM) path.
inline PolylinePath coneFrac(const SpaceParams& p, const space::Cube& q0, const space::Cube& qm,
                             double frac, int depth) {
    requireIndex(frac, depth + 8);
    detail::ConeGeometry geo = detail::conePlan(p, q0, qm);
    PolylinePath path;
    path.truncationDepth = depth;
    detail::appendConeBody(path, p, geo, frac, depth);
    path.parameterizeByArclength();
    return path;
}

inline PolylinePath cone(const SpaceParams& p, const space::Cube& q0, const space::Cube& qm, double t,
                         int depth) {
    const Interval I0 = q0.rect.xSpan();
    if (!I0.contains(t)) fail(Errc::Domain, "cone: t outside I0");
    return coneFrac(p, q0, qm, (t - I0.lo) / I0.length(), depth);
}

// --- Lemma 6.4 case analysis --------------------------------------------------

enum class QMCase { A, B, C1, C2 };

inline const char* qmCaseName(QMCase c) {
    switch (c) {
        case QMCase::A: return "a";
        case QMCase::B: return "b";
        case QMCase::C1: return "c1";
        default: return "c2";
    }
}

struct QMResult {
    QMCase kind = QMCase::A;
    std::optional<space::Cube> qm; // empty in case (a)
    bool swapped = false;          // roles exchanged so |I_x| <= |I_y| internally
};

inline QMResult findQM(const SpaceParams& p, const space::Cube& qxIn, const space::Cube& qyIn) {
    if (space::sameCube(qxIn, qyIn)) fail(Errc::Precondition, "findQM: cubes must be distinct");
    space::Cube qx = qxIn, qy = qyIn;
    QMResult out;
    if (qx.side() > qy.side()) {
        std::swap(qx, qy);
        out.swapped = true;
    }
    if (cantor::containsColumn(qy.col, qx.col)) {
        auto big = space::rowsBetween(p, qx, qy, qy.generation());
        if (big.empty()) {
            out.kind = QMCase::A;
            return out;
        }
        const auto it = std::min_element(big.begin(), big.end(),
                                         [](const cantor::RowInterval& a, const cantor::RowInterval& b) {
                                             return a.addr.generation < b.addr.generation;
                                         });
        out.kind = QMCase::B;
        out.qm = space::makeCube(p, it->addr, cantor::parentOf(qy.col, p.nu * it->addr.generation));
        return out;
    }
    // disjoint columns: minimal-side cube over an ancestor column of both,
    // tie-broken by distance sum, then lowest row, then leftmost.
    IntervalAddress a = qx.col, b = qy.col;
    if (a.level > b.level) a = cantor::parentOf(a, b.level);
    if (b.level > a.level) b = cantor::parentOf(b, a.level);
    while (!(a == b)) {
        a = cantor::parentOf(a, a.level - 1);
        b = cantor::parentOf(b, b.level - 1);
    }
    const IntervalAddress lca = a;
    std::optional<space::Cube> best;
    double bestDist = 0.0;
    for (int g = lca.level / p.nu; g >= 0 && !best; --g) {
        const IntervalAddress colM = cantor::parentOf(lca, p.nu * g);
        const std::uint64_t nRows = std::uint64_t(1) << g;
        for (std::uint64_t i = 1; i <= nRows; ++i) {
            const space::Cube cand = space::makeCube(p, {g, i}, colM);
            if (!validConePair(p, qx, cand) || !validConePair(p, qy, cand)) continue;
            const double d = rectDistance(qx.rect, cand.rect) + rectDistance(qy.rect, cand.rect);
            const bool better =
                !best || d < bestDist - 1e-15 ||
                (std::abs(d - bestDist) <= 1e-15 &&
                 (cand.rect.y0 < best->rect.y0 ||
                  (cand.rect.y0 == best->rect.y0 && cand.rect.x0 < best->rect.x0)));
            if (better) {
                best = cand;
                bestDist = d;
            }
        }
    }
    if (!best) fail(Errc::Precondition, "findQM: no admissible Q_M (unexpected)");
    const double yLo = std::min(qx.rect.y1, qy.rect.y1);
    const double yHi = std::max(qx.rect.y0, qy.rect.y0);
    const bool between = (qx.row == qy.row) ? false : (best->rect.y0 >= yLo && best->rect.y1 <= yHi);
    out.kind = between ? QMCase::C1 : QMCase::C2;
    out.qm = best;
    return out;
}

// --- the double cone Gamma_{x,y} -----------------------------------------------

struct DoubleConePlan {
    Vec2 x, y;
    space::Cube qx, qy;
    QMCase kind = QMCase::A;
    bool sameCubePair = false;
    bool xIsNear = true; // case (a): cone base is x's cube
    std::optional<space::Cube> qm;
    std::optional<detail::ConeGeometry> coneX, coneY;
};

inline DoubleConePlan doubleConePlan(const SpaceParams& p, Vec2 x, Vec2 y, int G) {
    DoubleConePlan plan;
    plan.x = x;
    plan.y = y;
    auto cx = space::classifyPoint(p, x, G, 0.0);
    auto cy = space::classifyPoint(p, y, G, 0.0);
    auto* inx = std::get_if<space::InCube>(&cx);
    auto* iny = std::get_if<space::InCube>(&cy);
    if (!inx || !iny) fail(Errc::Domain, "doubleCone: endpoints must lie in cubes of X'");
    plan.qx = inx->cube;
    plan.qy = iny->cube;
    if (space::sameCube(plan.qx, plan.qy)) {
        plan.sameCubePair = true;
        return plan;
    }
    QMResult qm = findQM(p, plan.qx, plan.qy);
    plan.kind = qm.kind;
    if (qm.kind == QMCase::A) {
        plan.xIsNear = plan.qx.side() <= plan.qy.side();
        if (plan.xIsNear) {
            plan.qm = plan.qy;
            plan.coneX = detail::conePlan(p, plan.qx, plan.qy);
        } else {
            plan.qm = plan.qx;
            plan.coneY = detail::conePlan(p, plan.qy, plan.qx);
        }
        return plan;
    }
    plan.qm = qm.qm;
    plan.coneX = detail::conePlan(p, plan.qx, *plan.qm);
    plan.coneY = detail::conePlan(p, plan.qy, *plan.qm);
    return plan;
}

namespace detail {

// Delta_x: radial family from the point onto the start segment of Gamma(I_x);
// two-stage through an auxiliary segment when the point sits near the target.
inline void appendDeltaFan(PolylinePath& path, const Interval& I, Vec2 pt, double segY, double awaySign,
                           double frac, bool fromPoint) {
    const double tpos = I.lo + frac * I.length();
    const double d = std::hypot(std::max({I.lo - pt.x, 0.0, pt.x - I.hi}), pt.y - segY);
    std::vector<Vec2> leg;
    leg.push_back(pt);
    if (d < I.length() / 4.0) leg.push_back({tpos, segY + awaySign * I.length() / 2.0});
    leg.push_back({tpos, segY});
    if (!fromPoint) std::reverse(leg.begin(), leg.end());
    for (const Vec2& v : leg) path.append(v);
}

} // namespace detail

// Path of the double-cone family for the re-indexed parameter frac in [0,1].
// Realizes the nine concatenation stages (fewer in the degenerate cases);
// endpoints are exactly x and y.
inline PolylinePath doubleConePath(const SpaceParams& p, const DoubleConePlan& plan, double frac,
                                   int depth) {
    requireIndex(frac, depth + 8);
    const double ls = p.lambdaStar();
    PolylinePath path;
    path.truncationDepth = depth;

    if (plan.sameCubePair) {
        path.simplifiedSameCube = true;
        path.beginStage("deltaX");
        const Vec2 mid = 0.5 * (plan.x + plan.y);
        const double half = std::max(0.5 * dist(plan.x, plan.y), 1e-9 * plan.qx.side());
        const Interval S{std::max(plan.qx.rect.x0, mid.x - half), std::min(plan.qx.rect.x1, mid.x + half)};
        path.append(plan.x);
        path.append({S.lo + frac * S.length(), mid.y});
        path.beginStage("deltaY");
        path.append(plan.y);
        path.parameterizeByArclength();
        return path;
    }

    // near-side prologue: Delta fan, Gamma(I) copy, cone body
    auto appendNearSide = [&](Vec2 pt, const space::Cube& q, const detail::ConeGeometry& geo,
                              const char* tag) {
        const Interval I = q.rect.xSpan();
        const bool down = geo.down;
        const double exitY = down ? q.rect.y0 : q.rect.y1;
        const double segY = down ? q.rect.y0 + ls * I.length() : q.rect.y1 - ls * I.length();
        path.beginStage(std::string("delta.") + tag);
        detail::appendDeltaFan(path, I, pt, segY, down ? 1.0 : -1.0, frac, true);
        path.beginStage(std::string("gammaI.") + tag);
        appendGammaCopy(path, p, I, frac, depth, exitY, down, false);
        path.beginStage(std::string("cone.") + tag);
        detail::appendConeBody(path, p, geo, frac, depth);
    };

    // landing segment of a cone inside QM: where the Gamma(I_{m-1}) copy ends
    auto landingSegment = [&](const detail::ConeGeometry& geo, Interval& seg, double& segY) {
        const space::Cube& qm = geo.chain.back();
        const space::Cube& last = geo.chain[geo.chain.size() - 2];
        seg = last.rect.xSpan();
        segY = geo.down ? qm.rect.y1 - ls * seg.length() : qm.rect.y0 + ls * seg.length();
    };

    if (plan.kind == QMCase::A) {
        const detail::ConeGeometry& geo = plan.xIsNear ? *plan.coneX : *plan.coneY;
        const Vec2 nearPt = plan.xIsNear ? plan.x : plan.y;
        const Vec2 farPt = plan.xIsNear ? plan.y : plan.x;
        const space::Cube& nearQ = plan.xIsNear ? plan.qx : plan.qy;
        appendNearSide(nearPt, nearQ, geo, plan.xIsNear ? "x" : "y");
        Interval seg;
        double segY = 0.0;
        landingSegment(geo, seg, segY);
        path.beginStage("gammaLand");
        appendGammaCopy(path, p, seg, frac, depth, geo.down ? geo.chain.back().rect.y1 : geo.chain.back().rect.y0,
                        !geo.down, true);
        path.beginStage("deltaFar");
        detail::appendDeltaFan(path, seg, farPt, segY, geo.down ? -1.0 : 1.0, frac, false);
        if (!plan.xIsNear) path.reverseInPlace();
        path.parameterizeByArclength();
        return path;
    }

    const detail::ConeGeometry& gx = *plan.coneX;
    const detail::ConeGeometry& gy = *plan.coneY;
    const space::Cube& qm = gx.chain.back();

    appendNearSide(plan.x, plan.qx, gx, "x");

    Interval segX, segYv;
    double segXy = 0.0, segYy = 0.0;
    landingSegment(gx, segX, segXy);
    landingSegment(gy, segYv, segYy);

    path.beginStage("gammaLand.x");
    appendGammaCopy(path, p, segX, frac, depth, gx.down ? qm.rect.y1 : qm.rect.y0, !gx.down, true);

    path.beginStage("deltaM");
    const double gapX = intervalGap(segX, segYv);
    const double vGap = std::abs(segXy - segYy);
    if (gapX > 1e-15 || vGap > 1e-15) {
        const double Lm = std::max(gapX > 0 ? gapX : vGap, 1e-12);
        const Interval& bigger = segX.length() >= segYv.length() ? segX : segYv;
        double cx = std::clamp(bigger.mid(), qm.rect.x0 + Lm / 2, qm.rect.x1 - Lm / 2);
        const Interval M{cx - Lm / 2, cx + Lm / 2};
        const double yM = 0.5 * (qm.rect.y0 + qm.rect.y1);
        path.append({segX.lo + frac * segX.length(), segXy});
        path.append({M.lo + frac * M.length(), yM});
        path.append({segYv.lo + frac * segYv.length(), segYy});
    } else {
        path.append({segX.lo + frac * segX.length(), segXy});
    }

    path.beginStage("gammaLand.y");
    appendGammaCopy(path, p, segYv, frac, depth, gy.down ? qm.rect.y1 : qm.rect.y0, !gy.down, false);

    // far-side epilogue: reversed cone body, Gamma(I_y) copy, Delta fan into y
    {
        const Interval Iy = plan.qy.rect.xSpan();
        const bool down = gy.down;
        const double exitY = down ? plan.qy.rect.y0 : plan.qy.rect.y1;
        const double segY2 = down ? plan.qy.rect.y0 + ls * Iy.length() : plan.qy.rect.y1 - ls * Iy.length();
        path.beginStage("cone.y");
        {
            PolylinePath tmp;
            detail::appendConeBody(tmp, p, gy, frac, depth);
            for (std::size_t i = tmp.pts.size(); i-- > 0;) path.append(tmp.pts[i]);
        }
        path.beginStage("gammaI.y");
        appendGammaCopy(path, p, Iy, frac, depth, exitY, down, true);
        path.beginStage("delta.y");
        detail::appendDeltaFan(path, Iy, plan.y, segY2, down ? 1.0 : -1.0, frac, false);
    }
    path.parameterizeByArclength();
    return path;
}

inline PolylinePath doubleCone(const SpaceParams& p, Vec2 x, Vec2 y, double frac, int depth, int G) {
    return doubleConePath(p, doubleConePlan(p, x, y, G), frac, depth);
}

// --- line integrals and family averages -----------------------------------------

// Composite midpoint rule along each segment; O(quadStep) error for
// Lipschitz integrands.
inline double lineIntegral(const PolylinePath& path, const ScalarField& g, double quadStep) {
    if (!(quadStep > 0)) fail(Errc::Domain, "quadStep must be positive");
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < path.pts.size(); ++i) {
        const Vec2 a = path.pts[i], b = path.pts[i + 1];
        const double L = dist(a, b);
        if (L == 0.0) continue;
        const int n = std::max(1, int(std::ceil(L / quadStep)));
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += g(a + ((k + 0.5) / n) * (b - a));
        total += acc * (L / n);
    }
    return total;
}

// Monte-Carlo average of int_gamma g ds over a family given by a generator
// frac -> path, with the uniform index measure. Exceptional indices resample
// from a per-sample derived stream; summation is a fixed pairwise reduction,
// so the result is deterministic and order-independent.
inline double familyAverage(const std::function<PolylinePath(double)>& generator, const ScalarField& g,
                            int nSamples, double quadStep, std::uint64_t seed) {
    if (nSamples < 1) fail(Errc::Domain, "nSamples must be >= 1");
    std::vector<double> vals(std::size_t(nSamples), 0.0);
    for (int i = 0; i < nSamples; ++i) {
        Rng r(Rng::deriveSeed(seed, std::uint64_t(i)));
        for (int attempt = 0;; ++attempt) {
            const double frac = r.uniform();
            try {
                vals[std::size_t(i)] = lineIntegral(generator(frac), g, quadStep);
                break;
            } catch (const Error& e) {
                if (e.code() != Errc::ExceptionalParameter || attempt > 64) throw;
            }
        }
    }
    std::size_t n = vals.size();
    while (n > 1) {
        const std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i < n / 2; ++i) vals[i] = vals[2 * i] + vals[2 * i + 1];
        if (n % 2) vals[half - 1] = vals[n - 1];
        n = half;
    }
    return vals[0] / double(nSamples);
}

} // namespace pencils
} // namespace cantorlab
