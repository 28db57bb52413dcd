#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "cantorlab/cantor.hpp"
#include "cantorlab/error.hpp"
#include "cantorlab/geometry.hpp"

namespace cantorlab {
namespace space {

// Closed axis-aligned square I x J of the complex. col.level = nu * row.generation.
struct Cube {
    RowAddress row;
    IntervalAddress col;
    Rect rect;

    int generation() const { return row.generation; }
    double side() const { return rect.width(); }
};

inline Cube makeCube(const SpaceParams& p, const RowAddress& row, const IntervalAddress& col) {
    if (col.level != p.nu * row.generation)
        fail(Errc::AddressRange, "cube column level must equal nu * row generation");
    const Interval I = cantor::survivingInterval(p, col);
    const Interval J = cantor::removedIntervalOfD(p, row);
    return {row, col, {I.lo, I.hi, J.lo, J.hi}};
}

struct RowEntry {
    RowAddress addr;
    Interval J;
    int firstCube = 0; // index into SpaceApprox::cubes
};

// Truncation of X' to rows of generation <= G. Immutable after construction.
struct SpaceApprox {
    SpaceParams params;
    int G = 0;
    std::vector<RowEntry> rows; // sorted by J.lo
    std::vector<Cube> cubes;    // grouped by row, columns left to right

    std::size_t cubesOnRow(int rowIdx) const {
        return std::size_t(1) << (params.nu * rows[rowIdx].addr.generation);
    }
    const Cube& cubeAt(int rowIdx, std::uint64_t colIndex1) const {
        return cubes[rows[rowIdx].firstCube + colIndex1 - 1];
    }
    int rowIndexOf(const RowAddress& a) const {
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].addr == a) return int(i);
        fail(Errc::AddressRange, "row not present in SpaceApprox");
    }
    int cubeIndexOf(const Cube& q) const {
        const int ri = rowIndexOf(q.row);
        return rows[ri].firstCube + int(q.col.index) - 1;
    }
};

inline std::uint64_t cubeCount(int nu, int G) {
    std::uint64_t n = 0;
    for (int g = 0; g <= G; ++g) n += std::uint64_t(1) << ((1 + nu) * g);
    return n;
}

inline SpaceApprox enumerateCubes(const SpaceParams& p, int G,
                                  std::uint64_t budget = 8u << 20) {
    p.validate();
    if (G < 0) fail(Errc::Domain, "G must be >= 0");
    const std::uint64_t count = cubeCount(p.nu, G);
    if (count > budget)
        fail(Errc::Resource, "cube budget exceeded: " + std::to_string(count) + " cubes requested, budget " +
                                 std::to_string(budget));

    SpaceApprox s;
    s.params = p;
    s.G = G;
    std::vector<cantor::RowInterval> rows = cantor::rowsUpTo(p, G);
    std::sort(rows.begin(), rows.end(),
              [](const cantor::RowInterval& a, const cantor::RowInterval& b) { return a.J.lo < b.J.lo; });
    s.rows.reserve(rows.size());
    s.cubes.reserve(count);
    for (const auto& r : rows) {
        RowEntry e{r.addr, r.J, int(s.cubes.size())};
        const int level = p.nu * r.addr.generation;
        const std::uint64_t nCols = std::uint64_t(1) << level;
        for (std::uint64_t j = 1; j <= nCols; ++j) {
            const Interval I = cantor::survivingInterval(p, {level, j});
            s.cubes.push_back({r.addr, {level, j}, {I.lo, I.hi, r.J.lo, r.J.hi}});
        }
        s.rows.push_back(e);
    }
    return s;
}

struct InCube {
    Cube cube;
};
struct InSingularSet {};
struct Outside {};
using Classification = std::variant<InCube, InSingularSet, Outside>;

// Closed cubes win over the singular set: boundary points of E that belong
// to a cube classify as InCube.
inline Classification classifyPoint(const SpaceParams& p, Vec2 pt, int G, double tol) {
    if (tol < 0) fail(Errc::Domain, "tol must be >= 0");
    RowAddress row;
    if (cantor::locateRow(p, pt.y, G, row)) {
        IntervalAddress col;
        if (cantor::locateInC(p, pt.x, p.nu * row.generation, col)) {
            return InCube{makeCube(p, row, col)};
        }
        return Outside{};
    }
    if (cantor::distToC(p, pt.x) <= tol && cantor::distToD(p, pt.y) <= tol) return InSingularSet{};
    return Outside{};
}

inline bool sameCube(const Cube& a, const Cube& b) { return a.row == b.row && a.col == b.col; }

// mu(X'_G) = sum_{g<=G} (2^{1+nu} lambda^{2 nu})^g. The series ratio is
// < 2^{1-nu} <= 1/2 for every admissible parameter pair.
inline double generationMeasureRatio(const SpaceParams& p) {
    return std::pow(2.0, 1 + p.nu) * std::pow(p.lambda, 2 * p.nu);
}

inline double totalMeasure(const SpaceParams& p, int G) {
    if (G < 0) fail(Errc::Domain, "G must be >= 0");
    const double t = generationMeasureRatio(p);
    if (t >= 1.0) fail(Errc::Domain, "divergent measure series (cannot occur for valid params)");
    double sum = 0.0, term = 1.0;
    for (int g = 0; g <= G; ++g) {
        sum += term;
        term *= t;
    }
    return sum;
}

inline double totalMeasureLimit(const SpaceParams& p) {
    const double t = generationMeasureRatio(p);
    return 1.0 / (1.0 - t);
}

inline double measureTailBound(const SpaceParams& p, int G) {
    const double t = generationMeasureRatio(p);
    return std::pow(t, G + 1) / (1.0 - t);
}

struct BallMeasure {
    double value = 0.0;           // mu(B(center,r) cap X'_G), exact per cube
    double truncationDeficit = 0; // global bound on the mass of generations > G
};

inline BallMeasure ballMeasure(const SpaceApprox& s, Vec2 center, double r) {
    if (!(r > 0)) fail(Errc::Domain, "radius must be positive");
    BallMeasure out;
    for (const Cube& q : s.cubes) {
        if (rectPointDistance(q.rect, center) >= r) continue;
        out.value += circleRectArea(q.rect, center, r);
    }
    out.truncationDeficit = measureTailBound(s.params, s.G);
    return out;
}

// First large cube below Q1: the cube over the nearest strictly larger row
// below J1, on the column containing I1. Rows strictly between are all of
// size <= |J1|.
namespace detail {

// Largest-sup row below `yLimit` with generation <= maxGen (i.e. size >= lambda^{nu*maxGen}).
inline bool nearestLargerRow(const SpaceParams& p, double yLimit, int maxGen, bool below,
                             cantor::RowInterval& best) {
    std::vector<cantor::RowInterval> rows = cantor::rowsUpTo(p, maxGen);
    bool found = false;
    for (const auto& r : rows) {
        if (below) {
            if (r.J.hi >= yLimit) continue;
            if (!found || r.J.hi > best.J.hi) {
                best = r;
                found = true;
            }
        } else {
            if (r.J.lo <= yLimit) continue;
            if (!found || r.J.lo < best.J.lo) {
                best = r;
                found = true;
            }
        }
    }
    return found;
}

} // namespace detail

inline Cube firstLargeCube(const SpaceParams& p, const Cube& q1, bool below) {
    const int g1 = q1.generation();
    if (g1 == 0) fail(Errc::Boundary, "no larger row beyond the generation-0 cube");
    cantor::RowInterval r2;
    const double limit = below ? q1.rect.y0 : q1.rect.y1;
    if (!detail::nearestLargerRow(p, limit, g1 - 1, below, r2))
        fail(Errc::Boundary, below ? "no large cube below" : "no large cube above");
    const IntervalAddress col2 = cantor::parentOf(q1.col, p.nu * r2.addr.generation);
    return makeCube(p, r2.addr, col2);
}

inline Cube firstLargeCubeBelow(const SpaceParams& p, const Cube& q1) { return firstLargeCube(p, q1, true); }
inline Cube firstLargeCubeAbove(const SpaceParams& p, const Cube& q1) { return firstLargeCube(p, q1, false); }

inline bool isFirstLargeCube(const SpaceParams& p, const Cube& q1, const Cube& q2, bool below) {
    if (q1.generation() == 0) return false;
    try {
        return sameCube(firstLargeCube(p, q1, below), q2);
    } catch (const Error&) {
        return false;
    }
}

// Rows strictly inside the open vertical strip between Q1 and Q2, generation <= maxGen.
inline std::vector<cantor::RowInterval> rowsBetween(const SpaceParams& p, const Cube& q1, const Cube& q2,
                                                    int maxGen) {
    const double lo = std::min(q1.rect.y1, q2.rect.y1);
    const double hi = std::max(q1.rect.y0, q2.rect.y0);
    std::vector<cantor::RowInterval> rows;
    cantor::collectRows(p, {lo, hi}, maxGen, rows);
    std::erase_if(rows, [&](const cantor::RowInterval& r) { return r.J.lo <= lo || r.J.hi >= hi; });
    std::sort(rows.begin(), rows.end(),
              [](const cantor::RowInterval& a, const cantor::RowInterval& b) { return a.J.lo < b.J.lo; });
    return rows;
}

} // namespace space
} // namespace cantorlab
