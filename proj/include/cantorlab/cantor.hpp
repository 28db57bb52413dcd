#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cantorlab/error.hpp"
#include "cantorlab/geometry.hpp"

namespace cantorlab {

// Parameters (lambda, nu) of the two-Cantor-set construction:
// C = C(lambda) in [0,1]; D = scaleD * C(lambda^nu), scaled so that the
// largest removed interval of D has length exactly 1.
struct SpaceParams {
    double lambda = 0.25;
    int nu = 2;

    SpaceParams() = default;
    SpaceParams(double lambda_, int nu_) : lambda(lambda_), nu(nu_) { validate(); }

    void validate() const {
        if (!(lambda > 0.0 && lambda < 0.5)) fail(Errc::Domain, "lambda must be in (0, 1/2)");
        if (nu < 2) fail(Errc::Domain, "nu must be an integer >= 2");
    }

    double lambdaStar() const { return lambda / (2.0 * (1.0 - lambda)); }
    double lambdaNu() const { return std::pow(lambda, nu); }
    double scaleD() const { return 1.0 / (1.0 - 2.0 * lambdaNu()); }
    double dimC() const { return std::log(2.0) / std::log(1.0 / lambda); }
    double dimD() const { return dimC() / nu; }
    // ambient bounding box of X is [0,1] x [0, scaleD]
    double ambientHeight() const { return scaleD(); }
    double diamEuclid() const { return std::hypot(1.0, scaleD()); }
};

// Surviving interval I_{k,j} of C(lambda): level k >= 0, index j in [1, 2^k],
// enumerated left to right.
struct IntervalAddress {
    int level = 0;
    std::uint64_t index = 1;

    bool operator==(const IntervalAddress&) const = default;
};

// Removed interval (closed) of D: generation g >= 0, index i in [1, 2^g],
// enumerated left to right. |J| = lambda^{nu*g}.
struct RowAddress {
    int generation = 0;
    std::uint64_t index = 1;

    bool operator==(const RowAddress&) const = default;
};

namespace cantor {

inline void checkAddress(const IntervalAddress& a) {
    if (a.level < 0 || a.level > 62) fail(Errc::AddressRange, "interval level out of range");
    if (a.index < 1 || a.index > (std::uint64_t(1) << a.level))
        fail(Errc::AddressRange, "interval index out of range for level " + std::to_string(a.level));
}

inline void checkAddress(const RowAddress& a) {
    if (a.generation < 0 || a.generation > 62) fail(Errc::AddressRange, "row generation out of range");
    if (a.index < 1 || a.index > (std::uint64_t(1) << a.generation))
        fail(Errc::AddressRange, "row index out of range for generation " + std::to_string(a.generation));
}

// Left endpoint of the surviving interval with branch digits s_0..s_{k-1}
// (0 = left child, 1 = right child): lo = (1-lambda) * sum_{s_i=1} lambda^i.
// Closed-form geometric sums keep the error at machine-epsilon scale
// independent of the level.
inline double survivingLo(double lambda, int level, std::uint64_t indexMinus1) {
    double lo = 0.0;
    double w = 1.0;
    for (int i = 0; i < level; ++i) {
        const bool right = (indexMinus1 >> (level - 1 - i)) & 1u;
        if (right) lo += (1.0 - lambda) * w;
        w *= lambda;
    }
    return lo;
}

inline Interval survivingInterval(const SpaceParams& p, const IntervalAddress& a) {
    checkAddress(a);
    const double lo = survivingLo(p.lambda, a.level, a.index - 1);
    return {lo, lo + std::pow(p.lambda, a.level)};
}

// Closed removed interval of D at generation g: the central gap of the
// level-g surviving interval of scaleD*C(lambda^nu).
inline Interval removedIntervalOfD(const SpaceParams& p, const RowAddress& a) {
    checkAddress(a);
    const double lamNu = p.lambdaNu();
    const double S = p.scaleD();
    const double survLo = S * survivingLo(lamNu, a.generation, a.index - 1);
    const double gapLo = survLo + S * std::pow(lamNu, a.generation + 1);
    return {gapLo, gapLo + std::pow(lamNu, a.generation)};
}

inline IntervalAddress parentOf(const IntervalAddress& a, int level) {
    if (level < 0 || level > a.level) fail(Errc::AddressRange, "ancestor level out of range");
    return {level, ((a.index - 1) >> (a.level - level)) + 1};
}

inline bool containsColumn(const IntervalAddress& outer, const IntervalAddress& inner) {
    if (inner.level < outer.level) return false;
    return ((inner.index - 1) >> (inner.level - outer.level)) == outer.index - 1;
}

// Address of the level-k surviving interval containing x, or false if x
// falls in a removed gap before level k. Closed intervals; gap endpoints
// resolve to the adjacent surviving interval.
inline bool locateInC(const SpaceParams& p, double x, int level, IntervalAddress& out) {
    if (x < 0.0 || x > 1.0) return false;
    double lo = 0.0, len = 1.0;
    std::uint64_t idx = 0;
    for (int i = 0; i < level; ++i) {
        const double leftHi = lo + p.lambda * len;
        const double rightLo = lo + len - p.lambda * len;
        if (x <= leftHi) {
            idx = idx << 1;
        } else if (x >= rightLo) {
            idx = (idx << 1) | 1u;
            lo = rightLo;
        } else {
            return false;
        }
        len *= p.lambda;
    }
    out = {level, idx + 1};
    return true;
}

// Exact distance from x to C(lambda), up to a recursion floor.
inline double distToC(const SpaceParams& p, double x) {
    if (x <= 0.0) return -x;
    if (x >= 1.0) return x - 1.0;
    double lo = 0.0, len = 1.0;
    while (len > 1e-300) {
        const double leftHi = lo + p.lambda * len;
        const double rightLo = lo + len - p.lambda * len;
        if (x <= leftHi) {
            len *= p.lambda;
        } else if (x >= rightLo) {
            lo = rightLo;
            len *= p.lambda;
        } else {
            return std::min(x - leftHi, rightLo - x);
        }
        if (len < 1e-15) return 0.0;
    }
    return 0.0;
}

inline double distToD(const SpaceParams& p, double y) {
    const double S = p.scaleD();
    if (y <= 0.0) return -y;
    if (y >= S) return y - S;
    const double lamNu = p.lambdaNu();
    double lo = 0.0, len = S;
    while (true) {
        const double leftHi = lo + lamNu * len;
        const double rightLo = lo + len - lamNu * len;
        if (y <= leftHi) {
            len *= lamNu;
        } else if (y >= rightLo) {
            lo = rightLo;
            len *= lamNu;
        } else {
            return std::min(y - leftHi, rightLo - y);
        }
        if (len < 1e-15) return 0.0;
    }
}

// Row of D containing y, searching generations 0..maxGen. False when y lies
// in no removed interval that shallow (i.e. y is near D or outside).
inline bool locateRow(const SpaceParams& p, double y, int maxGen, RowAddress& out) {
    const double S = p.scaleD();
    if (y < 0.0 || y > S) return false;
    const double lamNu = p.lambdaNu();
    double lo = 0.0, len = S;
    std::uint64_t idx = 0;
    for (int g = 0; g <= maxGen; ++g) {
        const double leftHi = lo + lamNu * len;
        const double rightLo = lo + len - lamNu * len;
        // closed rows: gap endpoints (which lie in D) resolve to the row
        if (y >= leftHi && y <= rightLo) {
            out = {g, idx + 1};
            return true;
        }
        if (y <= leftHi) {
            idx = idx << 1;
        } else {
            idx = (idx << 1) | 1u;
            lo = rightLo;
        }
        len *= lamNu;
    }
    return false;
}

// Cantor-Vitali function of D: the CDF of the uniform measure on D.
// Descends at most `depth` construction levels; exact dyadic value on
// removed intervals, otherwise the midpoint of the remaining 2^-depth
// bracket. Monotone non-decreasing by construction.
inline double vitali(const SpaceParams& p, double y, int depth) {
    if (depth < 1) fail(Errc::Domain, "vitali: depth must be >= 1");
    const double S = p.scaleD();
    if (y < -1e-12 || y > S + 1e-12) fail(Errc::Domain, "vitali: y outside [0, scaleD]");
    if (y <= 0.0) return 0.0;
    if (y >= S) return 1.0;
    const double lamNu = p.lambdaNu();
    double lo = 0.0, len = S;
    double value = 0.0, weight = 1.0;
    for (int level = 0; level < depth; ++level) {
        const double leftHi = lo + lamNu * len;
        const double rightLo = lo + len - lamNu * len;
        weight *= 0.5;
        if (y >= leftHi && y <= rightLo) return value + weight;
        if (y < leftHi) {
            // left child, same value prefix
        } else {
            value += weight;
            lo = rightLo;
        }
        len *= lamNu;
    }
    return value + 0.5 * weight;
}

inline double dimC(const SpaceParams& p) { return p.dimC(); }
inline double dimD(const SpaceParams& p) { return p.dimD(); }

// All rows (closed removed intervals of D) of generation <= maxGen that are
// contained in `window`; pass the full ambient interval for everything.
struct RowInterval {
    RowAddress addr;
    Interval J;
};

inline void collectRows(const SpaceParams& p, const Interval& window, int maxGen,
                        std::vector<RowInterval>& out) {
    const double S = p.scaleD();
    const double lamNu = p.lambdaNu();
    struct Node {
        double lo, len;
        int gen;
        std::uint64_t idx;
    };
    std::vector<Node> stack{{0.0, S, 0, 0}};
    while (!stack.empty()) {
        const Node n = stack.back();
        stack.pop_back();
        if (n.lo > window.hi || n.lo + n.len < window.lo) continue;
        const double leftHi = n.lo + lamNu * n.len;
        const double rightLo = n.lo + n.len - lamNu * n.len;
        const Interval gap{leftHi, rightLo};
        if (gap.containedIn(window))
            out.push_back({{n.gen, n.idx + 1}, gap});
        if (n.gen + 1 <= maxGen) {
            stack.push_back({n.lo, lamNu * n.len, n.gen + 1, n.idx << 1});
            stack.push_back({rightLo, lamNu * n.len, n.gen + 1, (n.idx << 1) | 1u});
        }
    }
}

inline std::vector<RowInterval> rowsUpTo(const SpaceParams& p, int maxGen) {
    std::vector<RowInterval> rows;
    collectRows(p, {-1.0, p.scaleD() + 1.0}, maxGen, rows);
    return rows;
}

} // namespace cantor
} // namespace cantorlab
