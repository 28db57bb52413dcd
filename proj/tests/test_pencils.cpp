#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "cantorlab/pencils.hpp"
#include "cantorlab/rng.hpp"

using namespace cantorlab;
using Catch::Approx;

namespace {
const SpaceParams kQuarter(0.25, 2);

double chordLipschitz(const pencils::PolylinePath& p) {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < p.pts.size(); ++i) {
        const double dp = p.param[i + 1] - p.param[i];
        if (dp <= 0) continue;
        worst = std::max(worst, dist(p.pts[i], p.pts[i + 1]) / dp);
    }
    return worst;
}
} // namespace

TEST_CASE("gammaI endpoint cases") {
    const IntervalAddress root{0, 1};
    const double ls = kQuarter.lambdaStar();

    auto left = pencils::gammaI(kQuarter, root, 0.0, 8);
    for (const Vec2& v : left.pts) CHECK(v.x == 0.0);
    CHECK(left.pts.front().y == Approx(ls));
    CHECK(left.pts.back().y == 0.0);

    auto right = pencils::gammaI(kQuarter, root, 1.0, 8);
    for (const Vec2& v : right.pts) CHECK(v.x == 1.0);

    // lambda=1/4, t=1/3: alternating digits, landing at lambda/(1+lambda)=0.2
    CHECK(pencils::landingAbscissa(kQuarter, {0.0, 1.0}, 1.0 / 3.0) == Approx(0.2));
    auto mid = pencils::gammaI(kQuarter, root, 1.0 / 3.0, 30);
    CHECK(mid.pts.back().x == Approx(0.2).margin(1e-8));

    CHECK_THROWS_AS(pencils::gammaI(kQuarter, root, 0.5, 8), Error); // midpoint excluded
    CHECK_THROWS_AS(pencils::gammaI(kQuarter, root, 1.5, 8), Error); // outside I
}

TEST_CASE("gammaI landing property and Lipschitz bound") {
    Rng rng(3);
    const double L = pencils::gammaLipschitz(kQuarter);
    for (int depth : {4, 8, 12}) {
        for (int i = 0; i < 40; ++i) {
            const double frac = rng.uniform();
            if (pencils::isExceptionalIndex(frac, depth)) continue;
            auto path = pencils::gammaIFrac(kQuarter, {0.0, 1.0}, frac, depth);
            CHECK(cantor::distToC(kQuarter, path.pts.back().x) <= std::pow(kQuarter.lambda, depth));
            CHECK(chordLipschitz(path) <= L * (1 + 1e-9));
            CHECK(path.length() <= L * kQuarter.lambdaStar() * (1 + 1e-9));
        }
    }
}

TEST_CASE("gammaI self-similarity: child paths are tails of parent paths") {
    // I' = I_{2,3} (digits 1,0); index frac' in I' maps to frac = (2+frac')/4
    const Interval I{0.0, 1.0};
    const Interval Ip = cantor::survivingInterval(kQuarter, {2, 3});
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const double fracP = rng.uniform();
        if (pencils::isExceptionalIndex(fracP, 12)) continue;
        const double frac = (2.0 + fracP) / 4.0;
        auto parent = pencils::gammaIFrac(kQuarter, I, frac, 8);
        auto child = pencils::gammaIFrac(kQuarter, Ip, fracP, 6);
        // parent vertex at stage 2 onward matches the child path shifted in y
        REQUIRE(parent.pts.size() >= child.pts.size() + 2);
        for (std::size_t k = 0; k < child.pts.size() - 1; ++k) {
            CHECK(parent.pts[k + 2].x == Approx(child.pts[k].x).margin(1e-12));
            CHECK(parent.pts[k + 2].y == Approx(child.pts[k].y).margin(1e-12));
        }
    }
}

TEST_CASE("layer decomposition: |L_ij| = 2^-i, |L'_ij| = lambda^{i-1}/2, stable area ratio") {
    // construction-level enumeration for layers i <= 5: the stage-i segments
    // of a dyadic index block span half the level-(i-1) interval on top and
    // the full level-i interval at the bottom
    const Interval I{0.0, 1.0};
    const double lam = kQuarter.lambda;
    for (int i = 1; i <= 5; ++i) {
        const double blockLen = std::pow(0.5, i);
        std::vector<double> ratios;
        for (std::uint64_t j : {std::uint64_t(0), std::uint64_t(1), (std::uint64_t(1) << i) - 1}) {
            const double lo = double(j) * blockLen;
            const double delta = 1e-9 * blockLen;
            auto a = pencils::gammaIFrac(kQuarter, I, lo + delta, i + 1);
            auto b = pencils::gammaIFrac(kQuarter, I, lo + blockLen - delta, i + 1);
            const double topWidth = std::abs(b.pts[i - 1].x - a.pts[i - 1].x);
            const double botWidth = std::abs(b.pts[i].x - a.pts[i].x);
            CHECK(topWidth == Approx(std::pow(lam, i - 1) / 2).epsilon(1e-5));
            CHECK(botWidth == Approx(std::pow(lam, i)).epsilon(1e-5));
            const double height = a.pts[i - 1].y - a.pts[i].y;
            CHECK(height == Approx(std::pow(lam, i) / 2).epsilon(1e-9));
            const double area = 0.5 * (topWidth + botWidth) * height;
            ratios.push_back(std::pow(2.0, i) * area / (std::pow(2.0, i) * std::pow(lam, 2 * i)));
        }
        // mu(E_i) proportional to 2^i lambda^{2i}: the per-piece ratio is the
        // lambda-only constant (1+2 lambda)/(8 lambda)
        for (double r : ratios) CHECK(r == Approx((1 + 2 * lam) / (8 * lam)).epsilon(1e-4));
    }
}

TEST_CASE("gammaQ joins the same Cantor point on both edges") {
    const space::Cube q = space::makeCube(kQuarter, {0, 1}, {0, 1});
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const double frac = rng.uniform();
        if (pencils::isExceptionalIndex(frac, 10)) continue;
        auto path = pencils::gammaQFrac(kQuarter, q, frac, 10);
        CHECK(path.pts.front().x == Approx(path.pts.back().x).margin(1e-14));
        CHECK(path.pts.front().y == Approx(q.rect.y0));
        CHECK(path.pts.back().y == Approx(q.rect.y1));
        CHECK(path.length() <= pencils::gammaLipschitz(kQuarter) * q.side() * (1 + 1e-9));
        CHECK(chordLipschitz(path) <= pencils::gammaLipschitz(kQuarter) * (1 + 1e-9));
    }
    // left edge crossing is a straight vertical
    auto leftPath = pencils::gammaQFrac(kQuarter, q, 0.0, 10);
    for (const Vec2& v : leftPath.pts) CHECK(v.x == q.rect.x0);
}

TEST_CASE("gammaQ1Q2 structure") {
    const space::Cube q1 = space::makeCube(kQuarter, {1, 2}, {2, 1});
    const space::Cube q2 = space::firstLargeCubeBelow(kQuarter, q1);

    // wrong pair is rejected
    const space::Cube q1b = space::makeCube(kQuarter, {1, 1}, {2, 1});
    CHECK_THROWS_AS(pencils::gammaQ1Q2Frac(kQuarter, q1b, q1, 0.3, 3), Error);

    // leftmost index: vertical segment on the shared left edge
    auto leftPath = pencils::gammaQ1Q2Frac(kQuarter, q1, q2, 0.0, 3);
    for (const Vec2& v : leftPath.pts) CHECK(v.x == Approx(q1.rect.x0).margin(1e-14));
    CHECK(leftPath.pts.front().y == Approx(q1.rect.y0));
    CHECK(leftPath.pts.back().y == Approx(q2.rect.y1));

    // vertical extent comparable to |I1|
    const double extent = q1.rect.y0 - q2.rect.y1;
    CHECK(extent > 0.0);
    CHECK(extent / q1.side() > 0.01);
    CHECK(extent / q1.side() < 100.0);

    Rng rng(11);
    for (int i = 0; i < 30; ++i) {
        const double frac = rng.uniform();
        if (pencils::isExceptionalIndex(frac, 12)) continue;
        auto path = pencils::gammaQ1Q2Frac(kQuarter, q1, q2, frac, 2);
        CHECK(path.pts.front().y == Approx(q1.rect.y0));
        CHECK(path.pts.back().y == Approx(q2.rect.y1));
        // trace stays inside the strip and inside I1 horizontally
        for (const Vec2& v : path.pts) {
            CHECK(v.x >= q1.rect.x0 - 1e-12);
            CHECK(v.x <= q1.rect.x1 + 1e-12);
            CHECK(v.y <= q1.rect.y0 + 1e-12);
            CHECK(v.y >= q2.rect.y1 - 1e-12);
        }
        CHECK(chordLipschitz(path) <= path.lipschitzBound * (1 + 1e-9));
    }
}

TEST_CASE("index measure entering a depth-j subcube is 2^-j") {
    // fraction of indices whose descent enters a fixed column at relative
    // depth j; binomial check at 3 sigma
    const int j = 3;
    const int n = 4000;
    Rng rng(13);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        const double frac = rng.uniform();
        // digits 1,0,1 target block: frac in [5/8, 6/8)
        if (frac >= 5.0 / 8.0 && frac < 6.0 / 8.0) ++hits;
    }
    const double phat = double(hits) / n;
    const double p = std::pow(0.5, j);
    CHECK(std::abs(phat - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("cone chain and side-length sums") {
    // generation-3 cube: chain to the unit cube passes through increasing sizes
    const space::Cube q0 = space::makeCube(kQuarter, {3, 8}, {6, 1});
    const space::Cube qm = space::makeCube(kQuarter, {0, 1}, {0, 1});
    REQUIRE(pencils::validConePair(kQuarter, q0, qm));
    auto chain = pencils::coneChain(kQuarter, q0, qm);
    REQUIRE(chain.size() >= 2);
    CHECK(space::sameCube(chain.back(), qm));
    double sum = 0.0;
    for (std::size_t i = 1; i < chain.size(); ++i) {
        CHECK(chain[i].side() >= 16.0 * chain[i - 1].side() * (1 - 1e-12));
        sum = 0.0;
        for (std::size_t jj = 0; jj < i; ++jj) sum += chain[jj].side();
        const double ratio = sum / chain[i - 1].side();
        CHECK(ratio >= 1.0 - 1e-12);
        CHECK(ratio <= 1.0 / (1.0 - kQuarter.lambdaNu()) + 1e-12);
    }
}

TEST_CASE("cone with m=1 equals gammaQ1Q2") {
    const space::Cube q1 = space::makeCube(kQuarter, {1, 2}, {2, 1});
    const space::Cube q2 = space::firstLargeCubeBelow(kQuarter, q1);
    const double frac = 0.37;
    auto conePath = pencils::coneFrac(kQuarter, q1, q2, frac, 3);
    auto etaPath = pencils::gammaQ1Q2Frac(kQuarter, q1, q2, frac, 3);
    REQUIRE(conePath.pts.size() == etaPath.pts.size());
    for (std::size_t i = 0; i < conePath.pts.size(); ++i) {
        CHECK(conePath.pts[i].x == Approx(etaPath.pts[i].x).margin(1e-14));
        CHECK(conePath.pts[i].y == Approx(etaPath.pts[i].y).margin(1e-14));
    }
}

TEST_CASE("findQM case analysis") {
    const space::Cube unit = space::makeCube(kQuarter, {0, 1}, {0, 1});
    const space::Cube above = space::makeCube(kQuarter, {1, 2}, {2, 1});
    const space::Cube below = space::makeCube(kQuarter, {1, 1}, {2, 1});
    const space::Cube belowRight = space::makeCube(kQuarter, {1, 1}, {2, 3});

    // (a): nested columns, only smaller rows between
    auto ra = pencils::findQM(kQuarter, above, unit);
    CHECK(ra.kind == pencils::QMCase::A);
    CHECK(!ra.qm.has_value());

    // (b): generation-1 cubes on opposite sides of the generation-0 row
    auto rb = pencils::findQM(kQuarter, below, above);
    CHECK(rb.kind == pencils::QMCase::B);
    REQUIRE(rb.qm.has_value());
    CHECK(space::sameCube(*rb.qm, unit));

    // (c2): same row, disjoint columns; Q_M on one side
    auto rc = pencils::findQM(kQuarter, below, belowRight);
    CHECK(rc.kind == pencils::QMCase::C2);
    REQUIRE(rc.qm.has_value());
    CHECK(space::sameCube(*rc.qm, unit));

    CHECK_THROWS_AS(pencils::findQM(kQuarter, unit, unit), Error);
}

TEST_CASE("doubleCone endpoints, stages, and degenerate variant") {
    Rng rng(17);
    const Interval j0 = cantor::removedIntervalOfD(kQuarter, {0, 1});
    const Interval r11 = cantor::removedIntervalOfD(kQuarter, {1, 1});
    const Interval r12 = cantor::removedIntervalOfD(kQuarter, {1, 2});
    const Interval c21 = cantor::survivingInterval(kQuarter, {2, 1});
    const Interval c23 = cantor::survivingInterval(kQuarter, {2, 3});

    struct PairCase {
        Vec2 x, y;
        const char* name;
    };
    const std::vector<PairCase> cases = {
        {{0.3, j0.mid()}, {0.6, j0.mid() + 0.2}, "same-cube"},
        {{c21.mid(), r12.mid()}, {0.45, j0.mid()}, "case-a"},
        {{c21.mid(), r11.mid()}, {c21.mid(), r12.mid()}, "case-b"},
        {{c21.mid(), r11.mid()}, {c23.mid(), r11.mid()}, "case-c2"},
    };
    for (const auto& pc : cases) {
        auto plan = pencils::doubleConePlan(kQuarter, pc.x, pc.y, 3);
        for (int i = 0; i < 12; ++i) {
            const double frac = rng.uniform();
            if (pencils::isExceptionalIndex(frac, 14)) continue;
            auto path = pencils::doubleConePath(kQuarter, plan, frac, 4);
            INFO(pc.name);
            CHECK(dist(path.pts.front(), pc.x) < 1e-12);
            CHECK(dist(path.pts.back(), pc.y) < 1e-12);
            // stage decomposition covers the whole path: stage lengths sum
            double stageSum = 0.0;
            for (std::size_t si = 0; si < path.stages.size(); ++si) {
                const int from = std::max(0, path.stages[si].firstPt - 1);
                const int to = (si + 1 < path.stages.size()) ? path.stages[si + 1].firstPt
                                                             : int(path.pts.size());
                for (int k = from; k + 1 < to; ++k) stageSum += dist(path.pts[k], path.pts[k + 1]);
            }
            CHECK(stageSum == Approx(path.length()).margin(1e-12));
            if (plan.sameCubePair) CHECK(path.simplifiedSameCube);
        }
    }
}

TEST_CASE("lineIntegral basics") {
    pencils::PolylinePath seg;
    seg.pts = {{0.3, 0.0}, {0.3, 2.5}};
    seg.parameterizeByArclength();
    CHECK(pencils::lineIntegral(seg, ScalarField::constant(1.0), 1e-3) == Approx(2.5));
    CHECK(pencils::lineIntegral(seg, ScalarField::constant(3.0), 1e-3) == Approx(7.5));

    // chi_{upper half} on a symmetric Gamma(Q) crossing integrates to half
    const space::Cube q = space::makeCube(kQuarter, {0, 1}, {0, 1});
    auto path = pencils::gammaQFrac(kQuarter, q, 0.3, 12);
    const double midY = 0.5 * (q.rect.y0 + q.rect.y1);
    ScalarField upper{[midY](Vec2 p) { return p.y > midY ? 1.0 : 0.0; }};
    const double total = path.length();
    const double up = pencils::lineIntegral(path, upper, 1e-4);
    CHECK(up == Approx(total / 2).margin(2e-3 * path.pts.size()));
}

TEST_CASE("familyAverage basics and nested-family consistency") {
    const Interval I{0.0, 1.0};
    auto gen = [&](double frac) { return pencils::gammaIFrac(kQuarter, I, frac, 10); };
    const double ls = kQuarter.lambdaStar();
    const double mean = pencils::familyAverage(gen, ScalarField::constant(1.0), 64, 1e-3, 5);
    CHECK(mean >= ls * (1 - 1e-9));
    CHECK(mean <= pencils::gammaLipschitz(kQuarter) * ls * (1 + 1e-9));
    CHECK(pencils::familyAverage(gen, ScalarField::constant(0.0), 32, 1e-3, 5) == 0.0);

    // determinism
    CHECK(pencils::familyAverage(gen, ScalarField::constant(1.0), 64, 1e-3, 5) == mean);

    // nested-family consistency (Lemma 4.3): with g supported below the
    // child's start height, matched indices integrate identically
    const Interval Ip = cantor::survivingInterval(kQuarter, {2, 3});
    ScalarField low{[&](Vec2 p) { return p.y < ls * Ip.length() ? 1.0 : 0.0; }};
    Rng rng(23);
    for (int i = 0; i < 20; ++i) {
        const double fracP = rng.uniform();
        if (pencils::isExceptionalIndex(fracP, 14)) continue;
        const double frac = (2.0 + fracP) / 4.0;
        const double a = pencils::lineIntegral(pencils::gammaIFrac(kQuarter, I, frac, 12), low, 1e-4);
        const double b = pencils::lineIntegral(pencils::gammaIFrac(kQuarter, Ip, fracP, 10), low, 1e-4);
        CHECK(a == Approx(b).margin(2e-4));
    }
}
