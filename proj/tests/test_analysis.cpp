#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cantorlab/analysis.hpp"
#include "cantorlab/qcmap.hpp"

using namespace cantorlab;
using Catch::Approx;

namespace {
const SpaceParams kQuarter(0.25, 2);
}

TEST_CASE("p0 values and asymptotics") {
    CHECK(analysis::p0(kQuarter) == Approx(5.0 / 3.0).margin(1e-14));
    CHECK(analysis::p0(SpaceParams(0.5 - 1e-9, 2)) == Approx(1.0).margin(1e-6));
    CHECK(analysis::p0(0.25, 1e6) == Approx(1.5).margin(1e-4)); // -> 2 - dimC
    CHECK(analysis::p0(SpaceParams(1.0 / 8.0, 2)) == Approx(1.8).margin(1e-14));

    // p0 > 2 - dimC strictly on a parameter grid
    for (int i = 1; i <= 9; ++i)
        for (int nu : {2, 3, 4, 10}) {
            const double lambda = 0.05 * i;
            SpaceParams prm(lambda, nu);
            CHECK(analysis::p0(prm) > 2.0 - prm.dimC());
            CHECK(analysis::p0(prm) < 2.0);
        }
}

TEST_CASE("kpConvergenceRatio identities") {
    CHECK(analysis::kpConvergenceRatio(kQuarter, 5.0 / 3.0) == Approx(1.0).margin(1e-12));
    CHECK(analysis::kpConvergenceRatio(kQuarter, 1.8) == Approx(std::pow(2.0, -0.5)).margin(1e-12));
    for (int nu : {2, 3, 4}) {
        SpaceParams prm(0.3, nu);
        CHECK(analysis::kpConvergenceRatio(prm, 2.0) == Approx(2.0 * std::pow(2.0, -nu)).margin(1e-13));
    }
    // threshold identity across the grid
    for (int i = 1; i <= 9; ++i)
        for (int nu : {2, 3, 4, 10, 25}) {
            const double lambda = 0.05 * i;
            SpaceParams prm(lambda, nu);
            CHECK(std::abs(analysis::kpConvergenceRatio(prm, analysis::p0(prm)) - 1.0) < 1e-12);
        }
    CHECK_THROWS_AS(analysis::kpConvergenceRatio(kQuarter, 1.0), Error);
}

TEST_CASE("kpExact: tail ratios, threshold plateau, scaling") {
    auto [q1, q2] = analysis::canonicalPairAtScale(kQuarter, 1);

    auto rep = analysis::kpExact(kQuarter, 1.8, q1, q2, 9);
    REQUIRE(rep.perGeneration.size() >= 6);
    for (std::size_t k = 0; k + 1 < rep.perGeneration.size(); ++k) {
        CHECK(rep.perGeneration[k + 1].rows == 2 * rep.perGeneration[k].rows);
        const double ratio = rep.perGeneration[k + 1].increment / rep.perGeneration[k].increment;
        CHECK(ratio == Approx(analysis::kpConvergenceRatio(kQuarter, 1.8)).margin(1e-9));
    }
    CHECK(!rep.diverged);
    CHECK(rep.kp <= analysis::kpPaperBound(kQuarter, 1.8, q1.side()) * (1 + 1e-9));

    // at p0 the increments are constant (non-convergent sum)
    auto repT = analysis::kpExact(kQuarter, analysis::p0(kQuarter), q1, q2, 9);
    for (std::size_t k = 0; k + 1 < repT.perGeneration.size(); ++k)
        CHECK(repT.perGeneration[k + 1].increment ==
              Approx(repT.perGeneration[k].increment).margin(1e-12));

    // self-similar rescaling |I1'| = lambda^nu |I1| multiplies K_p by
    // (lambda^nu)^{1-2/p}
    auto [q1b, q2b] = analysis::canonicalPairAtScale(kQuarter, 2);
    auto repA = analysis::kpExact(kQuarter, 1.8, q1, q2, 1 + 6);
    auto repB = analysis::kpExact(kQuarter, 1.8, q1b, q2b, 2 + 6);
    const double predicted = std::pow(kQuarter.lambdaNu(), 1.0 - 2.0 / 1.8);
    CHECK(repB.kp / repA.kp == Approx(predicted).margin(1e-9));
}

TEST_CASE("coareaCheck fixtures") {
    // rectangle: parallel vertical fibers, ratio exactly 1
    auto rect = analysis::coareaCheck({2.0, 2.0, 1.0, 0.0}, ScalarField::constant(1.0), 128, 1e-2);
    CHECK(rect.lhs == Approx(2.0).epsilon(1e-6));
    CHECK(rect.rhs == Approx(2.0).epsilon(1e-6));
    CHECK(rect.ratio == Approx(1.0).epsilon(1e-6));

    // ell = L/2, height = L: lhs stays below rhs analytically
    auto trap = analysis::coareaCheck({1.0, 0.5, 1.0, 0.0}, ScalarField::constant(1.0), 128, 5e-3);
    CHECK(trap.ratio <= 1.0);
    CHECK(trap.ratio > 0.5);

    // thin strip near the short side: ratio bounded across the sweep
    double maxRatio = 0.0;
    for (double ell : {1.0, 0.5, 0.25, 0.125}) {
        ScalarField strip{[](Vec2 p) { return p.y > 0.95 ? 1.0 : 0.0; }};
        auto rep = analysis::coareaCheck({1.0, ell, 1.0, 0.0}, strip, 256, 2e-3);
        maxRatio = std::max(maxRatio, rep.ratio);
    }
    CHECK(maxRatio < 2.0);
    CHECK(maxRatio > 0.1);

    CHECK_THROWS_AS(analysis::coareaCheck({1.0, 2.0, 1.0, 0.0}, ScalarField::constant(1.0), 8, 0.1),
                    Error);
}

TEST_CASE("truncatedMaximal") {
    const auto s = space::enumerateCubes(kQuarter, 2);
    const Interval j0 = cantor::removedIntervalOfD(kQuarter, {0, 1});
    const Vec2 x{0.4, j0.mid()};

    CHECK(analysis::truncatedMaximal(s, ScalarField::constant(2.5), x, 0.5) == Approx(2.5).margin(1e-12));

    // monotone in R
    ScalarField bump{[&](Vec2 p) { return dist(p, Vec2{0.8, j0.mid()}) < 0.05 ? 1.0 : 0.0; }};
    const double m1 = analysis::truncatedMaximal(s, bump, x, 0.2);
    const double m2 = analysis::truncatedMaximal(s, bump, x, 0.6);
    CHECK(m2 >= m1 - 1e-12);

    // indicator of B(x, R/2): value within the Ahlfors-ratio window
    const double R = 0.3;
    ScalarField ind{[&](Vec2 p) { return dist(p, x) < R / 2 ? 1.0 : 0.0; }};
    const double mv = analysis::truncatedMaximal(s, ind, x, R);
    CHECK(mv <= 1.0 + 1e-12);
    CHECK(mv > 0.1);
}

TEST_CASE("discreteModulus rectangle oracle") {
    // continuum modulus of the horizontal fiber family is W L^{1-p}
    auto fx = analysis::rectangleFixture(1.0, 1.0, 1.0 / 32.0);
    for (double p : {1.5, 2.0, 3.0}) {
        analysis::ModulusProblem prob;
        prob.graph = &fx.graph;
        prob.family = fx.family;
        prob.p = p;
        auto res = analysis::discreteModulus(prob, 2e-3, 6000);
        CHECK(res.converged);
        CHECK(res.modulus == Approx(1.0).epsilon(0.05));
        CHECK(res.dualBound <= res.modulus + 1e-12);
        CHECK(res.minPathIntegral == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("discreteModulus single path and monotonicity") {
    auto fx = analysis::rectangleFixture(2.0, 1.0, 1.0 / 16.0);
    analysis::ModulusProblem one;
    one.graph = &fx.graph;
    one.family = {fx.family[fx.family.size() / 2]};
    one.p = 2.0;
    auto res1 = analysis::discreteModulus(one, 1e-4, 4000);
    const double s = one.family[0].length(fx.graph);
    CHECK(res1.modulus == Approx(fx.graph.h * std::pow(s, 1.0 - 2.0)).epsilon(1e-3));

    analysis::ModulusProblem half, full;
    half.graph = full.graph = &fx.graph;
    half.p = full.p = 2.0;
    for (std::size_t i = 0; i < fx.family.size(); ++i) {
        if (i % 2 == 0) half.family.push_back(fx.family[i]);
        full.family.push_back(fx.family[i]);
    }
    auto rh = analysis::discreteModulus(half, 1e-3, 4000);
    auto rf = analysis::discreteModulus(full, 1e-3, 4000);
    CHECK(rf.modulus >= rh.dualBound - 1e-9); // adding paths never decreases
    CHECK(rf.modulus > rh.modulus * 1.2);     // and strictly grows here

    analysis::ModulusProblem empty;
    empty.graph = &fx.graph;
    empty.p = 2.0;
    CHECK_THROWS_AS(analysis::discreteModulus(empty, 1e-3, 100), Error);
}

TEST_CASE("bow-tie pinch: modulus collapses for small p, survives for p > 2") {
    auto modAt = [&](double ell, double p) {
        auto fx = analysis::bowtieFixture(ell, 1.0 / 24.0);
        analysis::ModulusProblem prob;
        prob.graph = &fx.graph;
        prob.family = fx.family;
        prob.p = p;
        return analysis::discreteModulus(prob, 5e-3, 4000).modulus;
    };
    const double p15a = modAt(0.5, 1.5), p15b = modAt(0.125, 1.5);
    const double p3a = modAt(0.5, 3.0), p3b = modAt(0.125, 3.0);
    CHECK(p15b < p15a);
    CHECK(p15b / p15a < p3b / p3a); // collapse is faster below the threshold
    CHECK(p3b / p3a > 0.5);         // bounded below for p > 2
}

TEST_CASE("necessityWitness structure") {
    CHECK_THROWS_AS(analysis::necessityWitness(kQuarter, 1, 6), Error); // empty window
    CHECK_THROWS_AS(analysis::necessityWitness(kQuarter, 4, 3), Error); // k > G

    const auto w2 = analysis::necessityWitness(kQuarter, 2, 6);
    const auto w3 = analysis::necessityWitness(kQuarter, 3, 6);
    const auto w4 = analysis::necessityWitness(kQuarter, 4, 6);
    const auto w5 = analysis::necessityWitness(kQuarter, 5, 6);
    CHECK(w2.Nk == 1);
    CHECK(w3.Nk == 2);
    CHECK(w4.Nk == 4);
    CHECK(w5.Nk == 8);

    // monotone, range [0,1], constant outside the window
    const double S = kQuarter.scaleD();
    double prev = -1.0;
    for (int i = 0; i <= 2000; ++i) {
        const double y = S * i / 2000.0;
        const double v = w3.u(y);
        CHECK(v >= prev - 1e-15);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        prev = v;
    }
    CHECK(w3.u(0.0) == 0.0);
    CHECK(w3.u(S) == 1.0);

    // upper-gradient exactness on vertical segments: 1-D integral of g
    // matches u-increments, with equality across the full window
    auto integrateG = [&](double y0, double y1) {
        const int n = 40000;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += w3.g(y0 + (y1 - y0) * (i + 0.5) / n);
        return acc * (y1 - y0) / n;
    };
    const double lo = w3.rows->front().lo, hi = w3.rows->back().hi;
    CHECK(integrateG(lo, hi) == Approx(1.0).epsilon(2e-3));
    CHECK(w3.u(hi) - w3.u(lo) == Approx(1.0));
    const double mid1 = lo + 0.3 * (hi - lo), mid2 = lo + 0.8 * (hi - lo);
    CHECK(w3.u(mid2) - w3.u(mid1) <= integrateG(mid1, mid2) + 2e-3);
}

TEST_CASE("necessityEnergy closed form, exponent, quadrature") {
    // q = 1: energy = (2 lambda)^{k nu}, independent of N_k
    for (int k : {2, 3, 4})
        CHECK(analysis::necessityEnergy(kQuarter, k, 1.0, 6) ==
              Approx(std::pow(2.0 * kQuarter.lambda, k * kQuarter.nu)).margin(1e-14));

    // e(p0) = 0 exactly
    CHECK(std::abs(analysis::energyExponent(kQuarter, analysis::p0(kQuarter))) < 1e-12);

    // regression slope of log2(energy) vs k matches e(q)
    for (double q : {1.2, 1.5}) {
        std::vector<double> logE;
        for (int k = 2; k <= 4; ++k) logE.push_back(std::log2(analysis::necessityEnergy(kQuarter, k, q, 6)));
        const double slope = (logE.back() - logE.front()) / 2.0;
        CHECK(slope == Approx(analysis::energyExponent(kQuarter, q)).epsilon(0.05));
    }

    // quadrature cross-check within 2% for k <= 3
    const auto s = space::enumerateCubes(kQuarter, 3);
    for (int k : {2, 3}) {
        const auto w = analysis::necessityWitness(kQuarter, k, 3);
        const double quad = analysis::quadratureEnergy(s, w, 1.4);
        CHECK(quad == Approx(analysis::necessityEnergy(kQuarter, k, 1.4, 3)).epsilon(0.02));
    }
}

TEST_CASE("poincareProbe: constants and witness dichotomy") {
    const auto s = space::enumerateCubes(kQuarter, 4);
    // constant u: lhs = 0
    auto flat = analysis::poincareProbe(s, ScalarField::constant(3.0), ScalarField::constant(1.0),
                                        {true, {}, 0.0}, 2.0, 2);
    CHECK(flat.lhs == Approx(0.0).margin(1e-12));
    CHECK(flat.ratio == Approx(0.0).margin(1e-12));

    auto ratioAt = [&](int k, double q) {
        const auto w = analysis::necessityWitness(kQuarter, k, 4);
        return analysis::poincareProbe(s, w.uField(), w.gField(), {true, {}, 0.0}, q, 2).ratio;
    };
    // q < p0: strictly increasing in k
    std::vector<double> grow;
    for (int k = 2; k <= 4; ++k) grow.push_back(ratioAt(k, 1.3));
    CHECK(grow[1] > grow[0]);
    CHECK(grow[2] > grow[1]);
    // growth rate ~ 2^{-k e(q)/q}
    const double predicted = std::pow(2.0, -analysis::energyExponent(kQuarter, 1.3) / 1.3);
    CHECK(grow[2] / grow[1] == Approx(predicted).epsilon(0.15));

    // q slightly above p0: no increasing trend
    const double qHi = analysis::p0(kQuarter) + 0.1;
    std::vector<double> flatSeq;
    for (int k = 2; k <= 4; ++k) flatSeq.push_back(ratioAt(k, qHi));
    CHECK(flatSeq[2] <= flatSeq[0] * 1.05);
}

TEST_CASE("pointwiseEstimateCheck") {
    const auto s = space::enumerateCubes(kQuarter, 3);
    const Interval r11 = cantor::removedIntervalOfD(kQuarter, {1, 1});
    const Interval r12 = cantor::removedIntervalOfD(kQuarter, {1, 2});
    const Interval c21 = cantor::survivingInterval(kQuarter, {2, 1});
    const Vec2 x{c21.mid(), r11.mid()};
    const Vec2 y{c21.mid(), r12.mid()};

    auto zero = analysis::pointwiseEstimateCheck(s, x, y, ScalarField::constant(0.0), 1.8, 8, 4, 2e-3);
    CHECK(zero.lhs == 0.0);

    auto ones = analysis::pointwiseEstimateCheck(s, x, y, ScalarField::constant(1.0), 1.8, 12, 4, 2e-3);
    CHECK(ones.rhs == Approx(2.0 * dist(x, y)).epsilon(1e-6));
    CHECK(ones.ratio > 0.5);
    CHECK(ones.ratio < 6.0); // bounded by the fitted quasiconvexity constant
    CHECK(std::string(ones.qmCase) == "b");
}

TEST_CASE("modulusScalingCheck smoke") {
    auto rep = analysis::modulusScalingCheck(kQuarter, 1.8, 2, 32, 1, 1.0 / 48.0, 7, 1e-2, 3000);
    REQUIRE(rep.points.size() == 2);
    CHECK(rep.allPositive);
    for (const auto& pt : rep.points) CHECK(pt.converged);
    CHECK(rep.slope == Approx(0.2).margin(0.4));
}
