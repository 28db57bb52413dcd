#pragma once

#include <functional>
#include <utility>

#include "cantorlab/geometry.hpp"

namespace cantorlab {

// Borel-function stand-in for integrands: pointwise evaluable, nonnegative
// where the caller's contract says so.
struct ScalarField {
    std::function<double(Vec2)> f;

    double operator()(Vec2 p) const { return f(p); }

    static ScalarField constant(double c) {
        return {[c](Vec2) { return c; }};
    }
    static ScalarField ofY(std::function<double(double)> g) {
        return {[g = std::move(g)](Vec2 p) { return g(p.y); }};
    }
};

} // namespace cantorlab
