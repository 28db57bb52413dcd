#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "cantorlab/error.hpp"
#include "cantorlab/geometry.hpp"
#include "cantorlab/rng.hpp"
#include "cantorlab/space.hpp"

namespace cantorlab {
namespace metric {

// Lattice approximation of X'. Vertices live on per-cube grids whose pitch
// tracks the requested resolution h (never fewer than 2x2 per cube); edges
// are axis neighbors and diagonals inside a cube, plus stitch edges that
// cross the residual gap between consecutive realized rows at abscissas
// close to C, where the rows of X actually meet.
struct GridGraph {
    double h = 0.0;

    std::vector<Vec2> pos;
    std::vector<int> cubeOf;

    struct Lattice {
        Rect rect;
        int first = 0;
        int nx = 0, ny = 0; // subdivisions per axis; (nx+1)*(ny+1) vertices
        double pitchX = 0.0, pitchY = 0.0;
        double pitchMax() const { return std::max(pitchX, pitchY); }
    };
    std::vector<Lattice> lattices;

    std::vector<std::array<int, 2>> edgeV;
    std::vector<double> edgeLen;

    std::vector<int> adjStart;
    std::vector<int> adjVert;
    std::vector<int> adjEdge;

    int vertexCount() const { return int(pos.size()); }
    int edgeCount() const { return int(edgeV.size()); }

    int vertexId(int cubeIdx, int i, int j) const {
        const Lattice& L = lattices[cubeIdx];
        return L.first + j * (L.nx + 1) + i;
    }

    int nearestVertexInCube(int cubeIdx, Vec2 p) const {
        const Lattice& L = lattices[cubeIdx];
        const int i = std::clamp(int(std::lround((p.x - L.rect.x0) / L.pitchX)), 0, L.nx);
        const int j = std::clamp(int(std::lround((p.y - L.rect.y0) / L.pitchY)), 0, L.ny);
        return vertexId(cubeIdx, i, j);
    }

    int edgeBetween(int u, int v) const {
        for (int k = adjStart[u]; k < adjStart[u + 1]; ++k)
            if (adjVert[k] == v) return adjEdge[k];
        return -1;
    }

    void finalize() {
        const int V = vertexCount();
        adjStart.assign(V + 1, 0);
        for (const auto& e : edgeV) {
            ++adjStart[e[0] + 1];
            ++adjStart[e[1] + 1];
        }
        for (int v = 0; v < V; ++v) adjStart[v + 1] += adjStart[v];
        adjVert.assign(adjStart[V], 0);
        adjEdge.assign(adjStart[V], 0);
        std::vector<int> fill(adjStart.begin(), adjStart.end() - 1);
        for (int e = 0; e < edgeCount(); ++e) {
            const int a = edgeV[e][0], b = edgeV[e][1];
            adjVert[fill[a]] = b;
            adjEdge[fill[a]++] = e;
            adjVert[fill[b]] = a;
            adjEdge[fill[b]++] = e;
        }
    }
};

namespace detail {

inline void addLattice(GridGraph& g, const Rect& rect, double h) {
    GridGraph::Lattice L;
    L.rect = rect;
    L.first = g.vertexCount();
    L.nx = std::max(1, int(std::llround(rect.width() / h)));
    L.ny = std::max(1, int(std::llround(rect.height() / h)));
    L.pitchX = rect.width() / L.nx;
    L.pitchY = rect.height() / L.ny;
    const int cubeIdx = int(g.lattices.size());
    for (int j = 0; j <= L.ny; ++j)
        for (int i = 0; i <= L.nx; ++i) {
            g.pos.push_back({rect.x0 + i * L.pitchX, rect.y0 + j * L.pitchY});
            g.cubeOf.push_back(cubeIdx);
        }
    g.lattices.push_back(L);
    // intra-cube edges: axis + diagonals
    auto vid = [&](int i, int j) { return L.first + j * (L.nx + 1) + i; };
    auto push = [&](int u, int v) {
        g.edgeV.push_back({u, v});
        g.edgeLen.push_back(dist(g.pos[u], g.pos[v]));
    };
    for (int j = 0; j <= L.ny; ++j)
        for (int i = 0; i <= L.nx; ++i) {
            if (i < L.nx) push(vid(i, j), vid(i + 1, j));
            if (j < L.ny) push(vid(i, j), vid(i, j + 1));
            if (i < L.nx && j < L.ny) {
                push(vid(i, j), vid(i + 1, j + 1));
                push(vid(i + 1, j), vid(i, j + 1));
            }
        }
}

// Connect the top edge of lattice `lower` to the bottom edge of lattice
// `upper` at x positions within `tolX` of each other and within `tolC` of C.
inline void stitch(GridGraph& g, const SpaceParams& p, int lower, int upper, double tolX, double tolC) {
    const GridGraph::Lattice& A = g.lattices[lower];
    const GridGraph::Lattice& B = g.lattices[upper];
    if (intervalGap(A.rect.xSpan(), B.rect.xSpan()) > 0) return;
    int ib = 0;
    for (int ia = 0; ia <= A.nx; ++ia) {
        const double xa = A.rect.x0 + ia * A.pitchX;
        while (ib <= B.nx && B.rect.x0 + ib * B.pitchX < xa - tolX) ++ib;
        for (int k = ib; k <= B.nx; ++k) {
            const double xb = B.rect.x0 + k * B.pitchX;
            if (xb > xa + tolX) break;
            if (cantor::distToC(p, 0.5 * (xa + xb)) > tolC) continue;
            const int u = g.vertexId(lower, ia, A.ny);
            const int v = g.vertexId(upper, k, 0);
            g.edgeV.push_back({u, v});
            g.edgeLen.push_back(dist(g.pos[u], g.pos[v]));
        }
    }
}

} // namespace detail

inline GridGraph buildGraph(const space::SpaceApprox& s, double h, std::uint64_t vertexBudget = 16u << 20) {
    if (!(h > 0)) fail(Errc::Domain, "h must be positive");
    // vertex count estimate
    std::uint64_t total = 0;
    for (const auto& q : s.cubes) {
        const std::uint64_t n = std::max<std::uint64_t>(1, std::uint64_t(std::llround(q.side() / h)));
        total += (n + 1) * (n + 1);
        if (total > vertexBudget)
            fail(Errc::Resource, "graph vertex budget exceeded (needs > " + std::to_string(total) + ")");
    }
    GridGraph g;
    g.h = h;
    g.pos.reserve(total);
    for (const auto& q : s.cubes) detail::addLattice(g, q.rect, h);

    // stitch consecutive realized rows
    for (std::size_t r = 0; r + 1 < s.rows.size(); ++r) {
        const auto& below = s.rows[r];
        const auto& above = s.rows[r + 1];
        const int nb = int(s.cubesOnRow(int(r)));
        const int na = int(s.cubesOnRow(int(r + 1)));
        int jb = 0, ja = 0;
        while (jb < nb && ja < na) {
            const int cb = below.firstCube + jb;
            const int ca = above.firstCube + ja;
            const Rect& rb = s.cubes[cb].rect;
            const Rect& ra = s.cubes[ca].rect;
            if (rb.x1 < ra.x0) {
                ++jb;
                continue;
            }
            if (ra.x1 < rb.x0) {
                ++ja;
                continue;
            }
            const double pitchMax = std::max(g.lattices[cb].pitchMax(), g.lattices[ca].pitchMax());
            detail::stitch(g, s.params, cb, ca, 1.01 * pitchMax, std::max(h, pitchMax));
            if (rb.x1 <= ra.x1)
                ++jb;
            else
                ++ja;
        }
    }
    g.finalize();
    return g;
}

// Plain rectangle complex for calibration fixtures. `necks` lists vertex
// pairs to weld across rectangles: {rectA, rectB, xA, xB, yLo, yHi}.
struct NeckSpec {
    int rectA = 0, rectB = 1;
    double y0 = 0.0, y1 = 0.0; // weld vertices whose y lies in [y0, y1]
};

inline GridGraph buildRectGraph(const std::vector<Rect>& rects, double h,
                                const std::vector<NeckSpec>& necks = {}) {
    GridGraph g;
    g.h = h;
    for (const Rect& r : rects) detail::addLattice(g, r, h);
    for (const NeckSpec& nk : necks) {
        const auto& A = g.lattices[nk.rectA];
        const auto& B = g.lattices[nk.rectB];
        // weld right edge of A to left edge of B
        for (int ja = 0; ja <= A.ny; ++ja) {
            const double ya = A.rect.y0 + ja * A.pitchY;
            if (ya < nk.y0 - 1e-12 || ya > nk.y1 + 1e-12) continue;
            for (int jb = 0; jb <= B.ny; ++jb) {
                const double yb = B.rect.y0 + jb * B.pitchY;
                if (std::abs(yb - ya) > 1e-9) continue;
                const int u = g.vertexId(nk.rectA, A.nx, ja);
                const int v = g.vertexId(nk.rectB, 0, jb);
                g.edgeV.push_back({u, v});
                g.edgeLen.push_back(dist(g.pos[u], g.pos[v]));
            }
        }
    }
    g.finalize();
    return g;
}

// Dijkstra workspace; weights default to edge lengths but can be overridden
// (the image-side metric reuses the topology with translated positions).
struct ShortestPaths {
    std::vector<double> dist;
    std::vector<int> prevEdge;

    void run(const GridGraph& g, const std::vector<std::pair<int, double>>& sources,
             const std::vector<double>* weights = nullptr) {
        const auto& w = weights ? *weights : g.edgeLen;
        const int V = g.vertexCount();
        dist.assign(V, std::numeric_limits<double>::infinity());
        prevEdge.assign(V, -1);
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        for (auto [v, d0] : sources) {
            if (d0 < dist[v]) {
                dist[v] = d0;
                heap.push({d0, v});
            }
        }
        while (!heap.empty()) {
            auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[u]) continue;
            for (int k = g.adjStart[u]; k < g.adjStart[u + 1]; ++k) {
                const int v = g.adjVert[k];
                const int e = g.adjEdge[k];
                const double nd = d + w[e];
                if (nd < dist[v]) {
                    dist[v] = nd;
                    prevEdge[v] = e;
                    heap.push({nd, v});
                }
            }
        }
    }

    void runFromVertex(const GridGraph& g, int v, const std::vector<double>* weights = nullptr) {
        run(g, {{v, 0.0}}, weights);
    }
};

inline bool isConnected(const GridGraph& g) {
    if (g.vertexCount() == 0) return true;
    std::vector<char> seen(g.vertexCount(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int k = g.adjStart[u]; k < g.adjStart[u + 1]; ++k) {
            const int v = g.adjVert[k];
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                stack.push_back(v);
            }
        }
    }
    return count == g.vertexCount();
}

namespace detail {

inline int cubeIndexOfPoint(const space::SpaceApprox& s, Vec2 p) {
    auto c = space::classifyPoint(s.params, p, s.G, 0.0);
    if (auto* in = std::get_if<space::InCube>(&c)) return s.cubeIndexOf(in->cube);
    return -1;
}

} // namespace detail

// Intrinsic distance through the graph. Same-cube pairs short-circuit to the
// Euclidean distance (d(p,q) = ||p-q|| inside one cube). Cross-cube queries
// seed a virtual source with every vertex of p's cube at its straight-line
// cost, which is exact within the convex cube.
inline double intrinsicDistance(const GridGraph& g, const space::SpaceApprox& s, Vec2 p, Vec2 q) {
    const int cp = detail::cubeIndexOfPoint(s, p);
    const int cq = detail::cubeIndexOfPoint(s, q);
    if (cp < 0 || cq < 0) fail(Errc::Domain, "intrinsicDistance: point not in a realized cube");
    if (cp == cq) return dist(p, q);
    const auto& Lp = g.lattices[cp];
    std::vector<std::pair<int, double>> sources;
    sources.reserve(std::size_t(Lp.nx + 1) * (Lp.ny + 1));
    for (int j = 0; j <= Lp.ny; ++j)
        for (int i = 0; i <= Lp.nx; ++i) {
            const int v = g.vertexId(cp, i, j);
            sources.push_back({v, dist(p, g.pos[v])});
        }
    ShortestPaths sp;
    sp.run(g, sources);
    const auto& Lq = g.lattices[cq];
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= Lq.ny; ++j)
        for (int i = 0; i <= Lq.nx; ++i) {
            const int v = g.vertexId(cq, i, j);
            if (sp.dist[v] < std::numeric_limits<double>::infinity())
                best = std::min(best, sp.dist[v] + dist(q, g.pos[v]));
        }
    if (!(best < std::numeric_limits<double>::infinity()))
        fail(Errc::Connectivity, "intrinsicDistance: target unreachable (over-truncated graph)");
    return best;
}

inline Vec2 samplePointInSpace(const space::SpaceApprox& s, Rng& rng) {
    // cube chosen with probability proportional to its area
    double total = 0.0;
    for (const auto& q : s.cubes) total += q.rect.area();
    double target = rng.uniform() * total;
    const space::Cube* chosen = &s.cubes.back();
    for (const auto& q : s.cubes) {
        target -= q.rect.area();
        if (target <= 0) {
            chosen = &q;
            break;
        }
    }
    return {rng.uniform(chosen->rect.x0, chosen->rect.x1), rng.uniform(chosen->rect.y0, chosen->rect.y1)};
}

struct QuasiconvexityResult {
    double maxRatio = 1.0;
    Vec2 argmaxP, argmaxQ;
};

// Max of intrinsic/Euclidean distance over sampled pairs. Pairs are grouped
// as sources x targets so one Dijkstra serves many pairs.
inline QuasiconvexityResult quasiconvexityRatio(const GridGraph& g, const space::SpaceApprox& s, int nPairs,
                                                std::uint64_t seed, int targetsPerSource = 25) {
    if (nPairs < 1) fail(Errc::Domain, "nPairs must be >= 1");
    Rng rng(seed);
    QuasiconvexityResult out;
    const int nSources = (nPairs + targetsPerSource - 1) / targetsPerSource;
    int done = 0;
    ShortestPaths sp;
    for (int si = 0; si < nSources && done < nPairs; ++si) {
        const Vec2 p = samplePointInSpace(s, rng);
        const int cp = detail::cubeIndexOfPoint(s, p);
        const auto& Lp = g.lattices[cp];
        std::vector<std::pair<int, double>> sources;
        for (int j = 0; j <= Lp.ny; ++j)
            for (int i = 0; i <= Lp.nx; ++i) {
                const int v = g.vertexId(cp, i, j);
                sources.push_back({v, dist(p, g.pos[v])});
            }
        sp.run(g, sources);
        for (int t = 0; t < targetsPerSource && done < nPairs; ++t, ++done) {
            const Vec2 q = samplePointInSpace(s, rng);
            if (dist(p, q) < 4 * g.h) continue; // ratio dominated by snap error
            const int cq = detail::cubeIndexOfPoint(s, q);
            double d;
            if (cq == cp) {
                d = dist(p, q);
            } else {
                const auto& Lq = g.lattices[cq];
                d = std::numeric_limits<double>::infinity();
                for (int j = 0; j <= Lq.ny; ++j)
                    for (int i = 0; i <= Lq.nx; ++i) {
                        const int v = g.vertexId(cq, i, j);
                        if (sp.dist[v] < std::numeric_limits<double>::infinity())
                            d = std::min(d, sp.dist[v] + dist(q, g.pos[v]));
                    }
                if (!(d < std::numeric_limits<double>::infinity()))
                    fail(Errc::Connectivity, "quasiconvexityRatio: unreachable pair");
            }
            const double ratio = d / dist(p, q);
            if (ratio > out.maxRatio) {
                out.maxRatio = ratio;
                out.argmaxP = p;
                out.argmaxQ = q;
            }
        }
    }
    return out;
}

// Snap a polyline to an edge chain. cubeLocator maps a point to a lattice
// index (or -1 outside the realized complex, e.g. while crossing a gap).
// Non-adjacent consecutive snaps are spliced with a local shortest path.
struct SnappedPath {
    std::vector<int> vertices;
    std::vector<int> edges;
    int splices = 0;

    double length(const GridGraph& g) const {
        double s = 0.0;
        for (int e : edges) s += g.edgeLen[e];
        return s;
    }
};

inline SnappedPath snapToGraph(const GridGraph& g, const std::vector<Vec2>& polyline,
                               const std::function<int(Vec2)>& cubeLocator, double sampleStep) {
    SnappedPath out;
    std::vector<int> raw;
    auto consider = [&](Vec2 p) {
        const int c = cubeLocator(p);
        if (c < 0) return;
        const int v = g.nearestVertexInCube(c, p);
        if (raw.empty() || raw.back() != v) raw.push_back(v);
    };
    for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        const Vec2 a = polyline[i], b = polyline[i + 1];
        const double L = dist(a, b);
        const int n = std::max(1, int(std::ceil(L / sampleStep)));
        for (int k = 0; k <= n; ++k) consider(a + (double(k) / n) * (b - a));
    }
    if (raw.empty()) fail(Errc::Domain, "snapToGraph: polyline misses the realized complex");
    // straighten snap zigzags: drop a vertex whenever its neighbors are
    // directly adjacent (the shortcut is never longer)
    {
        std::vector<int> smooth;
        for (int v : raw) {
            while (smooth.size() >= 2 && g.edgeBetween(smooth[smooth.size() - 2], v) >= 0)
                smooth.pop_back();
            if (smooth.empty() || smooth.back() != v) smooth.push_back(v);
        }
        raw = std::move(smooth);
    }
    out.vertices.push_back(raw[0]);
    ShortestPaths sp;
    for (std::size_t i = 1; i < raw.size(); ++i) {
        const int u = out.vertices.back();
        const int v = raw[i];
        if (u == v) continue;
        const int e = g.edgeBetween(u, v);
        if (e >= 0) {
            out.vertices.push_back(v);
            out.edges.push_back(e);
            continue;
        }
        // splice a shortest chain
        sp.runFromVertex(g, u);
        if (!(sp.dist[v] < std::numeric_limits<double>::infinity()))
            fail(Errc::Connectivity, "snapToGraph: cannot splice disconnected snap points");
        std::vector<int> chainE, chainV;
        int cur = v;
        while (cur != u) {
            const int pe = sp.prevEdge[cur];
            chainE.push_back(pe);
            cur = (g.edgeV[pe][0] == cur) ? g.edgeV[pe][1] : g.edgeV[pe][0];
            chainV.push_back(cur);
        }
        for (std::size_t k = chainE.size(); k-- > 0;) {
            out.edges.push_back(chainE[k]);
            out.vertices.push_back(k == 0 ? v : chainV[k - 1]);
        }
        ++out.splices;
    }
    return out;
}

} // namespace metric
} // namespace cantorlab
