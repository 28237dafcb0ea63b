// Staggered (MAC) grid over D = (-1,1)^2 and classification of every node of
// the three subgrids as internal / ghost / wall / inactive.
//
// Velocity components normal to an outer wall live exactly on wall faces and
// carry Dirichlet rows. Tangential components get one reflected layer outside
// the box (wall ghosts) closed by quadratic one-sided extrapolation through
// the wall value. Cell centers never need wall layers.

#pragma once

#include <cstdint>
#include <functional>

#include "core.hpp"
#include "levelset.hpp"

namespace ghostflow {

struct GridSpec {
    int n = 0;
    double h = 0.0;

    GridSpec() = default;
    explicit GridSpec(int n_) : n(n_), h(2.0 / n_) {}
};

// delta = sqrt(5) h covers every external node reachable from an upwind
// interpolation stencil; sqrt(2) h is enough when the grid resolves the
// boundary curvature well.
enum class BandKind { Sqrt5, Sqrt2 };

inline double band_width(BandKind band, double h, bool moving) {
    const double base = (band == BandKind::Sqrt5) ? std::sqrt(5.0) : std::sqrt(2.0);
    return (base + (moving ? 1.0 : 0.0)) * h;
}

// The object boundary may sweep up to h per step; the previous-step fields
// must still cover every stencil of the new internal nodes.
inline double time_step_bound(const GridSpec& spec, double boundary_speed_max) {
    assert(boundary_speed_max >= 0.0);
    if (boundary_speed_max <= 0.0) return spec.h;
    return std::min(spec.h, spec.h / boundary_speed_max);
}

enum class SubgridKind : std::uint8_t { CellCenter, XFace, YFace };

enum class NodeClass : std::uint8_t { Internal, Ghost, WallFace, WallGhost, Inactive };

struct Subgrid {
    SubgridKind kind = SubgridKind::CellCenter;
    int n = 0;
    double h = 0.0;
    int i_begin = 0, i_end = 0, j_begin = 0, j_end = 0;  // half-open logical box

    static Subgrid make(SubgridKind kind, const GridSpec& g) {
        Subgrid s;
        s.kind = kind;
        s.n = g.n;
        s.h = g.h;
        switch (kind) {
            case SubgridKind::CellCenter:
                s.i_begin = 0; s.i_end = g.n;
                s.j_begin = 0; s.j_end = g.n;
                break;
            case SubgridKind::XFace:
                s.i_begin = 0; s.i_end = g.n + 1;
                s.j_begin = -1; s.j_end = g.n + 1;
                break;
            case SubgridKind::YFace:
                s.i_begin = -1; s.i_end = g.n + 1;
                s.j_begin = 0; s.j_end = g.n + 1;
                break;
        }
        return s;
    }

    Vec2 coord(int i, int j) const {
        switch (kind) {
            case SubgridKind::CellCenter:
                return {-1.0 + (i + 0.5) * h, -1.0 + (j + 0.5) * h};
            case SubgridKind::XFace:
                return {-1.0 + i * h, -1.0 + (j + 0.5) * h};
            case SubgridKind::YFace:
                return {-1.0 + (i + 0.5) * h, -1.0 + j * h};
        }
        return {};
    }

    int nx() const { return i_end - i_begin; }
    int ny() const { return j_end - j_begin; }

    Field make_field(double init = 0.0) const {
        return Field(nx(), ny(), i_begin, j_begin, init);
    }
    template <typename T>
    Array2<T> make_array(T init = T{}) const {
        return Array2<T>(nx(), ny(), i_begin, j_begin, init);
    }

    // Number of nodes on the closed computational box (wall layers excluded).
    int domain_node_count() const {
        switch (kind) {
            case SubgridKind::CellCenter: return n * n;
            case SubgridKind::XFace: return (n + 1) * n;
            case SubgridKind::YFace: return n * (n + 1);
        }
        return 0;
    }
};

struct GhostNode {
    int i = 0, j = 0;
    BoundaryProjection proj;
};

struct SubgridClassification {
    Subgrid geom;
    Array2<NodeClass> cls;
    std::vector<GhostNode> ghosts;
    Array2<std::int32_t> ghost_index;  // -1 where not a ghost

    NodeClass at(int i, int j) const { return cls(i, j); }
    bool is(int i, int j, NodeClass c) const { return cls(i, j) == c; }

    int count(NodeClass c) const {
        int k = 0;
        for (int i = geom.i_begin; i < geom.i_end; ++i)
            for (int j = geom.j_begin; j < geom.j_end; ++j)
                if (cls(i, j) == c) ++k;
        return k;
    }
};

struct Classification {
    GridSpec spec;
    double t = 0.0;
    bool moving = false;
    double delta = 0.0;
    bool stencils_valid = true;  // every internal stencil avoids inactive nodes
    SubgridClassification u, v, p;

    const SubgridClassification& sub(SubgridKind k) const {
        switch (k) {
            case SubgridKind::CellCenter: return p;
            case SubgridKind::XFace: return u;
            case SubgridKind::YFace: return v;
        }
        return p;
    }
    SubgridClassification& sub(SubgridKind k) {
        switch (k) {
            case SubgridKind::CellCenter: return p;
            case SubgridKind::XFace: return u;
            case SubgridKind::YFace: return v;
        }
        return p;
    }
};

namespace detail {

// A node can only be within delta of the sampled interface if the vertex
// lattice changes sign nearby: a zero of the bilinear field within the
// delta-ball needs a sign change on the corners of some patch touching the
// ball, and those corners lie within delta + sqrt(2) h of the node.
class BandScreen {
public:
    BandScreen(const LevelSetSampler& sampler, int n, double h, double delta)
        : sampler_(sampler), n_(n), h_(h), radius_(delta + 1.5 * h) {}

    bool maybe_near_interface(Vec2 p) const {
        const int ci = static_cast<int>(std::floor((p.x + 1.0) / h_));
        const int cj = static_cast<int>(std::floor((p.y + 1.0) / h_));
        const int reach = static_cast<int>(std::ceil(radius_ / h_)) + 1;
        const double r2 = radius_ * radius_;
        for (int i = std::max(0, ci - reach); i <= std::min(n_, ci + reach + 1); ++i)
            for (int j = std::max(0, cj - reach); j <= std::min(n_, cj + reach + 1); ++j) {
                const double dx = (-1.0 + i * h_) - p.x;
                const double dy = (-1.0 + j * h_) - p.y;
                if (dx * dx + dy * dy <= r2 && sampler_.vertex(i, j) <= 0.0) return true;
            }
        return false;
    }

private:
    const LevelSetSampler& sampler_;
    int n_;
    double h_;
    double radius_;
};

}  // namespace detail

// Node-by-node classification of one subgrid.
inline SubgridClassification classify_subgrid(const Subgrid& geom, const LevelSet& ls,
                                              const LevelSetSampler& sampler,
                                              const detail::BandScreen& screen, double t,
                                              double delta) {
    SubgridClassification out;
    out.geom = geom;
    out.cls = geom.make_array<NodeClass>(NodeClass::Inactive);
    out.ghost_index = geom.make_array<std::int32_t>(-1);

    const int n = geom.n;
    for (int i = geom.i_begin; i < geom.i_end; ++i) {
        for (int j = geom.j_begin; j < geom.j_end; ++j) {
            NodeClass c;
            if (geom.kind == SubgridKind::XFace && (j == -1 || j == n)) {
                c = NodeClass::WallGhost;
            } else if (geom.kind == SubgridKind::XFace && (i == 0 || i == n)) {
                c = NodeClass::WallFace;
            } else if (geom.kind == SubgridKind::YFace && (i == -1 || i == n)) {
                c = NodeClass::WallGhost;
            } else if (geom.kind == SubgridKind::YFace && (j == 0 || j == n)) {
                c = NodeClass::WallFace;
            } else {
                const Vec2 pt = geom.coord(i, j);
                if (ls.value(pt, t) < 0.0) {
                    c = NodeClass::Internal;
                } else if (!screen.maybe_near_interface(pt)) {
                    c = NodeClass::Inactive;
                } else {
                    BoundaryProjection proj = project_to_boundary(sampler, pt, geom.h);
                    if (proj.distance < delta) {
                        out.ghost_index(i, j) = static_cast<std::int32_t>(out.ghosts.size());
                        out.ghosts.push_back({i, j, proj});
                        c = NodeClass::Ghost;
                    } else {
                        c = NodeClass::Inactive;
                    }
                }
            }
            out.cls(i, j) = c;
        }
    }
    return out;
}

// Every discretization stencil of an internal node must avoid inactive nodes;
// a violation means the ghost band is too narrow for this resolution.
inline bool check_stencils(const Classification& c, std::string* what = nullptr) {
    auto ok = [](const SubgridClassification& s, int i, int j) {
        return s.cls.contains(i, j) && s.cls(i, j) != NodeClass::Inactive;
    };
    const auto& u = c.u;
    const auto& v = c.v;
    const auto& p = c.p;
    for (int i = u.geom.i_begin; i < u.geom.i_end; ++i)
        for (int j = u.geom.j_begin; j < u.geom.j_end; ++j) {
            if (u.cls(i, j) != NodeClass::Internal) continue;
            const bool fine = ok(u, i - 1, j) && ok(u, i + 1, j) && ok(u, i, j - 1) &&
                              ok(u, i, j + 1) && ok(p, i - 1, j) && ok(p, i, j) &&
                              ok(v, i - 1, j) && ok(v, i, j) && ok(v, i - 1, j + 1) &&
                              ok(v, i, j + 1);
            if (!fine) {
                if (what)
                    *what = "x-face (" + std::to_string(i) + "," + std::to_string(j) +
                            ") touches an inactive node";
                return false;
            }
        }
    for (int i = v.geom.i_begin; i < v.geom.i_end; ++i)
        for (int j = v.geom.j_begin; j < v.geom.j_end; ++j) {
            if (v.cls(i, j) != NodeClass::Internal) continue;
            const bool fine = ok(v, i - 1, j) && ok(v, i + 1, j) && ok(v, i, j - 1) &&
                              ok(v, i, j + 1) && ok(p, i, j - 1) && ok(p, i, j) &&
                              ok(u, i, j - 1) && ok(u, i + 1, j - 1) && ok(u, i, j) &&
                              ok(u, i + 1, j);
            if (!fine) {
                if (what)
                    *what = "y-face (" + std::to_string(i) + "," + std::to_string(j) +
                            ") touches an inactive node";
                return false;
            }
        }
    for (int i = 0; i < p.geom.n; ++i)
        for (int j = 0; j < p.geom.n; ++j) {
            if (p.cls(i, j) != NodeClass::Internal) continue;
            const bool fine =
                ok(u, i, j) && ok(u, i + 1, j) && ok(v, i, j) && ok(v, i, j + 1);
            if (!fine) {
                if (what)
                    *what = "cell center (" + std::to_string(i) + "," + std::to_string(j) +
                            ") touches an inactive node";
                return false;
            }
        }
    return true;
}

inline Classification classify(const GridSpec& spec, const LevelSet& ls, double t,
                               bool moving, BandKind band = BandKind::Sqrt5,
                               bool strict = true) {
    Classification out;
    out.spec = spec;
    out.t = t;
    out.moving = moving;
    out.delta = band_width(band, spec.h, moving);

    LevelSetSampler sampler(ls, spec.n, t);
    detail::BandScreen screen(sampler, spec.n, spec.h, out.delta);

    out.u = classify_subgrid(Subgrid::make(SubgridKind::XFace, spec), ls, sampler, screen,
                             t, out.delta);
    out.v = classify_subgrid(Subgrid::make(SubgridKind::YFace, spec), ls, sampler, screen,
                             t, out.delta);
    out.p = classify_subgrid(Subgrid::make(SubgridKind::CellCenter, spec), ls, sampler,
                             screen, t, out.delta);

    std::string what;
    out.stencils_valid = check_stencils(out, &what);
    if (strict && !out.stencils_valid)
        throw GeometryError("under-resolved geometry at n=" + std::to_string(spec.n) +
                            ": " + what);
    return out;
}

}  // namespace ghostflow
