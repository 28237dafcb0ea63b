// Finite-difference rows of the monolithic velocity--pressure system:
// centered interior stencils, upwind biquadratic ghost constraints at the
// embedded boundary, quadratic wall extrapolation rows, the generalized
// continuity rows, and the zero-mean pressure row paired with the scalar
// defect unknown.

#pragma once

#include <array>
#include <functional>
#include <memory>

#include "state.hpp"

namespace ghostflow {

// Quadratic interpolation basis on the three upwind nodes {0, 1, 2} of one
// axis, evaluated at local coordinate theta (measured from the ghost node
// toward the fluid).
inline std::array<double, 3> quad_basis(double th) {
    return {0.5 * (1.0 - th) * (2.0 - th), th * (2.0 - th), 0.5 * th * (th - 1.0)};
}
inline std::array<double, 3> quad_basis_deriv(double th) {
    return {th - 1.5, 2.0 - 2.0 * th, th - 0.5};
}

struct GhostConstraint {
    int i = 0, j = 0;  // ghost node (logical indices)
    int sx = 1, sy = 1;
    double theta_x = 0.0, theta_y = 0.0;
    Vec2 b_point;       // interface point the row enforces data at
    bool dirichlet = true;  // velocity rows interpolate; pressure rows are
                            // normal-derivative (homogeneous) rows
    bool boundary_condition = true;  // false: pure definition row, zero rhs
    int npts = 0;
    std::array<int, 9> ni{}, nj{};
    std::array<double, 9> w{};
    double w_self = 0.0;  // coefficient on the ghost node itself

    double row_dot(const Field& f) const {
        double s = 0.0;
        for (int k = 0; k < npts; ++k) s += w[k] * f(ni[k], nj[k]);
        return s;
    }
};

namespace detail {

inline bool usable(const SubgridClassification& sc, int i, int j) {
    return sc.cls.contains(i, j) && sc.cls(i, j) != NodeClass::Inactive;
}

inline bool find_nearest_internal(const SubgridClassification& sc, int gi, int gj,
                                  int& oi, int& oj) {
    const int max_ring = std::max(sc.geom.nx(), sc.geom.ny());
    for (int ring = 1; ring <= max_ring; ++ring) {
        for (int di = -ring; di <= ring; ++di)
            for (int dj = -ring; dj <= ring; ++dj) {
                if (std::max(std::abs(di), std::abs(dj)) != ring) continue;
                const int i = gi + di, j = gj + dj;
                if (sc.cls.contains(i, j) && sc.cls(i, j) == NodeClass::Internal) {
                    oi = i;
                    oj = j;
                    return true;
                }
            }
    }
    return false;
}

}  // namespace detail

// Build the constraint row for one ghost node. On the finest level the
// nine-point upwind stencil must be fully active; coarse levels fall back to
// a bilinear patch and finally to a copy of the nearest internal value, since
// coarse grids only smooth the error.
inline GhostConstraint make_ghost_constraint(const SubgridClassification& sc,
                                             const GhostNode& gn, double h,
                                             bool dirichlet, bool fine_level,
                                             bool* degraded = nullptr) {
    GhostConstraint c;
    c.i = gn.i;
    c.j = gn.j;
    c.b_point = gn.proj.point;
    c.dirichlet = dirichlet;
    const Vec2 n = gn.proj.normal;
    c.sx = (n.x >= 0.0) ? 1 : -1;
    c.sy = (n.y >= 0.0) ? 1 : -1;
    const Vec2 g = sc.geom.coord(gn.i, gn.j);
    c.theta_x = std::max(0.0, c.sx * (g.x - gn.proj.point.x) / h);
    c.theta_y = std::max(0.0, c.sy * (g.y - gn.proj.point.y) / h);

    auto node_ok = [&](int kx, int ky) {
        return detail::usable(sc, gn.i - kx * c.sx, gn.j - ky * c.sy);
    };

    bool full = true;
    for (int kx = 0; kx < 3 && full; ++kx)
        for (int ky = 0; ky < 3 && full; ++ky)
            if (!node_ok(kx, ky)) full = false;

    if (full) {
        const auto tx = quad_basis(c.theta_x);
        const auto ty = quad_basis(c.theta_y);
        const auto dtx = quad_basis_deriv(c.theta_x);
        const auto dty = quad_basis_deriv(c.theta_y);
        c.npts = 9;
        int k = 0;
        for (int kx = 0; kx < 3; ++kx)
            for (int ky = 0; ky < 3; ++ky, ++k) {
                c.ni[k] = gn.i - kx * c.sx;
                c.nj[k] = gn.j - ky * c.sy;
                if (dirichlet) {
                    c.w[k] = tx[kx] * ty[ky];
                } else {
                    c.w[k] = n.x * (-c.sx / h) * dtx[kx] * ty[ky] +
                             n.y * (-c.sy / h) * tx[kx] * dty[ky];
                }
            }
        return c;
    }

    if (degraded) *degraded = true;
    (void)fine_level;

    bool patch = true;
    for (int kx = 0; kx < 2 && patch; ++kx)
        for (int ky = 0; ky < 2 && patch; ++ky)
            if (!node_ok(kx, ky)) patch = false;

    if (patch) {
        const std::array<double, 2> lx{1.0 - c.theta_x, c.theta_x};
        const std::array<double, 2> ly{1.0 - c.theta_y, c.theta_y};
        const std::array<double, 2> dlx{-1.0, 1.0};
        const std::array<double, 2> dly{-1.0, 1.0};
        c.npts = 4;
        int k = 0;
        for (int kx = 0; kx < 2; ++kx)
            for (int ky = 0; ky < 2; ++ky, ++k) {
                c.ni[k] = gn.i - kx * c.sx;
                c.nj[k] = gn.j - ky * c.sy;
                if (dirichlet) {
                    c.w[k] = lx[kx] * ly[ky];
                } else {
                    c.w[k] = n.x * (-c.sx / h) * dlx[kx] * ly[ky] +
                             n.y * (-c.sy / h) * lx[kx] * dly[ky];
                }
            }
        return c;
    }

    int oi, oj;
    c.dirichlet = true;  // value-copy rows have a unit diagonal
    if (detail::find_nearest_internal(sc, gn.i, gn.j, oi, oj)) {
        c.npts = 2;
        c.ni[0] = gn.i;
        c.nj[0] = gn.j;
        c.w[0] = 1.0;
        c.ni[1] = oi;
        c.nj[1] = oj;
        c.w[1] = -1.0;
    } else {
        c.npts = 1;
        c.ni[0] = gn.i;
        c.nj[0] = gn.j;
        c.w[0] = 1.0;
    }
    return c;
}

struct DiscreteSystem {
    GridSpec spec;
    std::shared_ptr<const Classification> cls;
    double alpha = 0.0;
    std::vector<GhostConstraint> gu, gv, gp;

    const std::vector<GhostConstraint>& ghosts(SubgridKind k) const {
        switch (k) {
            case SubgridKind::XFace: return gu;
            case SubgridKind::YFace: return gv;
            case SubgridKind::CellCenter: return gp;
        }
        return gp;
    }

    // out = M x over every row (momentum / continuity / ghost / wall /
    // inactive identity / mean-pressure in the scalar slot).
    void apply(const StaggeredState& x, StaggeredState& out) const {
        const int n = spec.n;
        const double h = spec.h;
        const double ah2 = alpha / (h * h);

        for (int i = 0; i <= n; ++i)
            for (int j = -1; j <= n; ++j) {
                double r;
                switch (cls->u.at(i, j)) {
                    case NodeClass::Internal:
                        r = x.u(i, j) -
                            ah2 * (x.u(i + 1, j) + x.u(i - 1, j) + x.u(i, j + 1) +
                                   x.u(i, j - 1) - 4.0 * x.u(i, j)) +
                            (x.p(i, j) - x.p(i - 1, j)) / h;
                        break;
                    case NodeClass::Ghost:
                        r = gu[cls->u.ghost_index(i, j)].row_dot(x.u);
                        break;
                    case NodeClass::WallGhost:
                        r = (j == -1) ? x.u(i, -1) + 2.0 * x.u(i, 0) - x.u(i, 1) / 3.0
                                      : x.u(i, n) + 2.0 * x.u(i, n - 1) - x.u(i, n - 2) / 3.0;
                        break;
                    default:  // WallFace, Inactive
                        r = x.u(i, j);
                        break;
                }
                out.u(i, j) = r;
            }

        for (int i = -1; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                double r;
                switch (cls->v.at(i, j)) {
                    case NodeClass::Internal:
                        r = x.v(i, j) -
                            ah2 * (x.v(i + 1, j) + x.v(i - 1, j) + x.v(i, j + 1) +
                                   x.v(i, j - 1) - 4.0 * x.v(i, j)) +
                            (x.p(i, j) - x.p(i, j - 1)) / h;
                        break;
                    case NodeClass::Ghost:
                        r = gv[cls->v.ghost_index(i, j)].row_dot(x.v);
                        break;
                    case NodeClass::WallGhost:
                        r = (i == -1) ? x.v(-1, j) + 2.0 * x.v(0, j) - x.v(1, j) / 3.0
                                      : x.v(n, j) + 2.0 * x.v(n - 1, j) - x.v(n - 2, j) / 3.0;
                        break;
                    default:
                        r = x.v(i, j);
                        break;
                }
                out.v(i, j) = r;
            }

        double psum = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double r;
                switch (cls->p.at(i, j)) {
                    case NodeClass::Internal:
                        r = (x.u(i + 1, j) - x.u(i, j) + x.v(i, j + 1) - x.v(i, j)) / h -
                            x.xi;
                        psum += x.p(i, j);
                        break;
                    case NodeClass::Ghost:
                        r = gp[cls->p.ghost_index(i, j)].row_dot(x.p);
                        break;
                    default:
                        r = x.p(i, j);
                        break;
                }
                out.p(i, j) = r;
            }
        out.xi = psum;
    }

    void residual(const StaggeredState& x, const StaggeredState& rhs,
                  StaggeredState& out) const {
        apply(x, out);
        auto flip = [](Field& o, const Field& b) {
            double* op = o.data();
            const double* bp = b.data();
            for (std::size_t k = 0; k < o.size(); ++k) op[k] = bp[k] - op[k];
        };
        flip(out.u, rhs.u);
        flip(out.v, rhs.v);
        flip(out.p, rhs.p);
        out.xi = rhs.xi - out.xi;
    }

    double residual_inf(const StaggeredState& x, const StaggeredState& rhs,
                        StaggeredState& scratch) const {
        residual(x, rhs, scratch);
        return inf_norm(scratch);
    }
};

namespace detail {

// Ghost values actually read by the discretization: cross neighbours of
// internal same-grid nodes, continuity faces, the transverse quads of the
// convective stencils, and (transitively) members of consumed interpolation
// rows. Band ghosts outside this set only exist to carry field values for
// the moving-domain history.
inline std::vector<char> consumed_ghosts(const Classification& cls, SubgridKind kind,
                                         const std::vector<GhostConstraint>& cons) {
    const SubgridClassification& sc = cls.sub(kind);
    std::vector<char> used(sc.ghosts.size(), 0);
    auto mark = [&](int i, int j) {
        if (sc.ghost_index.contains(i, j) && sc.ghost_index(i, j) >= 0)
            used[sc.ghost_index(i, j)] = 1;
    };
    const int n = cls.spec.n;
    if (kind == SubgridKind::XFace) {
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j < n; ++j)
                if (cls.u.at(i, j) == NodeClass::Internal) {
                    mark(i - 1, j);
                    mark(i + 1, j);
                    mark(i, j - 1);
                    mark(i, j + 1);
                }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (cls.p.at(i, j) == NodeClass::Internal) {
                    mark(i, j);
                    mark(i + 1, j);
                }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= n; ++j)
                if (cls.v.at(i, j) == NodeClass::Internal) {
                    mark(i, j - 1);
                    mark(i + 1, j - 1);
                    mark(i, j);
                    mark(i + 1, j);
                }
    } else if (kind == SubgridKind::YFace) {
        for (int i = -1; i <= n; ++i)
            for (int j = 0; j <= n; ++j)
                if (cls.v.cls.contains(i, j) && cls.v.at(i, j) == NodeClass::Internal) {
                    mark(i - 1, j);
                    mark(i + 1, j);
                    mark(i, j - 1);
                    mark(i, j + 1);
                }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (cls.p.at(i, j) == NodeClass::Internal) {
                    mark(i, j);
                    mark(i, j + 1);
                }
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j < n; ++j)
                if (cls.u.at(i, j) == NodeClass::Internal) {
                    mark(i - 1, j);
                    mark(i, j);
                    mark(i - 1, j + 1);
                    mark(i, j + 1);
                }
    } else {
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j < n; ++j)
                if (cls.u.at(i, j) == NodeClass::Internal) {
                    mark(i - 1, j);
                    mark(i, j);
                }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= n; ++j)
                if (cls.v.at(i, j) == NodeClass::Internal) {
                    mark(i, j - 1);
                    mark(i, j);
                }
    }
    // transitive closure through the rows of consumed ghosts
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t r = 0; r < cons.size(); ++r) {
            if (!used[r]) continue;
            for (int k = 0; k < cons[r].npts; ++k) {
                const auto gi = sc.ghost_index.contains(cons[r].ni[k], cons[r].nj[k])
                                    ? sc.ghost_index(cons[r].ni[k], cons[r].nj[k])
                                    : -1;
                if (gi >= 0 && !used[gi]) {
                    used[gi] = 1;
                    changed = true;
                }
            }
        }
    }
    return used;
}

// Definition row for an unconsumed band ghost: quadratic extrapolation of the
// smooth extension along the upwind diagonal. These values feed only the
// moving-domain history, never the fluid rows, so a redundant boundary
// enforcement here would add nothing but a nearly singular block.
inline GhostConstraint make_extension_row(const SubgridClassification& sc,
                                          const GhostNode& gn, const GhostConstraint& base) {
    GhostConstraint c = base;
    auto ok = [&](int k) {
        return detail::usable(sc, gn.i - k * c.sx, gn.j - k * c.sy);
    };
    c.dirichlet = true;
    c.ni[0] = gn.i;
    c.nj[0] = gn.j;
    c.w[0] = 1.0;
    if (ok(1) && ok(2) && ok(3)) {
        c.npts = 4;
        const double wk[3] = {-3.0, 3.0, -1.0};
        for (int k = 1; k <= 3; ++k) {
            c.ni[k] = gn.i - k * c.sx;
            c.nj[k] = gn.j - k * c.sy;
            c.w[k] = wk[k - 1];
        }
    } else if (ok(1) && ok(2)) {
        c.npts = 3;
        c.ni[1] = gn.i - c.sx;
        c.nj[1] = gn.j - c.sy;
        c.w[1] = -2.0;
        c.ni[2] = gn.i - 2 * c.sx;
        c.nj[2] = gn.j - 2 * c.sy;
        c.w[2] = 1.0;
    } else if (ok(1)) {
        c.npts = 2;
        c.ni[1] = gn.i - c.sx;
        c.nj[1] = gn.j - c.sy;
        c.w[1] = -1.0;
    } else {
        int oi, oj;
        if (find_nearest_internal(sc, gn.i, gn.j, oi, oj)) {
            c.npts = 2;
            c.ni[1] = oi;
            c.nj[1] = oj;
            c.w[1] = -1.0;
        } else {
            c.npts = 1;
        }
    }
    return c;
}

}  // namespace detail

inline DiscreteSystem build_system(const GridSpec& spec,
                                   std::shared_ptr<const Classification> cls, double alpha,
                                   bool fine_level) {
    DiscreteSystem sys;
    sys.spec = spec;
    sys.cls = std::move(cls);
    sys.alpha = alpha;
    const double h = spec.h;
    auto cache_self = [](GhostConstraint& c) {
        c.w_self = 0.0;
        for (int k = 0; k < c.npts; ++k)
            if (c.ni[k] == c.i && c.nj[k] == c.j) c.w_self = c.w[k];
    };
    auto build_var = [&](SubgridKind kind, bool dirichlet,
                         std::vector<GhostConstraint>& out) {
        const SubgridClassification& sc = sys.cls->sub(kind);
        out.reserve(sc.ghosts.size());
        std::vector<char> degraded(sc.ghosts.size(), 0);
        for (std::size_t r = 0; r < sc.ghosts.size(); ++r) {
            bool d = false;
            out.push_back(make_ghost_constraint(sc, sc.ghosts[r], h, dirichlet,
                                                fine_level, &d));
            degraded[r] = d ? 1 : 0;
        }
        const std::vector<char> used = detail::consumed_ghosts(*sys.cls, kind, out);
        for (std::size_t r = 0; r < out.size(); ++r) {
            if (!used[r]) {
                out[r] = detail::make_extension_row(sc, sc.ghosts[r], out[r]);
                out[r].boundary_condition = false;
            } else if (degraded[r] && fine_level) {
                throw GeometryError(
                    "interpolation stencil of a consumed ghost touches an inactive node "
                    "at the finest level (node " + std::to_string(sc.ghosts[r].i) + "," +
                    std::to_string(sc.ghosts[r].j) + ")");
            }
            cache_self(out[r]);
        }
    };
    build_var(SubgridKind::XFace, true, sys.gu);
    build_var(SubgridKind::YFace, true, sys.gv);
    build_var(SubgridKind::CellCenter, false, sys.gp);
    return sys;
}

// Field-level centered difference operators, defined on internal nodes only
// (NaN elsewhere). Used by the right-hand-side assembly and the tests; the
// operator application above inlines the same formulas.
struct DiffOps {
    Field dpdx, dudx, dudy, lap_u;  // on the x-face grid
    Field dpdy, dvdx, dvdy, lap_v;  // on the y-face grid
    Field div;                      // on the cell-center grid
};

inline DiffOps diff_ops(const StaggeredState& s, const GridSpec& spec,
                        const Classification& cls) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double h = spec.h;
    DiffOps d;
    const Subgrid gu = Subgrid::make(SubgridKind::XFace, spec);
    const Subgrid gv = Subgrid::make(SubgridKind::YFace, spec);
    const Subgrid gp = Subgrid::make(SubgridKind::CellCenter, spec);
    d.dpdx = gu.make_field(nan);
    d.dudx = gu.make_field(nan);
    d.dudy = gu.make_field(nan);
    d.lap_u = gu.make_field(nan);
    d.dpdy = gv.make_field(nan);
    d.dvdx = gv.make_field(nan);
    d.dvdy = gv.make_field(nan);
    d.lap_v = gv.make_field(nan);
    d.div = gp.make_field(nan);

    for (int i = 0; i <= spec.n; ++i)
        for (int j = 0; j < spec.n; ++j) {
            if (cls.u.at(i, j) != NodeClass::Internal) continue;
            d.dpdx(i, j) = (s.p(i, j) - s.p(i - 1, j)) / h;
            d.dudx(i, j) = (s.u(i + 1, j) - s.u(i - 1, j)) / (2.0 * h);
            d.dudy(i, j) = (s.u(i, j + 1) - s.u(i, j - 1)) / (2.0 * h);
            d.lap_u(i, j) = (s.u(i + 1, j) + s.u(i - 1, j) + s.u(i, j + 1) +
                             s.u(i, j - 1) - 4.0 * s.u(i, j)) /
                            (h * h);
        }
    for (int i = 0; i < spec.n; ++i)
        for (int j = 0; j <= spec.n; ++j) {
            if (cls.v.at(i, j) != NodeClass::Internal) continue;
            d.dpdy(i, j) = (s.p(i, j) - s.p(i, j - 1)) / h;
            d.dvdx(i, j) = (s.v(i + 1, j) - s.v(i - 1, j)) / (2.0 * h);
            d.dvdy(i, j) = (s.v(i, j + 1) - s.v(i, j - 1)) / (2.0 * h);
            d.lap_v(i, j) = (s.v(i + 1, j) + s.v(i - 1, j) + s.v(i, j + 1) +
                             s.v(i, j - 1) - 4.0 * s.v(i, j)) /
                            (h * h);
        }
    for (int i = 0; i < spec.n; ++i)
        for (int j = 0; j < spec.n; ++j) {
            if (cls.p.at(i, j) != NodeClass::Internal) continue;
            d.div(i, j) = (s.u(i + 1, j) - s.u(i, j) + s.v(i, j + 1) - s.v(i, j)) / h;
        }
    return d;
}

// u dot grad u at staggered faces; the transverse component is the mean of
// the four nearest staggered neighbours. Values are produced wherever the
// whole stencil is active (ghost values participate), NaN elsewhere; rows of
// the discretization only ever read internal positions.
inline void convective_term(const StaggeredState& s, const GridSpec& spec,
                            const Classification& cls, Field& cu, Field& cv,
                            bool internal_only = true) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double h = spec.h;
    cu = Subgrid::make(SubgridKind::XFace, spec).make_field(nan);
    cv = Subgrid::make(SubgridKind::YFace, spec).make_field(nan);

    auto live = [](const SubgridClassification& sc, int i, int j) {
        return sc.cls.contains(i, j) && sc.cls(i, j) != NodeClass::Inactive;
    };

    for (int i = 1; i < spec.n; ++i)
        for (int j = 0; j < spec.n; ++j) {
            const NodeClass c = cls.u.at(i, j);
            if (internal_only ? (c != NodeClass::Internal)
                              : (c == NodeClass::Inactive))
                continue;
            if (!internal_only) {
                if (!(live(cls.u, i - 1, j) && live(cls.u, i + 1, j) &&
                      live(cls.u, i, j - 1) && live(cls.u, i, j + 1) &&
                      live(cls.v, i - 1, j) && live(cls.v, i, j) &&
                      live(cls.v, i - 1, j + 1) && live(cls.v, i, j + 1)))
                    continue;
            }
            const double vbar = 0.25 * (s.v(i - 1, j) + s.v(i, j) + s.v(i - 1, j + 1) +
                                        s.v(i, j + 1));
            cu(i, j) = s.u(i, j) * (s.u(i + 1, j) - s.u(i - 1, j)) / (2.0 * h) +
                       vbar * (s.u(i, j + 1) - s.u(i, j - 1)) / (2.0 * h);
        }
    for (int i = 0; i < spec.n; ++i)
        for (int j = 1; j < spec.n; ++j) {
            const NodeClass c = cls.v.at(i, j);
            if (internal_only ? (c != NodeClass::Internal)
                              : (c == NodeClass::Inactive))
                continue;
            if (!internal_only) {
                if (!(live(cls.v, i - 1, j) && live(cls.v, i + 1, j) &&
                      live(cls.v, i, j - 1) && live(cls.v, i, j + 1) &&
                      live(cls.u, i, j - 1) && live(cls.u, i + 1, j - 1) &&
                      live(cls.u, i, j) && live(cls.u, i + 1, j)))
                    continue;
            }
            const double ubar = 0.25 * (s.u(i, j - 1) + s.u(i + 1, j - 1) + s.u(i, j) +
                                        s.u(i + 1, j));
            cv(i, j) = ubar * (s.v(i + 1, j) - s.v(i - 1, j)) / (2.0 * h) +
                       s.v(i, j) * (s.v(i, j + 1) - s.v(i, j - 1)) / (2.0 * h);
        }
}

}  // namespace ghostflow
