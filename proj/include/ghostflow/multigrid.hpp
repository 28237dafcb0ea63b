// Geometric multigrid for the monolithic velocity--pressure system. Cells are
// smoothed by box relaxation (all five unknowns of a cell solved together),
// boundary rows by a fictitious-time update, and the global mean rows by an
// exact projection. Transfers are boundary-aware: residual restriction never
// mixes internal and ghost values, interpolation is plain bilinear per
// subgrid. The coarsest level is assembled and factorized directly.

#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "system.hpp"

namespace ghostflow {

struct MGConfig {
    int nu1 = 2;                   // pre-smoothing steps
    int nu2 = 1;                   // post-smoothing steps
    int lambda = 3;                // ghost sweeps per internal sweep
    double dtau_dirichlet = 0.9;   // fictitious time step, velocity rows
    double dtau_neumann = 0.9;     // fictitious time step, pressure rows (x h)
    enum class Cycle { W, V } cycle = Cycle::W;
    int coarsest_n = 8;
    int max_cycles = 50;
    double tolerance = 1e-9;       // relative to ||b||_inf
    // Solve each level's ghost-ghost block directly in the boundary phase
    // (the limit of many fictitious sweeps). The sweeps remain as fallback.
    bool exact_interface_solve = true;
};

// Flat enumeration of all unknowns, used for the coarsest-level factorization.
struct FlatMap {
    GridSpec spec;
    std::size_t u0 = 0, v0 = 0, p0 = 0, xi = 0, size = 0;

    FlatMap() = default;
    explicit FlatMap(const GridSpec& g) : spec(g) {
        const std::size_t nu = static_cast<std::size_t>(g.n + 1) * (g.n + 2);
        const std::size_t nv = static_cast<std::size_t>(g.n + 2) * (g.n + 1);
        u0 = 0;
        v0 = nu;
        p0 = nu + nv;
        xi = p0 + static_cast<std::size_t>(g.n) * g.n;
        size = xi + 1;
    }
    std::size_t u(int i, int j) const {
        return u0 + static_cast<std::size_t>(i) * (spec.n + 2) + (j + 1);
    }
    std::size_t v(int i, int j) const {
        return v0 + static_cast<std::size_t>(i + 1) * (spec.n + 1) + j;
    }
    std::size_t p(int i, int j) const {
        return p0 + static_cast<std::size_t>(i) * spec.n + j;
    }

    Eigen::VectorXd pack(const StaggeredState& s) const {
        Eigen::VectorXd out(size);
        std::size_t k = 0;
        for (const Field* f : {&s.u, &s.v, &s.p})
            for (std::size_t m = 0; m < f->size(); ++m) out[k++] = f->data()[m];
        out[k] = s.xi;
        return out;
    }
    void unpack(const Eigen::VectorXd& in, StaggeredState& s) const {
        std::size_t k = 0;
        for (Field* f : {&s.u, &s.v, &s.p})
            for (std::size_t m = 0; m < f->size(); ++m) f->data()[m] = in[k++];
        s.xi = in[k];
    }
};

// Explicit sparse rows of the same operator DiscreteSystem::apply computes.
inline Eigen::SparseMatrix<double> assemble_sparse(const DiscreteSystem& sys) {
    const GridSpec& g = sys.spec;
    const Classification& cls = *sys.cls;
    const FlatMap ix(g);
    const double h = g.h;
    const double ah2 = sys.alpha / (h * h);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(ix.size * 8);

    for (int i = 0; i <= g.n; ++i)
        for (int j = -1; j <= g.n; ++j) {
            const std::size_t row = ix.u(i, j);
            switch (cls.u.at(i, j)) {
                case NodeClass::Internal:
                    trip.emplace_back(row, ix.u(i, j), 1.0 + 4.0 * ah2);
                    trip.emplace_back(row, ix.u(i + 1, j), -ah2);
                    trip.emplace_back(row, ix.u(i - 1, j), -ah2);
                    trip.emplace_back(row, ix.u(i, j + 1), -ah2);
                    trip.emplace_back(row, ix.u(i, j - 1), -ah2);
                    trip.emplace_back(row, ix.p(i, j), 1.0 / h);
                    trip.emplace_back(row, ix.p(i - 1, j), -1.0 / h);
                    break;
                case NodeClass::Ghost: {
                    const GhostConstraint& c = sys.gu[cls.u.ghost_index(i, j)];
                    for (int k = 0; k < c.npts; ++k)
                        trip.emplace_back(row, ix.u(c.ni[k], c.nj[k]), c.w[k]);
                    break;
                }
                case NodeClass::WallGhost: {
                    const int j1 = (j == -1) ? 0 : g.n - 1;
                    const int j2 = (j == -1) ? 1 : g.n - 2;
                    trip.emplace_back(row, ix.u(i, j), 1.0);
                    trip.emplace_back(row, ix.u(i, j1), 2.0);
                    trip.emplace_back(row, ix.u(i, j2), -1.0 / 3.0);
                    break;
                }
                default:
                    trip.emplace_back(row, ix.u(i, j), 1.0);
                    break;
            }
        }
    for (int i = -1; i <= g.n; ++i)
        for (int j = 0; j <= g.n; ++j) {
            const std::size_t row = ix.v(i, j);
            switch (cls.v.at(i, j)) {
                case NodeClass::Internal:
                    trip.emplace_back(row, ix.v(i, j), 1.0 + 4.0 * ah2);
                    trip.emplace_back(row, ix.v(i + 1, j), -ah2);
                    trip.emplace_back(row, ix.v(i - 1, j), -ah2);
                    trip.emplace_back(row, ix.v(i, j + 1), -ah2);
                    trip.emplace_back(row, ix.v(i, j - 1), -ah2);
                    trip.emplace_back(row, ix.p(i, j), 1.0 / h);
                    trip.emplace_back(row, ix.p(i, j - 1), -1.0 / h);
                    break;
                case NodeClass::Ghost: {
                    const GhostConstraint& c = sys.gv[cls.v.ghost_index(i, j)];
                    for (int k = 0; k < c.npts; ++k)
                        trip.emplace_back(row, ix.v(c.ni[k], c.nj[k]), c.w[k]);
                    break;
                }
                case NodeClass::WallGhost: {
                    const int i1 = (i == -1) ? 0 : g.n - 1;
                    const int i2 = (i == -1) ? 1 : g.n - 2;
                    trip.emplace_back(row, ix.v(i, j), 1.0);
                    trip.emplace_back(row, ix.v(i1, j), 2.0);
                    trip.emplace_back(row, ix.v(i2, j), -1.0 / 3.0);
                    break;
                }
                default:
                    trip.emplace_back(row, ix.v(i, j), 1.0);
                    break;
            }
        }
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const std::size_t row = ix.p(i, j);
            switch (cls.p.at(i, j)) {
                case NodeClass::Internal:
                    trip.emplace_back(row, ix.u(i + 1, j), 1.0 / h);
                    trip.emplace_back(row, ix.u(i, j), -1.0 / h);
                    trip.emplace_back(row, ix.v(i, j + 1), 1.0 / h);
                    trip.emplace_back(row, ix.v(i, j), -1.0 / h);
                    trip.emplace_back(row, ix.xi, -1.0);
                    trip.emplace_back(ix.xi, ix.p(i, j), 1.0);
                    break;
                case NodeClass::Ghost: {
                    const GhostConstraint& c = sys.gp[cls.p.ghost_index(i, j)];
                    for (int k = 0; k < c.npts; ++k)
                        trip.emplace_back(row, ix.p(c.ni[k], c.nj[k]), c.w[k]);
                    break;
                }
                default:
                    trip.emplace_back(row, ix.p(i, j), 1.0);
                    break;
            }
        }

    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(ix.size),
                                  static_cast<Eigen::Index>(ix.size));
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

// Couplings among the ghost values of one subgrid; with internal values
// frozen the boundary rows form a small band system solved directly.
struct GhostBlock {
    bool ok = false;
    Eigen::SparseMatrix<double> w;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;

    void build(const std::vector<GhostConstraint>& cs, const SubgridClassification& sc) {
        ok = false;
        const int m = static_cast<int>(cs.size());
        if (m == 0) return;
        std::vector<Eigen::Triplet<double>> trip;
        for (int r = 0; r < m; ++r)
            for (int k = 0; k < cs[r].npts; ++k) {
                const int gi = sc.ghost_index(cs[r].ni[k], cs[r].nj[k]);
                if (gi >= 0) trip.emplace_back(r, gi, cs[r].w[k]);
            }
        w.resize(m, m);
        w.setFromTriplets(trip.begin(), trip.end());
        lu.compute(w);
        ok = (lu.info() == Eigen::Success);
    }

    // exact update of the ghost values from the current row defects
    void solve(const std::vector<GhostConstraint>& cs, Field& f, const Field& rhs) const {
        const int m = static_cast<int>(cs.size());
        if (m == 0) return;
        Eigen::VectorXd d(m);
        for (int r = 0; r < m; ++r) d[r] = rhs(cs[r].i, cs[r].j) - cs[r].row_dot(f);
        const Eigen::VectorXd delta = lu.solve(d);
        for (int r = 0; r < m; ++r) f(cs[r].i, cs[r].j) += delta[r];
    }
};

struct MGLevel {
    GridSpec spec;
    std::shared_ptr<const Classification> cls;
    DiscreteSystem sys;
    GhostBlock gb_u, gb_v, gb_p;
    StaggeredState x, b, r;
};

namespace relax {

// Momentum and continuity row residuals at the current iterate.
inline double res_u(const DiscreteSystem& s, const StaggeredState& x,
                    const StaggeredState& b, int i, int j) {
    const double h = s.spec.h, ah2 = s.alpha / (h * h);
    return b.u(i, j) - (x.u(i, j) -
                        ah2 * (x.u(i + 1, j) + x.u(i - 1, j) + x.u(i, j + 1) +
                               x.u(i, j - 1) - 4.0 * x.u(i, j)) +
                        (x.p(i, j) - x.p(i - 1, j)) / h);
}
inline double res_v(const DiscreteSystem& s, const StaggeredState& x,
                    const StaggeredState& b, int i, int j) {
    const double h = s.spec.h, ah2 = s.alpha / (h * h);
    return b.v(i, j) - (x.v(i, j) -
                        ah2 * (x.v(i + 1, j) + x.v(i - 1, j) + x.v(i, j + 1) +
                               x.v(i, j - 1) - 4.0 * x.v(i, j)) +
                        (x.p(i, j) - x.p(i, j - 1)) / h);
}
inline double res_p(const DiscreteSystem& s, const StaggeredState& x,
                    const StaggeredState& b, int i, int j) {
    const double h = s.spec.h;
    return b.p(i, j) -
           ((x.u(i + 1, j) - x.u(i, j) + x.v(i, j + 1) - x.v(i, j)) / h - x.xi);
}

// Gaussian elimination with partial pivoting for the cell-local system.
inline bool solve_small(double a[5][5], double rhs[5], int m) {
    for (int c = 0; c < m; ++c) {
        int piv = c;
        for (int r = c + 1; r < m; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (std::abs(a[piv][c]) < 1e-300) return false;
        if (piv != c) {
            for (int k = c; k < m; ++k) std::swap(a[c][k], a[piv][k]);
            std::swap(rhs[c], rhs[piv]);
        }
        for (int r = c + 1; r < m; ++r) {
            const double f = a[r][c] / a[c][c];
            for (int k = c; k < m; ++k) a[r][k] -= f * a[c][k];
            rhs[r] -= f * rhs[c];
        }
    }
    for (int c = m - 1; c >= 0; --c) {
        for (int k = c + 1; k < m; ++k) rhs[c] -= a[c][k] * rhs[k];
        rhs[c] /= a[c][c];
    }
    return true;
}

// Update all unknowns of cell (i,j) together: the cell's continuity row plus
// the momentum rows of whichever of its four faces are internal. Frozen faces
// keep their values. Border faces are revisited by the neighbouring cell, so
// they are updated twice per sweep.
inline void relax_cell(const DiscreteSystem& sys, StaggeredState& x,
                       const StaggeredState& b, int i, int j) {
    const Classification& cls = *sys.cls;
    const double h = sys.spec.h;
    const double ah2 = sys.alpha / (h * h);

    // face order: u(i,j), u(i+1,j), v(i,j), v(i,j+1)
    const bool in[4] = {cls.u.at(i, j) == NodeClass::Internal,
                        cls.u.at(i + 1, j) == NodeClass::Internal,
                        cls.v.at(i, j) == NodeClass::Internal,
                        cls.v.at(i, j + 1) == NodeClass::Internal};
    int map[4], m = 0;
    for (int f = 0; f < 4; ++f) map[f] = in[f] ? m++ : -1;
    if (m == 0) return;  // continuity alone has no diagonal; neighbours carry it

    // p-column signs in the momentum rows / velocity signs in continuity
    const double psign[4] = {1.0, -1.0, 1.0, -1.0};

    double a[5][5] = {};
    double rhs[5] = {};
    if (in[0]) rhs[map[0]] = res_u(sys, x, b, i, j);
    if (in[1]) rhs[map[1]] = res_u(sys, x, b, i + 1, j);
    if (in[2]) rhs[map[2]] = res_v(sys, x, b, i, j);
    if (in[3]) rhs[map[3]] = res_v(sys, x, b, i, j + 1);
    rhs[m] = res_p(sys, x, b, i, j);

    for (int f = 0; f < 4; ++f) {
        if (!in[f]) continue;
        a[map[f]][map[f]] = 1.0 + 4.0 * ah2;
        a[map[f]][m] = psign[f] / h;
        a[m][map[f]] = -psign[f] / h;
    }
    // the two x-faces (and the two y-faces) of one cell meet in each other's
    // Laplacian stencils
    if (in[0] && in[1]) a[map[0]][map[1]] = a[map[1]][map[0]] = -ah2;
    if (in[2] && in[3]) a[map[2]][map[3]] = a[map[3]][map[2]] = -ah2;
    a[m][m] = 0.0;

    if (!solve_small(a, rhs, m + 1))
        throw SolverError("singular box-relaxation system at cell (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");

    if (in[0]) x.u(i, j) += rhs[map[0]];
    if (in[1]) x.u(i + 1, j) += rhs[map[1]];
    if (in[2]) x.v(i, j) += rhs[map[2]];
    if (in[3]) x.v(i, j + 1) += rhs[map[3]];
    x.p(i, j) += rhs[m];
}

inline void box_sweep(const DiscreteSystem& sys, StaggeredState& x,
                      const StaggeredState& b) {
    const Classification& cls = *sys.cls;
    for (int i = 0; i < sys.spec.n; ++i)
        for (int j = 0; j < sys.spec.n; ++j)
            if (cls.p.at(i, j) == NodeClass::Internal) relax_cell(sys, x, b, i, j);
}

inline void ghost_row_update(Field& f, const GhostConstraint& c, double rhs,
                             double dtau) {
    f(c.i, c.j) += dtau * (rhs - c.row_dot(f));
}

// One fictitious-time pass over the embedded-boundary rows. Deep-band rows
// can carry a negative weight on their own node (local coordinate between 1
// and 2 along one axis); stepping those rows forward in fictitious time
// diverges, so the update direction follows the sign of the self weight --
// the same as relaxing the row scaled by -1.
inline void interface_sweep(const DiscreteSystem& sys, StaggeredState& x,
                            const StaggeredState& b, const MGConfig& cfg) {
    const double dt_d = cfg.dtau_dirichlet;
    const double dt_n = cfg.dtau_neumann * sys.spec.h;
    auto step = [](const GhostConstraint& c, double dt) {
        return (c.w_self < 0.0) ? -dt : dt;
    };
    for (const GhostConstraint& c : sys.gu)
        ghost_row_update(x.u, c, b.u(c.i, c.j), step(c, dt_d));
    for (const GhostConstraint& c : sys.gv)
        ghost_row_update(x.v, c, b.v(c.i, c.j), step(c, dt_d));
    for (const GhostConstraint& c : sys.gp)
        ghost_row_update(x.p, c, b.p(c.i, c.j), step(c, c.dirichlet ? dt_d : dt_n));
}

// Wall faces, reflected wall layers and inactive nodes have triangular rows;
// solve them exactly (faces first, the reflected rows read them).
inline void wall_sweep(const DiscreteSystem& sys, StaggeredState& x,
                       const StaggeredState& b) {
    const Classification& cls = *sys.cls;
    const int n = sys.spec.n;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j < n; ++j)
            if (cls.u.at(i, j) == NodeClass::WallFace) x.u(i, j) = b.u(i, j);
    for (int i = -1; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            if (cls.v.at(i, j) == NodeClass::WallFace) x.v(i, j) = b.v(i, j);
    for (int i = 0; i <= n; ++i) {
        x.u(i, -1) = b.u(i, -1) - 2.0 * x.u(i, 0) + x.u(i, 1) / 3.0;
        x.u(i, n) = b.u(i, n) - 2.0 * x.u(i, n - 1) + x.u(i, n - 2) / 3.0;
    }
    for (int j = 0; j <= n; ++j) {
        x.v(-1, j) = b.v(-1, j) - 2.0 * x.v(0, j) + x.v(1, j) / 3.0;
        x.v(n, j) = b.v(n, j) - 2.0 * x.v(n - 1, j) + x.v(n - 2, j) / 3.0;
    }
    for (int i = 0; i <= n; ++i)
        for (int j = -1; j <= n; ++j)
            if (cls.u.at(i, j) == NodeClass::Inactive) x.u(i, j) = b.u(i, j);
    for (int i = -1; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            if (cls.v.at(i, j) == NodeClass::Inactive) x.v(i, j) = b.v(i, j);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (cls.p.at(i, j) == NodeClass::Inactive) x.p(i, j) = b.p(i, j);
}

// Satisfy the two global rows exactly: xi absorbs the mean continuity defect
// and a constant pressure shift lands the zero-mean row. Momentum rows are
// invariant under the shift.
inline void global_update(const DiscreteSystem& sys, StaggeredState& x,
                          const StaggeredState& b) {
    const Classification& cls = *sys.cls;
    const int n = sys.spec.n;
    const double h = sys.spec.h;
    double acc = 0.0, psum = 0.0;
    int cnt = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (cls.p.at(i, j) == NodeClass::Internal) {
                acc += (x.u(i + 1, j) - x.u(i, j) + x.v(i, j + 1) - x.v(i, j)) / h -
                       b.p(i, j);
                psum += x.p(i, j);
                ++cnt;
            }
    if (cnt == 0) return;
    x.xi = acc / cnt;
    const double shift = (b.xi - psum) / cnt;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (cls.p.at(i, j) != NodeClass::Inactive) x.p(i, j) += shift;
}

inline void smooth(const DiscreteSystem& sys, StaggeredState& x, const StaggeredState& b,
                   const MGConfig& cfg, int nu, const MGLevel* blocks = nullptr) {
    const bool exact = blocks != nullptr && cfg.exact_interface_solve && blocks->gb_u.ok &&
                       blocks->gb_v.ok && blocks->gb_p.ok;
    for (int it = 0; it < nu; ++it) {
        box_sweep(sys, x, b);
        if (exact) {
            blocks->gb_u.solve(sys.gu, x.u, b.u);
            blocks->gb_v.solve(sys.gv, x.v, b.v);
            blocks->gb_p.solve(sys.gp, x.p, b.p);
        } else {
            for (int k = 0; k < cfg.lambda; ++k) interface_sweep(sys, x, b, cfg);
        }
        wall_sweep(sys, x, b);
        global_update(sys, x, b);
    }
}

}  // namespace relax

namespace transfer {

// Full-weighting restriction stencils; when part of the footprint has the
// wrong class, average over the surviving sources instead. Residuals of wall
// and inactive rows are solved exactly by the smoother, so their coarse
// right-hand sides are zero.
inline void restrict_residual(const StaggeredState& fine, const Classification& fcls,
                              const Classification& ccls, StaggeredState& coarse) {
    const int nc = ccls.spec.n;

    // x-faces
    for (int ic = 0; ic <= nc; ++ic)
        for (int jc = -1; jc <= nc; ++jc) {
            const NodeClass tc = ccls.u.at(ic, jc);
            if (tc != NodeClass::Internal && tc != NodeClass::Ghost) {
                coarse.u(ic, jc) = 0.0;
                continue;
            }
            const int fi = 2 * ic, fj0 = 2 * jc, fj1 = 2 * jc + 1;
            const int si[6] = {fi, fi, fi - 1, fi - 1, fi + 1, fi + 1};
            const int sj[6] = {fj0, fj1, fj0, fj1, fj0, fj1};
            const double w[6] = {0.25, 0.25, 0.125, 0.125, 0.125, 0.125};
            double full = 0.0, avg = 0.0;
            int kept = 0;
            bool all = true;
            for (int k = 0; k < 6; ++k) {
                if (fcls.u.cls.contains(si[k], sj[k]) && fcls.u.at(si[k], sj[k]) == tc) {
                    full += w[k] * fine.u(si[k], sj[k]);
                    avg += fine.u(si[k], sj[k]);
                    ++kept;
                } else {
                    all = false;
                }
            }
            if (kept == 0) {
                if (tc == NodeClass::Internal)
                    throw SolverError("no internal fine sources under coarse x-face (" +
                                      std::to_string(ic) + "," + std::to_string(jc) + ")");
                coarse.u(ic, jc) = 0.0;
            } else {
                coarse.u(ic, jc) = all ? full : avg / kept;
            }
        }

    // y-faces
    for (int ic = -1; ic <= nc; ++ic)
        for (int jc = 0; jc <= nc; ++jc) {
            const NodeClass tc = ccls.v.at(ic, jc);
            if (tc != NodeClass::Internal && tc != NodeClass::Ghost) {
                coarse.v(ic, jc) = 0.0;
                continue;
            }
            const int fj = 2 * jc, fi0 = 2 * ic, fi1 = 2 * ic + 1;
            const int si[6] = {fi0, fi1, fi0, fi1, fi0, fi1};
            const int sj[6] = {fj, fj, fj - 1, fj - 1, fj + 1, fj + 1};
            const double w[6] = {0.25, 0.25, 0.125, 0.125, 0.125, 0.125};
            double full = 0.0, avg = 0.0;
            int kept = 0;
            bool all = true;
            for (int k = 0; k < 6; ++k) {
                if (fcls.v.cls.contains(si[k], sj[k]) && fcls.v.at(si[k], sj[k]) == tc) {
                    full += w[k] * fine.v(si[k], sj[k]);
                    avg += fine.v(si[k], sj[k]);
                    ++kept;
                } else {
                    all = false;
                }
            }
            if (kept == 0) {
                if (tc == NodeClass::Internal)
                    throw SolverError("no internal fine sources under coarse y-face (" +
                                      std::to_string(ic) + "," + std::to_string(jc) + ")");
                coarse.v(ic, jc) = 0.0;
            } else {
                coarse.v(ic, jc) = all ? full : avg / kept;
            }
        }

    // cell centers
    for (int ic = 0; ic < nc; ++ic)
        for (int jc = 0; jc < nc; ++jc) {
            const NodeClass tc = ccls.p.at(ic, jc);
            if (tc != NodeClass::Internal && tc != NodeClass::Ghost) {
                coarse.p(ic, jc) = 0.0;
                continue;
            }
            double full = 0.0, avg = 0.0;
            int kept = 0;
            bool all = true;
            for (int di = 0; di < 2; ++di)
                for (int dj = 0; dj < 2; ++dj) {
                    const int si = 2 * ic + di, sj = 2 * jc + dj;
                    if (fcls.p.at(si, sj) == tc) {
                        full += 0.25 * fine.p(si, sj);
                        avg += fine.p(si, sj);
                        ++kept;
                    } else {
                        all = false;
                    }
                }
            if (kept == 0) {
                if (tc == NodeClass::Internal)
                    throw SolverError("no internal fine sources under coarse center (" +
                                      std::to_string(ic) + "," + std::to_string(jc) + ")");
                coarse.p(ic, jc) = 0.0;
            } else {
                coarse.p(ic, jc) = all ? full : avg / kept;
            }
        }

    // the zero-mean pressure row restricts with the internal-center count
    const int cf = fcls.p.count(NodeClass::Internal);
    const int cc = ccls.p.count(NodeClass::Internal);
    coarse.xi = (cf > 0) ? fine.xi * static_cast<double>(cc) / cf : 0.0;
}

// Bilinear interpolation of the coarse error, added into the fine state.
// Ghost values participate as sources: after the boundary phase they hold the
// smooth extension of the level's error, so no discontinuity separates them
// from internal values. Inactive sources are dropped and the surviving
// weights renormalized.
inline void prolong_add(const StaggeredState& coarse, const Classification& ccls,
                        const Classification& fcls, StaggeredState& fine) {
    const int nc = ccls.spec.n;
    const int nf = fcls.spec.n;

    struct W1 {
        int idx[2];
        double w[2];
        int cnt;
    };
    // aligned axis: even fine index coincides with a coarse node
    auto face_axis = [&](int i) {
        W1 o;
        if (i % 2 == 0) {
            o.cnt = 1;
            o.idx[0] = i / 2;
            o.w[0] = 1.0;
        } else {
            o.cnt = 2;
            o.idx[0] = (i - 1) / 2;
            o.idx[1] = (i + 1) / 2;
            o.w[0] = o.w[1] = 0.5;
        }
        return o;
    };
    // offset axis: fine node sits a quarter / three quarters between coarse ones
    auto cell_axis = [&](int j, int lo, int hi) {
        W1 o;
        o.cnt = 0;
        int a, bidx;
        double wa, wb;
        if (((j % 2) + 2) % 2 == 0) {  // j = 2m: neighbours m-1 (1/4) and m (3/4)
            a = j / 2 - 1;
            bidx = j / 2;
            wa = 0.25;
            wb = 0.75;
        } else {  // j = 2m+1: neighbours m (3/4) and m+1 (1/4)
            a = (j - 1) / 2;
            bidx = (j + 1) / 2;
            wa = 0.75;
            wb = 0.25;
        }
        if (a >= lo && a < hi) {
            o.idx[o.cnt] = a;
            o.w[o.cnt] = wa;
            ++o.cnt;
        }
        if (bidx >= lo && bidx < hi) {
            o.idx[o.cnt] = bidx;
            o.w[o.cnt] = wb;
            ++o.cnt;
        }
        return o;
    };

    // x-faces: aligned in x, offset in y (coarse rows live at -1 .. nc)
    for (int i = 0; i <= nf; ++i)
        for (int j = -1; j <= nf; ++j) {
            if (fcls.u.at(i, j) == NodeClass::Inactive) continue;
            const W1 ax = face_axis(i);
            const W1 ay = cell_axis(j, -1, nc + 1);
            double num = 0.0, den = 0.0;
            for (int kx = 0; kx < ax.cnt; ++kx)
                for (int ky = 0; ky < ay.cnt; ++ky) {
                    const int ci = ax.idx[kx], cj = ay.idx[ky];
                    if (ccls.u.at(ci, cj) == NodeClass::Inactive) continue;
                    const double w = ax.w[kx] * ay.w[ky];
                    num += w * coarse.u(ci, cj);
                    den += w;
                }
            if (den > 0.0) fine.u(i, j) += num / den;
        }

    // y-faces
    for (int i = -1; i <= nf; ++i)
        for (int j = 0; j <= nf; ++j) {
            if (fcls.v.at(i, j) == NodeClass::Inactive) continue;
            const W1 ax = cell_axis(i, -1, nc + 1);
            const W1 ay = face_axis(j);
            double num = 0.0, den = 0.0;
            for (int kx = 0; kx < ax.cnt; ++kx)
                for (int ky = 0; ky < ay.cnt; ++ky) {
                    const int ci = ax.idx[kx], cj = ay.idx[ky];
                    if (ccls.v.at(ci, cj) == NodeClass::Inactive) continue;
                    const double w = ax.w[kx] * ay.w[ky];
                    num += w * coarse.v(ci, cj);
                    den += w;
                }
            if (den > 0.0) fine.v(i, j) += num / den;
        }

    // cell centers: offset in both axes, no layers outside the box
    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nf; ++j) {
            if (fcls.p.at(i, j) == NodeClass::Inactive) continue;
            const W1 ax = cell_axis(i, 0, nc);
            const W1 ay = cell_axis(j, 0, nc);
            double num = 0.0, den = 0.0;
            for (int kx = 0; kx < ax.cnt; ++kx)
                for (int ky = 0; ky < ay.cnt; ++ky) {
                    const int ci = ax.idx[kx], cj = ay.idx[ky];
                    if (ccls.p.at(ci, cj) == NodeClass::Inactive) continue;
                    const double w = ax.w[kx] * ay.w[ky];
                    num += w * coarse.p(ci, cj);
                    den += w;
                }
            if (den > 0.0) fine.p(i, j) += num / den;
        }

    fine.xi += coarse.xi;
}

}  // namespace transfer

class MultigridSolver {
public:
    MultigridSolver(const GridSpec& spec, const LevelSet& ls, double t, bool moving,
                    double alpha, MGConfig cfg = {}, BandKind band = BandKind::Sqrt5)
        : cfg_(cfg) {
        auto fine = std::make_shared<const Classification>(
            classify(spec, ls, t, moving, band, /*strict=*/true));
        push_level(spec, fine, alpha, true);
        while (true) {
            const GridSpec& cur = levels_.back()->spec;
            if (cur.n <= cfg_.coarsest_n || cur.n % 2 != 0) break;
            if (!levels_.back()->cls->stencils_valid) break;  // stop at unresolved geometry
            const GridSpec half(cur.n / 2);
            auto ccls = std::make_shared<const Classification>(
                classify(half, ls, t, moving, band, /*strict=*/false));
            push_level(half, ccls, alpha, false);
        }
        const MGLevel& last = *levels_.back();
        coarse_matrix_ = assemble_sparse(last.sys);
        coarse_map_ = FlatMap(last.spec);
        coarse_lu_.compute(coarse_matrix_);
        if (coarse_lu_.info() != Eigen::Success)
            throw SolverError("coarsest-level factorization failed (n=" +
                              std::to_string(last.spec.n) + ")");
    }

    struct Result {
        bool converged = false;
        int cycles = 0;
        std::vector<double> residuals;  // inf norm, entry 0 before any cycle
    };

    // Solve M x = rhs, warm-started from the incoming x.
    Result solve(const StaggeredState& rhs, StaggeredState& x, bool throw_on_stall = true) {
        Result res;
        MGLevel& top = *levels_.front();
        top.b = rhs;
        top.x = x;
        const double bnorm = inf_norm(rhs);
        double rn = top.sys.residual_inf(top.x, top.b, top.r);
        res.residuals.push_back(rn);
        const double target = cfg_.tolerance * bnorm;
        while (rn > target && res.cycles < cfg_.max_cycles) {
            cycle(0);
            rn = top.sys.residual_inf(top.x, top.b, top.r);
            res.residuals.push_back(rn);
            ++res.cycles;
        }
        res.converged = rn <= target;
        x = top.x;
        if (!res.converged && throw_on_stall)
            throw ConvergenceError("multigrid stalled after " +
                                       std::to_string(res.cycles) + " cycles (residual " +
                                       std::to_string(rn) + ")",
                                   res.residuals);
        return res;
    }

    const DiscreteSystem& system() const { return levels_.front()->sys; }
    const Classification& classification() const { return *levels_.front()->cls; }
    std::shared_ptr<const Classification> classification_ptr() const {
        return levels_.front()->cls;
    }
    int level_count() const { return static_cast<int>(levels_.size()); }
    const MGLevel& level(int k) const { return *levels_[k]; }

    void smooth_on_finest(StaggeredState& x, const StaggeredState& b, int nu) {
        relax::smooth(levels_.front()->sys, x, b, cfg_, nu, levels_.front().get());
    }

private:
    void push_level(const GridSpec& spec, std::shared_ptr<const Classification> cls,
                    double alpha, bool fine) {
        auto lvl = std::make_unique<MGLevel>();
        lvl->spec = spec;
        lvl->cls = cls;
        lvl->sys = build_system(spec, cls, alpha, fine);
        lvl->gb_u.build(lvl->sys.gu, lvl->cls->u);
        lvl->gb_v.build(lvl->sys.gv, lvl->cls->v);
        lvl->gb_p.build(lvl->sys.gp, lvl->cls->p);
        lvl->x = StaggeredState(spec);
        lvl->b = StaggeredState(spec);
        lvl->r = StaggeredState(spec);
        levels_.push_back(std::move(lvl));
    }

    void cycle(std::size_t lev) {
        MGLevel& L = *levels_[lev];
        if (lev + 1 == levels_.size()) {
            Eigen::VectorXd sol = coarse_lu_.solve(coarse_map_.pack(L.b));
            coarse_map_.unpack(sol, L.x);
            return;
        }
        MGLevel& C = *levels_[lev + 1];
        relax::smooth(L.sys, L.x, L.b, cfg_, cfg_.nu1, &L);
        L.sys.residual(L.x, L.b, L.r);
        transfer::restrict_residual(L.r, *L.cls, *C.cls, C.b);
        C.x.set_zero();
        const int gamma = (cfg_.cycle == MGConfig::Cycle::W) ? 2 : 1;
        for (int g = 0; g < gamma; ++g) cycle(lev + 1);
        transfer::prolong_add(C.x, *C.cls, *L.cls, L.x);
        relax::smooth(L.sys, L.x, L.b, cfg_, cfg_.nu2, &L);
    }

    std::vector<std::unique_ptr<MGLevel>> levels_;
    MGConfig cfg_;
    Eigen::SparseMatrix<double> coarse_matrix_;
    FlatMap coarse_map_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> coarse_lu_;
};

}  // namespace ghostflow
