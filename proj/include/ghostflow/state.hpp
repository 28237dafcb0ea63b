// The monolithic unknown: staggered velocity components, cell-center
// pressure, and the scalar mean-divergence defect. The same shape serves as
// the row space, with the scalar slot holding the mean-pressure row.

#pragma once

#include "grid.hpp"

namespace ghostflow {

struct StaggeredState {
    Field u, v, p;
    double xi = 0.0;

    StaggeredState() = default;
    explicit StaggeredState(const GridSpec& g)
        : u(Subgrid::make(SubgridKind::XFace, g).make_field()),
          v(Subgrid::make(SubgridKind::YFace, g).make_field()),
          p(Subgrid::make(SubgridKind::CellCenter, g).make_field()) {}

    void set_zero() {
        u.fill(0.0);
        v.fill(0.0);
        p.fill(0.0);
        xi = 0.0;
    }

    Field& field(SubgridKind k) {
        switch (k) {
            case SubgridKind::XFace: return u;
            case SubgridKind::YFace: return v;
            case SubgridKind::CellCenter: return p;
        }
        return p;
    }
    const Field& field(SubgridKind k) const {
        switch (k) {
            case SubgridKind::XFace: return u;
            case SubgridKind::YFace: return v;
            case SubgridKind::CellCenter: return p;
        }
        return p;
    }
};

inline void axpy(StaggeredState& y, double a, const StaggeredState& x) {
    auto acc = [a](Field& yy, const Field& xx) {
        double* yp = yy.data();
        const double* xp = xx.data();
        for (std::size_t k = 0; k < yy.size(); ++k) yp[k] += a * xp[k];
    };
    acc(y.u, x.u);
    acc(y.v, x.v);
    acc(y.p, x.p);
    y.xi += a * x.xi;
}

inline double inf_norm(const StaggeredState& s) {
    double m = std::abs(s.xi);
    for (const Field* f : {&s.u, &s.v, &s.p}) {
        const double* d = f->data();
        for (std::size_t k = 0; k < f->size(); ++k) m = std::max(m, std::abs(d[k]));
    }
    return m;
}

}  // namespace ghostflow
