#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ghostflow/system.hpp"
#include "support/reference_assembler.hpp"

using namespace ghostflow;

namespace {

// Sample an analytic function onto every node of a field (all classes), so
// centered stencils see the smooth extension everywhere.
template <typename F>
void fill_field(Field& f, const Subgrid& geom, F&& fn) {
    for (int i = geom.i_begin; i < geom.i_end; ++i)
        for (int j = geom.j_begin; j < geom.j_end; ++j) {
            const Vec2 p = geom.coord(i, j);
            f(i, j) = fn(p.x, p.y);
        }
}

StaggeredState random_state(const GridSpec& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    StaggeredState s(g);
    for (Field* f : {&s.u, &s.v, &s.p})
        for (std::size_t k = 0; k < f->size(); ++k) f->data()[k] = unit(rng);
    s.xi = unit(rng);
    return s;
}

std::shared_ptr<const Classification> circle_cls(const GridSpec& g) {
    return std::make_shared<const Classification>(
        classify(g, standard_shape(ShapeKind::Circle), 0.0, false));
}

}  // namespace

TEST_CASE("centered operators are exact on low-order fields") {
    const GridSpec g(24);
    auto cls = circle_cls(g);
    StaggeredState s(g);

    const Subgrid gu = Subgrid::make(SubgridKind::XFace, g);
    const Subgrid gv = Subgrid::make(SubgridKind::YFace, g);
    const Subgrid gp = Subgrid::make(SubgridKind::CellCenter, g);

    SECTION("constants") {
        fill_field(s.u, gu, [](double, double) { return 1.0; });
        fill_field(s.v, gv, [](double, double) { return 1.0; });
        const DiffOps d = diff_ops(s, g, *cls);
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (cls->p.at(i, j) == NodeClass::Internal)
                    CHECK(d.div(i, j) == Catch::Approx(0.0).margin(1e-13));
        for (int i = 0; i <= g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (cls->u.at(i, j) == NodeClass::Internal)
                    CHECK(d.lap_u(i, j) == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("linear velocity") {
        fill_field(s.u, gu, [](double x, double) { return x; });
        const DiffOps d = diff_ops(s, g, *cls);
        for (int i = 0; i <= g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (cls->u.at(i, j) == NodeClass::Internal) {
                    CHECK(d.dudx(i, j) == Catch::Approx(1.0).epsilon(1e-12));
                    CHECK(d.lap_u(i, j) == Catch::Approx(0.0).margin(1e-12));
                }
    }

    SECTION("quadratics hit centered stencils exactly") {
        fill_field(s.u, gu, [](double x, double) { return x * x; });
        fill_field(s.p, gp, [](double x, double) { return x * x; });
        const DiffOps d = diff_ops(s, g, *cls);
        for (int i = 0; i <= g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (cls->u.at(i, j) == NodeClass::Internal) {
                    const Vec2 pt = gu.coord(i, j);
                    CHECK(d.lap_u(i, j) == Catch::Approx(2.0).epsilon(1e-10));
                    CHECK(d.dpdx(i, j) == Catch::Approx(2.0 * pt.x).margin(1e-12));
                }
    }
}

TEST_CASE("convective term on reference fields") {
    const GridSpec g(20);
    auto cls = circle_cls(g);
    StaggeredState s(g);
    const Subgrid gu = Subgrid::make(SubgridKind::XFace, g);
    const Subgrid gv = Subgrid::make(SubgridKind::YFace, g);
    Field cu, cv;

    SECTION("constants advect nothing") {
        fill_field(s.u, gu, [](double, double) { return 1.7; });
        fill_field(s.v, gv, [](double, double) { return -0.4; });
        convective_term(s, g, *cls, cu, cv);
        for (int i = 1; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (cls->u.at(i, j) == NodeClass::Internal)
                    CHECK(cu(i, j) == Catch::Approx(0.0).margin(1e-13));
    }

    SECTION("shear field") {
        fill_field(s.u, gu, [](double, double y) { return y; });
        fill_field(s.v, gv, [](double, double) { return 0.0; });
        convective_term(s, g, *cls, cu, cv);
        for (int i = 1; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (cls->u.at(i, j) == NodeClass::Internal)
                    CHECK(cu(i, j) == Catch::Approx(0.0).margin(1e-13));
    }

    SECTION("divergence-free linear field") {
        fill_field(s.u, gu, [](double x, double) { return x; });
        fill_field(s.v, gv, [](double, double y) { return -y; });
        convective_term(s, g, *cls, cu, cv);
        for (int i = 1; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (cls->u.at(i, j) == NodeClass::Internal)
                    CHECK(cu(i, j) == Catch::Approx(gu.coord(i, j).x).margin(1e-12));
        for (int i = 0; i < g.n; ++i)
            for (int j = 1; j < g.n; ++j)
                if (cls->v.at(i, j) == NodeClass::Internal)
                    CHECK(cv(i, j) == Catch::Approx(gv.coord(i, j).y).margin(1e-12));
    }
}

TEST_CASE("ghost constraint weights") {
    const GridSpec g(32);
    auto cls = circle_cls(g);
    REQUIRE(!cls->u.ghosts.empty());

    SECTION("theta zero selects the ghost itself") {
        GhostNode gn = cls->u.ghosts.front();
        gn.proj.point = cls->u.geom.coord(gn.i, gn.j);
        const GhostConstraint c = make_ghost_constraint(cls->u, gn, g.h, true, true);
        REQUIRE(c.npts == 9);
        CHECK(c.w[0] == Catch::Approx(1.0));
        for (int k = 1; k < 9; ++k) CHECK(c.w[k] == Catch::Approx(0.0).margin(1e-14));
    }

    SECTION("theta (1,0) selects the first upwind x neighbour") {
        GhostNode gn = cls->u.ghosts.front();
        const Vec2 gpt = cls->u.geom.coord(gn.i, gn.j);
        const int sx = gn.proj.normal.x >= 0 ? 1 : -1;
        gn.proj.point = {gpt.x - sx * g.h, gpt.y};
        const GhostConstraint c = make_ghost_constraint(cls->u, gn, g.h, true, true);
        REQUIRE(c.npts == 9);
        for (int k = 0; k < 9; ++k) {
            if (c.ni[k] == gn.i - sx && c.nj[k] == gn.j)
                CHECK(c.w[k] == Catch::Approx(1.0));
            else
                CHECK(c.w[k] == Catch::Approx(0.0).margin(1e-14));
        }
    }

    SECTION("interpolation rows sum to one, derivative rows to zero") {
        const DiscreteSystem sys = build_system(g, cls, 0.01, true);
        for (const GhostConstraint& c : sys.gu) {
            double sum = 0.0;
            for (int k = 0; k < c.npts; ++k) sum += c.w[k];
            CHECK(sum == Catch::Approx(1.0).margin(1e-12));
            CHECK(c.theta_x >= 0.0);
            CHECK(c.theta_x <= 2.31);  // distance below sqrt(5) h per axis
            CHECK(c.theta_y <= 2.31);
        }
        for (const GhostConstraint& c : sys.gp) {
            double sum = 0.0;
            for (int k = 0; k < c.npts; ++k) sum += c.w[k];
            CHECK(sum == Catch::Approx(0.0).margin(1e-12));
        }
    }
}

TEST_CASE("biquadratic boundary interpolation reproduces biquadratics") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> theta(0.0, 2.0);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::uniform_int_distribution<int> sign(0, 1);
    const double h = 1.0 / 24.0;

    for (int trial = 0; trial < 500; ++trial) {
        const double tx = theta(rng), ty = theta(rng);
        const int sx = sign(rng) ? 1 : -1;
        const int sy = sign(rng) ? 1 : -1;
        const Vec2 g{coeff(rng), coeff(rng)};
        double c[3][3];
        for (auto& row : c)
            for (double& v : row) v = coeff(rng);
        auto q = [&](double x, double y) {
            double s = 0.0;
            for (int m = 0; m < 3; ++m)
                for (int n = 0; n < 3; ++n)
                    s += c[m][n] * std::pow(x, m) * std::pow(y, n);
            return s;
        };

        const auto wx = quad_basis(tx);
        const auto wy = quad_basis(ty);
        double interp = 0.0;
        for (int kx = 0; kx < 3; ++kx)
            for (int ky = 0; ky < 3; ++ky)
                interp += wx[kx] * wy[ky] * q(g.x - kx * sx * h, g.y - ky * sy * h);

        const Vec2 b{g.x - sx * tx * h, g.y - sy * ty * h};
        REQUIRE(interp == Catch::Approx(q(b.x, b.y)).margin(1e-11));
    }
}

TEST_CASE("operator matches the reference assembly") {
    std::mt19937_64 rng(99);
    for (int n : {8, 16}) {
        const GridSpec g(n);
        auto cls = circle_cls(g);
        const double alpha = g.h / 200.0;
        const DiscreteSystem sys = build_system(g, cls, alpha, true);
        const auto m = testing::assemble_reference_matrix(g, *cls, alpha);
        const testing::FlatIndex ix(g);

        StaggeredState out(g);
        for (int trial = 0; trial < 20; ++trial) {
            const StaggeredState x = random_state(g, rng);
            sys.apply(x, out);
            const Eigen::VectorXd ref = m * testing::pack_state(x, ix);
            const Eigen::VectorXd got = testing::pack_rows(out, ix);
            REQUIRE((ref - got).lpNorm<Eigen::Infinity>() < 1e-12);
        }
    }
}

TEST_CASE("operator linearity") {
    std::mt19937_64 rng(123);
    const GridSpec g(16);
    auto cls = circle_cls(g);
    const DiscreteSystem sys = build_system(g, cls, 0.004, true);

    const StaggeredState s1 = random_state(g, rng);
    const StaggeredState s2 = random_state(g, rng);
    const double a = 0.37, b = -1.21;

    StaggeredState combo(g);
    combo.set_zero();
    axpy(combo, a, s1);
    axpy(combo, b, s2);

    StaggeredState m1(g), m2(g), mc(g);
    sys.apply(s1, m1);
    sys.apply(s2, m2);
    sys.apply(combo, mc);

    StaggeredState expect(g);
    expect.set_zero();
    axpy(expect, a, m1);
    axpy(expect, b, m2);
    axpy(expect, -1.0, mc);
    CHECK(inf_norm(expect) < 1e-12);
}

TEST_CASE("constant pressure shift is a null direction") {
    std::mt19937_64 rng(7);
    const GridSpec g(24);
    auto cls = circle_cls(g);
    const DiscreteSystem sys = build_system(g, cls, 0.002, true);

    const StaggeredState x = random_state(g, rng);
    StaggeredState shifted = x;
    const double c = 3.25;
    int active = 0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            if (cls->p.at(i, j) != NodeClass::Inactive) shifted.p(i, j) += c;
    const int internal = cls->p.count(NodeClass::Internal);
    (void)active;

    StaggeredState mx(g), ms(g);
    sys.apply(x, mx);
    sys.apply(shifted, ms);

    for (int i = 0; i <= g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            if (cls->u.at(i, j) == NodeClass::Internal)
                CHECK(ms.u(i, j) == Catch::Approx(mx.u(i, j)).margin(1e-12));
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            if (cls->p.at(i, j) == NodeClass::Ghost)
                CHECK(ms.p(i, j) == Catch::Approx(mx.p(i, j)).margin(1e-10));
    CHECK(ms.xi - mx.xi == Catch::Approx(c * internal).epsilon(1e-12));

    // Zero state maps to zero rows.
    StaggeredState z(g), mz(g);
    z.set_zero();
    sys.apply(z, mz);
    CHECK(inf_norm(mz) == 0.0);
}

TEST_CASE("momentum rows are second order on smooth fields") {
    const double alpha = 0.01;
    auto u_exact = [](double x, double y) { return std::cos(5.0 * x) * std::cos(6.0 * y); };
    auto v_exact = [](double x, double y) { return std::sin(3.0 * x * x + 4.0 * y * y + 2.0); };
    auto p_exact = [](double x, double y) { return std::cos(6.0 * x) * std::sin(2.0 * y); };
    auto row_u = [&](double x, double y) {
        const double lap = -61.0 * std::cos(5.0 * x) * std::cos(6.0 * y);
        const double dpdx = -6.0 * std::sin(6.0 * x) * std::sin(2.0 * y);
        return u_exact(x, y) - alpha * lap + dpdx;
    };
    auto row_v = [&](double x, double y) {
        const double q = 3.0 * x * x + 4.0 * y * y + 2.0;
        const double lap = -std::sin(q) * (36.0 * x * x + 64.0 * y * y) + 14.0 * std::cos(q);
        const double dpdy = 2.0 * std::cos(6.0 * x) * std::cos(2.0 * y);
        return v_exact(x, y) - alpha * lap + dpdy;
    };

    std::vector<double> errs;
    std::vector<double> ns;
    for (int n : {16, 32, 64}) {
        const GridSpec g(n);
        auto cls = circle_cls(g);
        const DiscreteSystem sys = build_system(g, cls, alpha, true);
        StaggeredState s(g), out(g);
        fill_field(s.u, Subgrid::make(SubgridKind::XFace, g), u_exact);
        fill_field(s.v, Subgrid::make(SubgridKind::YFace, g), v_exact);
        fill_field(s.p, Subgrid::make(SubgridKind::CellCenter, g), p_exact);
        sys.apply(s, out);

        double err = 0.0;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j < n; ++j)
                if (cls->u.at(i, j) == NodeClass::Internal) {
                    const Vec2 pt = cls->u.geom.coord(i, j);
                    err = std::max(err, std::abs(out.u(i, j) - row_u(pt.x, pt.y)));
                }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= n; ++j)
                if (cls->v.at(i, j) == NodeClass::Internal) {
                    const Vec2 pt = cls->v.geom.coord(i, j);
                    err = std::max(err, std::abs(out.v(i, j) - row_v(pt.x, pt.y)));
                }
        errs.push_back(err);
        ns.push_back(n);
    }
    // least-squares slope of log err against log(1/n)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < errs.size(); ++k) {
        const double lx = std::log(1.0 / ns[k]), ly = std::log(errs[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double slope = (errs.size() * sxy - sx * sy) / (errs.size() * sxx - sx * sx);
    CHECK(slope >= 1.7);
}
