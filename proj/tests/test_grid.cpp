#include <catch2/catch_amalgamated.hpp>

#include <queue>
#include <set>

#include "ghostflow/grid.hpp"

using namespace ghostflow;

TEST_CASE("subgrid layout and node counts") {
    const GridSpec g(12);
    CHECK(g.h == Catch::Approx(2.0 / 12.0));

    const Subgrid p = Subgrid::make(SubgridKind::CellCenter, g);
    const Subgrid u = Subgrid::make(SubgridKind::XFace, g);
    const Subgrid v = Subgrid::make(SubgridKind::YFace, g);

    CHECK(p.domain_node_count() == 144);
    CHECK(u.domain_node_count() == 13 * 12);
    CHECK(v.domain_node_count() == 12 * 13);

    CHECK(p.coord(0, 0).x == Catch::Approx(-1.0 + 0.5 * g.h));
    CHECK(u.coord(0, 0).x == Catch::Approx(-1.0));
    CHECK(u.coord(12, 3).x == Catch::Approx(1.0));
    CHECK(v.coord(3, 0).y == Catch::Approx(-1.0));
    CHECK(v.coord(3, 12).y == Catch::Approx(1.0));

    // Reflected wall layers.
    CHECK(u.j_begin == -1);
    CHECK(u.coord(4, -1).y == Catch::Approx(-1.0 - 0.5 * g.h));
    CHECK(v.i_begin == -1);
}

TEST_CASE("time step bound") {
    const GridSpec g30(60);  // h = 1/30
    CHECK(time_step_bound(g30, 0.0) == Catch::Approx(1.0 / 30.0));
    CHECK(time_step_bound(g30, 2.0) == Catch::Approx(1.0 / 60.0));
    const GridSpec g(40);  // h = 0.05
    CHECK(time_step_bound(g, 0.5) == Catch::Approx(0.05));
}

TEST_CASE("steady circle classification") {
    const GridSpec spec(60);
    const LevelSet ls = standard_shape(ShapeKind::Circle);
    const Classification c = classify(spec, ls, 0.0, false);

    const double r = 1.0 / std::sqrt(15.0);

    // Far-field x-face nodes away from walls are internal.
    int checked = 0;
    for (int i = 1; i < 60; ++i)
        for (int j = 0; j < 60; ++j) {
            const Vec2 pt = c.u.geom.coord(i, j);
            if (pt.norm() > r + c.delta && std::abs(pt.x) < 1.0 && std::abs(pt.y) < 1.0) {
                CHECK(c.u.at(i, j) == NodeClass::Internal);
                ++checked;
            }
        }
    CHECK(checked > 3000);

    // Cell centers partition into internal / ghost / inactive, and the
    // internal count matches a brute-force sign scan of the closed form.
    int brute_internal = 0;
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 60; ++j)
            if (ls.value(c.p.geom.coord(i, j), 0.0) < 0.0) ++brute_internal;
    CHECK(c.p.count(NodeClass::Internal) == brute_internal);
    CHECK(c.p.count(NodeClass::Internal) ==
          3600 - c.p.count(NodeClass::Ghost) - c.p.count(NodeClass::Inactive));
    CHECK(c.p.count(NodeClass::Ghost) > 0);
    CHECK(c.p.count(NodeClass::Inactive) > 0);

    // Each ghost carries its projection.
    for (const GhostNode& gn : c.p.ghosts) {
        CHECK(gn.proj.distance < c.delta);
        CHECK(gn.proj.normal.norm() == Catch::Approx(1.0).margin(1e-12));
        CHECK(std::abs(gn.proj.point.norm() - r) < 0.01 * spec.h + spec.h * spec.h);
    }
}

TEST_CASE("node exactly on the interface is a ghost") {
    // Circle radius chosen to coincide with a y-face node coordinate so the
    // closed form evaluates to exactly zero there.
    const double r = 0.4375;
    const GridSpec spec(16);
    const LevelSet ls = LevelSet::circle(r);
    REQUIRE(ls.value({r, 0.0}, 0.0) == 0.0);

    const Classification c = classify(spec, ls, 0.0, false);
    // v node (11, 8) sits at (0.4375, 0).
    REQUIRE(c.v.geom.coord(11, 8).x == Catch::Approx(r).margin(1e-15));
    REQUIRE(c.v.geom.coord(11, 8).y == Catch::Approx(0.0).margin(1e-15));
    CHECK(c.v.at(11, 8) == NodeClass::Ghost);
}

TEST_CASE("classification is deterministic") {
    const GridSpec spec(32);
    const LevelSet ls = standard_shape(ShapeKind::Flower);
    const Classification a = classify(spec, ls, 0.3, true);
    const Classification b = classify(spec, ls, 0.3, true);
    for (int i = a.u.geom.i_begin; i < a.u.geom.i_end; ++i)
        for (int j = a.u.geom.j_begin; j < a.u.geom.j_end; ++j)
            REQUIRE(a.u.at(i, j) == b.u.at(i, j));
    REQUIRE(a.p.ghosts.size() == b.p.ghosts.size());
}

TEST_CASE("moving band is a superset of the steady band") {
    const GridSpec spec(48);
    for (ShapeKind kind : {ShapeKind::Circle, ShapeKind::Ellipse, ShapeKind::Flower}) {
        const LevelSet ls = standard_shape(kind, 2.0 * M_PI / 5.0);
        const Classification steady = classify(spec, ls, 0.4, false);
        const Classification moving = classify(spec, ls, 0.4, true);
        for (const auto* pair :
             {&steady.u, &steady.v, &steady.p}) {
            const SubgridClassification& m = moving.sub(pair->geom.kind);
            for (const GhostNode& gn : pair->ghosts)
                CHECK(m.at(gn.i, gn.j) == NodeClass::Ghost);
        }
    }
}

TEST_CASE("ghost band is connected") {
    for (int n : {32, 60}) {
        const GridSpec spec(n);
        for (ShapeKind kind : {ShapeKind::Circle, ShapeKind::Ellipse, ShapeKind::Flower}) {
            const LevelSet ls = standard_shape(kind);
            const Classification c = classify(spec, ls, 0.0, false);
            for (const auto* sub : {&c.u, &c.v, &c.p}) {
                REQUIRE(!sub->ghosts.empty());
                // Flood fill with 8-neighbour adjacency over ghost nodes.
                std::set<std::pair<int, int>> unseen;
                for (const GhostNode& gn : sub->ghosts) unseen.insert({gn.i, gn.j});
                std::queue<std::pair<int, int>> frontier;
                frontier.push(*unseen.begin());
                unseen.erase(unseen.begin());
                while (!frontier.empty()) {
                    auto [i, j] = frontier.front();
                    frontier.pop();
                    for (int di = -1; di <= 1; ++di)
                        for (int dj = -1; dj <= 1; ++dj) {
                            auto it = unseen.find({i + di, j + dj});
                            if (it != unseen.end()) {
                                frontier.push(*it);
                                unseen.erase(it);
                            }
                        }
                }
                INFO("n=" << n << " shape=" << static_cast<int>(kind)
                          << " subgrid=" << static_cast<int>(sub->geom.kind));
                CHECK(unseen.empty());
            }
        }
    }
}

TEST_CASE("stencil check flags inactive neighbours of internal nodes") {
    const GridSpec spec(32);
    const LevelSet ls = standard_shape(ShapeKind::Circle);
    Classification c = classify(spec, ls, 0.0, false);
    REQUIRE(check_stencils(c));

    // Breaking one ghost next to the interface must trip the check.
    const GhostNode& gn = c.u.ghosts.front();
    c.u.cls(gn.i, gn.j) = NodeClass::Inactive;
    std::string what;
    CHECK(!check_stencils(c, &what));
    CHECK(!what.empty());
}
