// Implicit geometry: analytic level-set shapes under rigid rotation, their
// normals and curvature, and the projection of outside points onto the zero
// isoline via a marched bisection against a grid-sampled field.
//
// Sign convention: phi > 0 inside the embedded object, phi < 0 in the fluid,
// phi = 0 on the interface.

#pragma once

#include <algorithm>
#include <optional>

#include "core.hpp"

namespace ghostflow {

enum class ShapeKind { Circle, Ellipse, Flower };

namespace detail {
struct Hessian {
    double xx = 0, xy = 0, yy = 0;
};
}  // namespace detail

struct LevelSet {
    ShapeKind kind = ShapeKind::Circle;
    double radius = 1.0;      // circle
    double a = 1.0, b = 1.0;  // ellipse semi-axes / flower base and petal amplitude
    double tilt = 0.0;        // ellipse axis rotation
    double omega = 0.0;       // rigid angular velocity about the origin

    static LevelSet circle(double r, double omega = 0.0) {
        LevelSet ls;
        ls.kind = ShapeKind::Circle;
        ls.radius = r;
        ls.omega = omega;
        return ls;
    }
    static LevelSet ellipse(double a, double b, double tilt, double omega = 0.0) {
        LevelSet ls;
        ls.kind = ShapeKind::Ellipse;
        ls.a = a;
        ls.b = b;
        ls.tilt = tilt;
        ls.omega = omega;
        return ls;
    }
    static LevelSet flower(double a, double b, double omega = 0.0) {
        LevelSet ls;
        ls.kind = ShapeKind::Flower;
        ls.a = a;
        ls.b = b;
        ls.omega = omega;
        return ls;
    }

    // Material point of the rigid motion: the queried point rotated back to
    // its position in the body frame.
    Vec2 body_frame(Vec2 p, double t) const {
        if (omega == 0.0 || t == 0.0) return p;
        const double c = std::cos(omega * t), s = std::sin(omega * t);
        return {c * p.x + s * p.y, -s * p.x + c * p.y};
    }

    double value(Vec2 p, double t) const {
        const Vec2 q = body_frame(p, t);
        return value0(q);
    }

    Vec2 gradient(Vec2 p, double t) const {
        const Vec2 q = body_frame(p, t);
        const Vec2 g = gradient0(q);
        if (omega == 0.0 || t == 0.0) return g;
        const double c = std::cos(omega * t), s = std::sin(omega * t);
        return {c * g.x - s * g.y, s * g.x + c * g.y};
    }

    // Unit normal pointing out of the fluid (toward increasing phi).
    Vec2 normal(Vec2 p, double t) const {
        const Vec2 g = gradient(p, t);
        const double m = g.norm();
        if (m < 1e-14)
            throw GeometryError("degenerate level-set gradient at (" +
                                std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
        return {g.x / m, g.y / m};
    }

    double curvature(Vec2 p, double t) const {
        const Vec2 q = body_frame(p, t);
        const Vec2 g0 = gradient0(q);
        const detail::Hessian h0 = hessian0(q);
        double gx = g0.x, gy = g0.y;
        detail::Hessian h = h0;
        if (omega != 0.0 && t != 0.0) {
            const double c = std::cos(omega * t), s = std::sin(omega * t);
            gx = c * g0.x - s * g0.y;
            gy = s * g0.x + c * g0.y;
            // H = R H0 R^T
            const double hxx = h0.xx, hxy = h0.xy, hyy = h0.yy;
            h.xx = c * (c * hxx - s * hxy) - s * (c * hxy - s * hyy);
            h.xy = c * (s * hxx + c * hxy) - s * (s * hxy + c * hyy);
            h.yy = s * (s * hxx + c * hxy) + c * (s * hxy + c * hyy);
        }
        const double m2 = gx * gx + gy * gy;
        const double m = std::sqrt(m2);
        if (m < 1e-14)
            throw GeometryError("degenerate level-set gradient in curvature");
        return (h.xx * gy * gy - 2.0 * h.xy * gx * gy + h.yy * gx * gx) / (m2 * m);
    }

    // Velocity of the material boundary point p under the rigid rotation.
    Vec2 boundary_velocity(Vec2 p) const { return {-omega * p.y, omega * p.x}; }

    double max_boundary_radius() const {
        switch (kind) {
            case ShapeKind::Circle: return radius;
            case ShapeKind::Ellipse: return std::max(a, b);
            case ShapeKind::Flower: return a + b;
        }
        return 0.0;
    }

    double max_boundary_speed() const { return std::abs(omega) * max_boundary_radius(); }

private:
    double value0(Vec2 p) const {
        switch (kind) {
            case ShapeKind::Circle:
                return radius * radius - (p.x * p.x + p.y * p.y);
            case ShapeKind::Ellipse: {
                const double c = std::cos(tilt), s = std::sin(tilt);
                const double X = c * p.x - s * p.y;
                const double Y = s * p.x + c * p.y;
                return 1.0 - (X * X) / (a * a) - (Y * Y) / (b * b);
            }
            case ShapeKind::Flower: {
                const double r2 = p.x * p.x + p.y * p.y;
                if (r2 == 0.0) return kLargePositive;  // deep inside the object
                const double r = std::sqrt(r2);
                const double r5 = r2 * r2 * r;
                const double poly = p.y * p.y * p.y * p.y * p.y +
                                    5.0 * p.x * p.x * p.x * p.x * p.y -
                                    10.0 * p.x * p.x * p.y * p.y * p.y;
                return a + b * poly / r5 - r;
            }
        }
        return 0.0;
    }

    Vec2 gradient0(Vec2 p) const {
        switch (kind) {
            case ShapeKind::Circle:
                return {-2.0 * p.x, -2.0 * p.y};
            case ShapeKind::Ellipse: {
                const double c = std::cos(tilt), s = std::sin(tilt);
                const double X = c * p.x - s * p.y;
                const double Y = s * p.x + c * p.y;
                return {-2.0 * X * c / (a * a) - 2.0 * Y * s / (b * b),
                        2.0 * X * s / (a * a) - 2.0 * Y * c / (b * b)};
            }
            case ShapeKind::Flower: {
                const double r2 = p.x * p.x + p.y * p.y;
                if (r2 == 0.0) return {0.0, 0.0};
                const double r = std::sqrt(r2);
                // In polar form phi = a + b sin(5 t) - r.
                const double th = std::atan2(p.y, p.x);
                const double c5 = std::cos(5.0 * th);
                return {-p.x / r - 5.0 * b * c5 * p.y / r2,
                        -p.y / r + 5.0 * b * c5 * p.x / r2};
            }
        }
        return {0.0, 0.0};
    }

    detail::Hessian hessian0(Vec2 p) const {
        detail::Hessian h;
        switch (kind) {
            case ShapeKind::Circle:
                h.xx = -2.0;
                h.yy = -2.0;
                h.xy = 0.0;
                break;
            case ShapeKind::Ellipse: {
                const double c = std::cos(tilt), s = std::sin(tilt);
                h.xx = -2.0 * c * c / (a * a) - 2.0 * s * s / (b * b);
                h.xy = 2.0 * c * s / (a * a) - 2.0 * c * s / (b * b);
                h.yy = -2.0 * s * s / (a * a) - 2.0 * c * c / (b * b);
                break;
            }
            case ShapeKind::Flower: {
                const double r2 = p.x * p.x + p.y * p.y;
                if (r2 == 0.0) break;
                const double r = std::sqrt(r2);
                const double r3 = r2 * r, r4 = r2 * r2;
                const double th = std::atan2(p.y, p.x);
                const double c5 = std::cos(5.0 * th), s5 = std::sin(5.0 * th);
                h.xx = -1.0 / r + p.x * p.x / r3 - 25.0 * b * s5 * p.y * p.y / r4 +
                       10.0 * b * c5 * p.x * p.y / r4;
                h.yy = -1.0 / r + p.y * p.y / r3 - 25.0 * b * s5 * p.x * p.x / r4 -
                       10.0 * b * c5 * p.x * p.y / r4;
                h.xy = p.x * p.y / r3 + 25.0 * b * s5 * p.x * p.y / r4 -
                       5.0 * b * c5 * (1.0 / r2 - 2.0 * p.y * p.y / r4);
                break;
            }
        }
        return h;
    }
};

// Benchmark shapes used throughout the test scenarios.
inline LevelSet standard_shape(ShapeKind kind, double omega = 0.0) {
    switch (kind) {
        case ShapeKind::Circle: return LevelSet::circle(1.0 / std::sqrt(15.0), omega);
        case ShapeKind::Ellipse:
            return LevelSet::ellipse(1.0 / std::sqrt(14.0), 1.0 / std::sqrt(2.0),
                                     M_PI / 6.0, omega);
        case ShapeKind::Flower: return LevelSet::flower(0.5, 0.15, omega);
    }
    return LevelSet::circle(1.0);
}

// Tensor-product linear interpolation of a 2x2 value patch at local
// coordinates (zx, zy) measured from the (0,0) corner.
inline double bilinear(double v00, double v10, double v01, double v11, double zx,
                       double zy) {
    assert(zx > -1e-12 && zx < 1.0 + 1e-12 && zy > -1e-12 && zy < 1.0 + 1e-12);
    return v00 * (1.0 - zx) * (1.0 - zy) + v10 * zx * (1.0 - zy) +
           v01 * (1.0 - zx) * zy + v11 * zx * zy;
}

// Level-set values frozen on the cell-vertex lattice of the computational box
// [-1,1]^2, queried through bilinear patches. The boundary projection walks
// on this sampled field rather than on the closed forms, so the geometry
// pipeline sees exactly what a grid-borne level set would provide.
class LevelSetSampler {
public:
    LevelSetSampler(const LevelSet& ls, int n, double t) : n_(n), h_(2.0 / n), values_(n + 1, n + 1) {
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j)
                values_(i, j) = ls.value({-1.0 + i * h_, -1.0 + j * h_}, t);
    }

    double value(Vec2 p) const {
        int ci, cj;
        double zx, zy;
        locate(p, ci, cj, zx, zy);
        return values_(ci, cj) * (1.0 - zx) * (1.0 - zy) +
               values_(ci + 1, cj) * zx * (1.0 - zy) +
               values_(ci, cj + 1) * (1.0 - zx) * zy +
               values_(ci + 1, cj + 1) * zx * zy;
    }

    Vec2 gradient(Vec2 p) const {
        int ci, cj;
        double zx, zy;
        locate(p, ci, cj, zx, zy);
        const double v00 = values_(ci, cj), v10 = values_(ci + 1, cj);
        const double v01 = values_(ci, cj + 1), v11 = values_(ci + 1, cj + 1);
        return {((v10 - v00) * (1.0 - zy) + (v11 - v01) * zy) / h_,
                ((v01 - v00) * (1.0 - zx) + (v11 - v10) * zx) / h_};
    }

    double h() const { return h_; }
    double vertex(int i, int j) const { return values_(i, j); }

private:
    // Pick the patch containing p; points outside the lattice use the nearest
    // edge patch with extrapolated local coordinates.
    void locate(Vec2 p, int& ci, int& cj, double& zx, double& zy) const {
        ci = std::clamp(static_cast<int>(std::floor((p.x + 1.0) / h_)), 0, n_ - 1);
        cj = std::clamp(static_cast<int>(std::floor((p.y + 1.0) / h_)), 0, n_ - 1);
        zx = (p.x - (-1.0 + ci * h_)) / h_;
        zy = (p.y - (-1.0 + cj * h_)) / h_;
    }

    int n_;
    double h_;
    Field values_;
};

struct BoundaryProjection {
    Vec2 point;     // projection of the ghost point onto the interface
    Vec2 normal;    // unit normal at the ghost point (out of the fluid)
    double distance = 0.0;
};

namespace detail {

// Sampled gradients can cancel exactly at symmetric interior points; fall
// back to pointing at the nearest fluid vertex so the march can start.
inline Vec2 march_normal(const LevelSetSampler& sampler, Vec2 p) {
    const Vec2 grad = sampler.gradient(p);
    const double m = grad.norm();
    if (m >= 1e-14) return {grad.x / m, grad.y / m};

    const double h = sampler.h();
    const int n = static_cast<int>(std::lround(2.0 / h));
    double best = std::numeric_limits<double>::infinity();
    Vec2 towards{0.0, 0.0};
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            if (sampler.vertex(i, j) > 0.0) continue;
            const Vec2 vtx{-1.0 + i * h, -1.0 + j * h};
            const double d = (vtx - p).norm();
            if (d < best) {
                best = d;
                towards = vtx;
            }
        }
    if (!std::isfinite(best) || best < 1e-14)
        throw GeometryError("degenerate sampled gradient at ghost point (" +
                            std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
    const Vec2 dir = towards - p;
    return {-dir.x / best, -dir.y / best};  // normal points away from the fluid
}

}  // namespace detail

// March from G against the normal in steps of h/2 until the sampled field
// changes sign, then bisect the bracketing segment down to eps = 0.01 h.
inline BoundaryProjection project_to_boundary(const LevelSetSampler& sampler, Vec2 g,
                                              double h) {
    const double phi_g = sampler.value(g);
    const Vec2 n_g = detail::march_normal(sampler, g);

    if (phi_g <= 0.0) return {g, n_g, 0.0};

    const double diag = 2.0 * std::sqrt(2.0);
    const long cap = 4 * static_cast<long>(std::ceil(diag / (0.5 * h)));

    Vec2 pt_in = g;   // becomes the first point with phi < 0
    Vec2 pt_out = g;  // last point with phi >= 0
    double phi_in = phi_g;
    long steps = 0;
    while (phi_in > 0.0) {
        if (++steps > cap)
            throw GeometryError("boundary projection march exceeded step cap; "
                                "malformed level set near (" +
                                std::to_string(g.x) + ", " + std::to_string(g.y) + ")");
        pt_out = pt_in;
        const Vec2 dir = detail::march_normal(sampler, pt_in);
        pt_in -= (0.5 * h) * dir;
        phi_in = sampler.value(pt_in);
    }

    const double eps = 0.01 * h;
    const double gap = (pt_in - pt_out).norm();
    Vec2 b = 0.5 * (pt_in + pt_out);
    if (gap > eps) {
        const int iters = static_cast<int>(std::ceil(std::log2(gap / eps)));
        for (int it = 0; it < iters; ++it) {
            b = 0.5 * (pt_in + pt_out);
            const double phi_b = sampler.value(b);
            if (phi_b * phi_in < 0.0) {
                pt_out = b;
            } else {
                pt_in = b;
                phi_in = phi_b;
            }
        }
    }
    return {b, n_g, (g - b).norm()};
}

}  // namespace ghostflow
