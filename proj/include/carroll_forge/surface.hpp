#pragma once

// Graph surfaces u = level - h(x, y) inside a Carrollian structure, the
// two-dimensional Riemannian geometry they inherit, and the checks that
// relate a potential form on the ambient structure to that geometry.
//
// Every surface field is an expression in the base coordinates (x, y) alone;
// the fibre coordinate disappears in the substitution u = level - h.  Ambient
// sample points are reused for the surface grid (their u entry is ignored by
// every surface expression), so one sampling policy serves both settings.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "carroll_forge/carroll.hpp"
#include "carroll_forge/expr.hpp"
#include "carroll_forge/geometry.hpp"
#include "carroll_forge/tolerance.hpp"

namespace carrollforge {

// Surface indices run over {0, 1} and name (x, y); expression variables are
// offset by one because slot 0 of the ambient chart is the fibre coordinate.
using SurfaceCovector = std::array<Expr, 2>;
using SurfaceTensor = std::array<std::array<Expr, 2>, 2>;

inline Expr surface_partial(const Expr& e, int i) { return differentiate(e, i + 1); }

struct SurfaceEmbedding {
    Expr h = Expr::constant(0);  // height over the (x, y) box
    double level = 0.0;          // the surface is the graph u = level - h
};

struct InducedGeometry {
    SurfaceTensor metric;
    SurfaceTensor inverse;
    std::array<SurfaceTensor, 2> christoffel;  // christoffel[l][j][k], derivative slot last
    Expr scalar_curvature;
    Expr volume_density;  // sqrt(det metric)
};

// Build the Levi-Civita package of a two-dimensional metric.  The metric must
// be positive definite on the sample grid; both leading minors are checked.
inline InducedGeometry make_surface_geometry(const SurfaceTensor& met,
                                             std::span<const Point> pts) {
    InducedGeometry geo;
    geo.metric = met;

    Expr det = met[0][0] * met[1][1] - met[0][1] * met[1][0];
    for (const Point& p : pts) {
        double d = evaluate(det, p);
        double lead = evaluate(met[0][0], p);
        if (!(d > tol::kNonVanishMin * tol::kNonVanishMin) || !(lead > tol::kNonVanishMin))
            throw GeometryError("surface metric is not positive definite on the sample grid");
    }

    geo.inverse[0][0] = met[1][1] / det;
    geo.inverse[0][1] = Expr::constant(0) - met[0][1] / det;
    geo.inverse[1][0] = Expr::constant(0) - met[1][0] / det;
    geo.inverse[1][1] = met[0][0] / det;
    geo.volume_density = sqrt(det);

    // dg[i][j][k] = d_k g_ij
    Expr dg[2][2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) dg[i][j][k] = surface_partial(met[i][j], k);

    for (int l = 0; l < 2; ++l)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                Expr sum = Expr::constant(0);
                for (int i = 0; i < 2; ++i)
                    sum = sum + geo.inverse[l][i] *
                                    (dg[i][j][k] + dg[i][k][j] - dg[j][k][i]);
                geo.christoffel[l][j][k] = Expr::constant(0.5) * sum;
            }

    // Curvature of the surface connection, then the scalar by double trace.
    Expr ric[2][2];
    for (int j = 0; j < 2; ++j)
        for (int l = 0; l < 2; ++l) {
            Expr sum = Expr::constant(0);
            for (int k = 0; k < 2; ++k) {
                Expr term = surface_partial(geo.christoffel[k][j][l], k) -
                            surface_partial(geo.christoffel[k][j][k], l);
                for (int m = 0; m < 2; ++m)
                    term = term + geo.christoffel[m][j][l] * geo.christoffel[k][m][k] -
                           geo.christoffel[m][j][k] * geo.christoffel[k][m][l];
                sum = sum + term;
            }
            ric[j][l] = sum;
        }
    Expr sc = Expr::constant(0);
    for (int j = 0; j < 2; ++j)
        for (int l = 0; l < 2; ++l) sc = sc + geo.inverse[j][l] * ric[j][l];
    geo.scalar_curvature = sc;
    return geo;
}

// Pull the spatial block of the degenerate metric back to the graph surface
// by substituting u = level - h.  The metric has no du components, so this
// substitution is the whole pullback.
inline InducedGeometry induced_metric(const CarrollStructure& c, const SurfaceEmbedding& s,
                                      std::span<const Point> pts) {
    Expr usub = Expr::constant(s.level) - s.h;
    TensorField g = c.metric();
    SurfaceTensor met;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) met[i][j] = substitute(g.at({i + 1, j + 1}), 0, usub);
    return make_surface_geometry(met, pts);
}

// Restrict the spatial block of the degenerate metric to a constant-u slice.
inline SurfaceTensor spatial_slice_metric(const CarrollStructure& c, double u0) {
    TensorField g = c.metric();
    SurfaceTensor met;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            met[i][j] = substitute(g.at({i + 1, j + 1}), 0, Expr::constant(u0));
    return met;
}

// Pull an Ehresmann form back to the surface.  The form is du + w_i dx^i, so
// the graph substitution contributes d(level - h) = -dh on top of the
// restricted base components.
inline SurfaceCovector pullback_form(const EhresmannForm& alpha, const SurfaceEmbedding& s) {
    Expr usub = Expr::constant(s.level) - s.h;
    SurfaceCovector out;
    out[0] = substitute(alpha.w1, 0, usub) - differentiate(s.h, 1);
    out[1] = substitute(alpha.w2, 0, usub) - differentiate(s.h, 2);
    return out;
}

// d_a w_b arranged with the derivative slot last: result[b][a] = grad_a w_b.
inline SurfaceTensor surface_covector_derivative(const InducedGeometry& geo,
                                                 const SurfaceCovector& w) {
    SurfaceTensor d;
    for (int b = 0; b < 2; ++b)
        for (int a = 0; a < 2; ++a) {
            Expr v = surface_partial(w[b], a);
            for (int m = 0; m < 2; ++m) v = v - geo.christoffel[m][b][a] * w[m];
            d[b][a] = v;
        }
    return d;
}

inline SurfaceTensor symmetrized_covariant_derivative(const InducedGeometry& geo,
                                                      const SurfaceCovector& w) {
    SurfaceTensor d = surface_covector_derivative(geo, w);
    SurfaceTensor s;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) s[a][b] = Expr::constant(0.5) * (d[a][b] + d[b][a]);
    return s;
}

// Second covariant derivative of a scalar.
inline SurfaceTensor surface_hessian(const InducedGeometry& geo, const Expr& f) {
    SurfaceCovector df{surface_partial(f, 0), surface_partial(f, 1)};
    return surface_covector_derivative(geo, df);
}

// result[a][b][c] = grad_c T_ab (derivative slot last).
inline std::array<SurfaceTensor, 2> surface_tensor_derivative(const InducedGeometry& geo,
                                                              const SurfaceTensor& t) {
    std::array<SurfaceTensor, 2> d;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                Expr v = surface_partial(t[a][b], c);
                for (int m = 0; m < 2; ++m)
                    v = v - geo.christoffel[m][a][c] * t[m][b] -
                        geo.christoffel[m][b][c] * t[a][m];
                d[a][b][c] = v;
            }
    return d;
}

// Fully lowered curvature tensor R_abcd of the surface connection.
inline std::array<std::array<SurfaceTensor, 2>, 2> surface_riemann_lowered(
    const InducedGeometry& geo) {
    // Upper form first: R^i_jkl = d_k G^i_jl - d_l G^i_jk + G^m_jl G^i_mk - G^m_jk G^i_ml.
    Expr up[2][2][2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    Expr v = surface_partial(geo.christoffel[i][j][l], k) -
                             surface_partial(geo.christoffel[i][j][k], l);
                    for (int m = 0; m < 2; ++m)
                        v = v + geo.christoffel[m][j][l] * geo.christoffel[i][m][k] -
                            geo.christoffel[m][j][k] * geo.christoffel[i][m][l];
                    up[i][j][k][l] = v;
                }
    std::array<std::array<SurfaceTensor, 2>, 2> low;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                for (int d = 0; d < 2; ++d) {
                    Expr v = Expr::constant(0);
                    for (int i = 0; i < 2; ++i) v = v + geo.metric[a][i] * up[i][b][c][d];
                    low[a][b][c][d] = v;
                }
    return low;
}

// B = metric - symmetrized covariant derivative of the pulled-back form.
inline SurfaceTensor b_tensor(const InducedGeometry& geo, const SurfaceCovector& pulled_alpha) {
    SurfaceTensor s = symmetrized_covariant_derivative(geo, pulled_alpha);
    SurfaceTensor b;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) b[i][j] = geo.metric[i][j] - s[i][j];
    return b;
}

// Convenience overload: pull the ambient form back and assemble B in one step.
inline SurfaceTensor b_tensor(const CarrollStructure& c, const EhresmannForm& alpha,
                              const SurfaceEmbedding& s, std::span<const Point> pts) {
    InducedGeometry geo = induced_metric(c, s, pts);
    return b_tensor(geo, pullback_form(alpha, s));
}

// Flat branch: the pulled-back form must have exterior derivative equal to a
// constant multiple of the induced volume form.  The pointwise multiple goes
// into factor_samples; the gate is its spread across the grid.
inline Verdict check_flat_case(const InducedGeometry& geo, const SurfaceCovector& pulled_alpha,
                               std::span<const Point> pts, double tolerance = tol::kResidual) {
    std::vector<double> sc;
    sc.reserve(pts.size());
    for (const Point& p : pts) sc.push_back(evaluate(geo.scalar_curvature, p));
    if (classify_signed_samples(sc) != ZeroClass::Vanishing)
        throw CheckError(
            "wrong branch: the flat-case check needs vanishing scalar curvature on the grid");

    Expr curl = surface_partial(pulled_alpha[1], 0) - surface_partial(pulled_alpha[0], 1);
    Expr ratio = curl / geo.volume_density;

    Verdict v;
    v.branch = "flat";
    double lo = 0, hi = 0;
    bool first = true;
    for (const Point& p : pts) {
        double r = evaluate(ratio, p);
        v.factor_samples.push_back(r);
        lo = first ? r : std::min(lo, r);
        hi = first ? r : std::max(hi, r);
        first = false;
    }
    v.residuals["ratio-spread"].add(hi - lo, 0.0);
    v.ok = all_pass(v.residuals, tolerance);
    v.notes.push_back("volume-form multiple spread " + std::to_string(hi - lo));
    return v;
}

// Curved branch: with scalar curvature bounded away from zero with one sign,
// B must be reproduced by twice the covariant derivative of the covector
// (1/Sc) (grad_c B_b^c - grad_b B_c^c).
inline Verdict check_curved_case(const InducedGeometry& geo, const SurfaceTensor& b,
                                 std::span<const Point> pts, double tolerance = tol::kResidual) {
    std::vector<double> sc;
    sc.reserve(pts.size());
    for (const Point& p : pts) sc.push_back(evaluate(geo.scalar_curvature, p));
    if (classify_signed_samples(sc) != ZeroClass::NonVanishing)
        throw CheckError(
            "wrong branch: the curved-case check needs scalar curvature bounded away from "
            "zero with a single sign");

    // Mixed tensor M_b^c = B_bm g^mc and its covariant derivative
    // D[b][c][a] = grad_a M_b^c.
    Expr mixed[2][2];
    for (int b0 = 0; b0 < 2; ++b0)
        for (int c = 0; c < 2; ++c) {
            Expr v = Expr::constant(0);
            for (int m = 0; m < 2; ++m) v = v + b[b0][m] * geo.inverse[m][c];
            mixed[b0][c] = v;
        }
    Expr dm[2][2][2];
    for (int b0 = 0; b0 < 2; ++b0)
        for (int c = 0; c < 2; ++c)
            for (int a = 0; a < 2; ++a) {
                Expr v = surface_partial(mixed[b0][c], a);
                for (int m = 0; m < 2; ++m)
                    v = v - geo.christoffel[m][b0][a] * mixed[m][c] +
                        geo.christoffel[c][m][a] * mixed[b0][m];
                dm[b0][c][a] = v;
            }

    // K_b = (grad_c M_b^c - grad_b M_c^c) / Sc, then compare 2 grad_a K_b
    // against B_ab.
    SurfaceCovector kvec;
    for (int b0 = 0; b0 < 2; ++b0) {
        Expr v = Expr::constant(0);
        for (int c = 0; c < 2; ++c) v = v + dm[b0][c][c] - dm[c][c][b0];
        kvec[b0] = v / geo.scalar_curvature;
    }
    SurfaceTensor dk = surface_covector_derivative(geo, kvec);

    Verdict v;
    v.branch = "curved";
    ResidualStat stat;
    for (const Point& p : pts)
        for (int a = 0; a < 2; ++a)
            for (int b0 = 0; b0 < 2; ++b0) {
                double lhs = 2.0 * evaluate(dk[b0][a], p);
                double rhs = evaluate(b[a][b0], p);
                stat.add(lhs - rhs, std::max(std::abs(lhs), std::abs(rhs)));
            }
    v.residuals["curved-residual"] = stat;
    v.ok = all_pass(v.residuals, tolerance);
    return v;
}

// Homothety candidate: the symmetrized covariant derivative of theta must
// equal the induced metric itself (constant 1 normalization).
inline Verdict verify_homothety(const InducedGeometry& geo, const SurfaceCovector& theta,
                                std::span<const Point> pts, double tolerance = tol::kResidual) {
    SurfaceTensor s = symmetrized_covariant_derivative(geo, theta);
    Verdict v;
    v.branch = "homothety";
    ResidualStat stat;
    for (const Point& p : pts)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                double lhs = evaluate(s[a][b], p);
                double rhs = evaluate(geo.metric[a][b], p);
                stat.add(lhs - rhs, std::max(std::abs(lhs), std::abs(rhs)));
            }
    v.residuals["homothety"] = stat;
    v.ok = all_pass(v.residuals, tolerance);
    return v;
}

}  // namespace carrollforge
