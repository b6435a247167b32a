#pragma once

// Degenerate-metric structures on a fibred three-manifold: the structure
// itself (chart plus upper-triangular spatial coframe), unit-fibre one-forms
// with their roles, fibre boosts, the distinguished antisymmetric torsion
// attached to a structure/form pair, and its trace covector.

#include <optional>
#include <string>
#include <vector>

#include "carroll_forge/geometry.hpp"

namespace carrollforge {

// ---------------------------------------------------------------------------
// Structures and forms

// Role a unit-fibre one-form plays.  Principal forms promise base components
// that are constant along the fibre; potential candidates are inputs to the
// potential-type connection builder.  The role is validated, never assumed.
enum class FormRole { Generic, Principal, PotentialCandidate };

inline const char* to_string(FormRole r) {
    switch (r) {
        case FormRole::Generic: return "generic";
        case FormRole::Principal: return "principal";
        case FormRole::PotentialCandidate: return "potential-candidate";
    }
    return "?";
}

// One-form w = du + w1 dx + w2 dy with unit fibre component.
struct EhresmannForm {
    Expr w1 = Expr::constant(0);
    Expr w2 = Expr::constant(0);
    FormRole role = FormRole::Generic;

    TensorField covector() const {
        TensorField w(0, 1, Basis::Coordinate);
        w.at({0}) = Expr::constant(1);
        w.at({1}) = w1;
        w.at({2}) = w2;
        return w;
    }
};

// The structure proper: an adapted chart, the degenerate metric encoded by an
// upper-triangular spatial coframe m^1 = m11 dx, m^2 = m21 dx + m22 dy, and
// the fibre vector field (the first coordinate direction, components (1,0,0)).
struct CarrollStructure {
    Chart chart;
    Expr m11 = Expr::constant(1);
    Expr m21 = Expr::constant(0);
    Expr m22 = Expr::constant(1);

    TensorField metric() const {
        TensorField g(0, 2, Basis::Coordinate);
        g.at({1, 1}) = m11 * m11 + m21 * m21;
        g.at({1, 2}) = m21 * m22;
        g.at({2, 1}) = m21 * m22;
        g.at({2, 2}) = m22 * m22;
        return g;
    }

    TensorField fibre_vector() const {
        TensorField ell(1, 0, Basis::Coordinate);
        ell.at({0}) = Expr::constant(1);
        return ell;
    }

    Frame frame(const EhresmannForm& w) const {
        return build_frame(m11, m21, m22, w.w1, w.w2);
    }
};

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
    std::vector<std::string> issues;
    bool ok() const { return issues.empty(); }
};

// Numeric sanity of the structure over a sample grid: usable domain box,
// coframe diagonal bounded away from zero, spatial metric block positive
// definite, metric independent of nothing it should not be (the fibre
// direction may appear; that is the interesting case).
inline ValidationReport validate_structure(const CarrollStructure& c, const std::vector<Point>& pts) {
    ValidationReport rep;
    for (int k = 0; k < kDim; ++k)
        if (!(c.chart.domain[k][0] < c.chart.domain[k][1]))
            rep.issues.push_back("domain of coordinate '" + c.chart.coords[static_cast<std::size_t>(k)] +
                                 "' is empty or reversed");
    if (!rep.ok()) return rep;

    std::vector<double> s11, s22;
    double min_det = 1e300;
    s11.reserve(pts.size());
    s22.reserve(pts.size());
    for (const auto& p : pts) {
        std::span<const double> sp(p.data(), p.size());
        const double a = evaluate(c.m11, sp);
        const double b = evaluate(c.m21, sp);
        const double d = evaluate(c.m22, sp);
        s11.push_back(a);
        s22.push_back(d);
        // Spatial metric block in coordinates; its determinant is (m11*m22)^2.
        const double gxx = a * a + b * b, gxy = b * d, gyy = d * d;
        min_det = std::min(min_det, gxx * gyy - gxy * gxy);
    }
    // A diagonal entry must be nonvanishing with a single sign; a sign flip
    // proves a zero crossing between samples even if no sample lands on it.
    if (classify_signed_samples(s11) != ZeroClass::NonVanishing)
        rep.issues.push_back("coframe entry m11 is not bounded away from zero on the sample grid");
    if (classify_signed_samples(s22) != ZeroClass::NonVanishing)
        rep.issues.push_back("coframe entry m22 is not bounded away from zero on the sample grid");
    if (min_det <= tol::kNonVanishMin * tol::kNonVanishMin)
        rep.issues.push_back("spatial metric block is not positive definite on the sample grid");
    return rep;
}

// Role consistency of a form over a sample grid.  Principal forms must have
// base components constant along the fibre.
inline ValidationReport validate_form(const EhresmannForm& w, const std::vector<Point>& pts) {
    ValidationReport rep;
    if (w.role != FormRole::Principal) return rep;
    double worst = 0;
    for (const auto& p : pts) {
        std::span<const double> sp(p.data(), p.size());
        worst = std::max(worst, std::abs(evaluate(differentiate(w.w1, 0), sp)));
        worst = std::max(worst, std::abs(evaluate(differentiate(w.w2, 0), sp)));
    }
    if (worst >= tol::kVanishMax)
        rep.issues.push_back("form is declared principal but its base components vary along the fibre");
    return rep;
}

// ---------------------------------------------------------------------------
// Boosts

// Freeze the base components of a form on the mid-fibre slice.  The result
// differs from the input by a boost (a change of Ehresmann form preserving
// the structure) and is principal by construction: its base components no
// longer depend on the fibre coordinate.
struct BoostResult {
    EhresmannForm form;
    double u0 = 0;
};

inline BoostResult boost_to_principal(const CarrollStructure& c, const EhresmannForm& w) {
    BoostResult out;
    out.u0 = c.chart.midpoint(0);
    const Expr slice = Expr::constant(out.u0);
    out.form.w1 = substitute(w.w1, 0, slice);
    out.form.w2 = substitute(w.w2, 0, slice);
    out.form.role = FormRole::Principal;
    return out;
}

// ---------------------------------------------------------------------------
// The distinguished torsion

// The unique antisymmetric (1,2) tensor satisfying, for the given structure
// and form w with fibre vector l,
//   (a) g(T(l, X), Y) = (1/2) (L_l g)(X, Y),
//   (b) w(T(l, X)) = (L_l w)(X),
//   (c) T(X, Y) = 0 whenever w(X) = w(Y) = 0.
// Assembled in the adapted frame, where (a) and (b) read off the components
// T^J_{1I} and T^1_{1B} directly, then pushed to coordinates.
inline TensorField minimal_torsion(const CarrollStructure& c, const EhresmannForm& w) {
    Frame f = c.frame(w);
    TensorField lg = change_basis(lie_derivative_along_fibre(c.metric()), f, Basis::Frame);
    TensorField lw = change_basis(lie_derivative_along_fibre(w.covector()), f, Basis::Frame);

    TensorField t(1, 2, Basis::Frame);
    const Expr half = Expr::constant(0.5);
    for (int B = 0; B < kDim; ++B) {
        t.at({0, 0, B}) = lw.at({B});
        t.at({0, B, 0}) = Expr::constant(0) - lw.at({B});
        for (int J = 1; J < kDim; ++J) {
            t.at({J, 0, B}) = half * lg.at({J, B});
            t.at({J, B, 0}) = Expr::constant(0) - half * lg.at({J, B});
        }
    }
    return change_basis(t, f, Basis::Coordinate);
}

// Lower the contravariant slot with the metric: T_{abc} = g_{ae} T^e_{bc}.
// The lowered slot stays first.  With a degenerate metric this loses the
// fibre row; callers must not expect to raise it back.
inline TensorField lower_first_index(const TensorField& t, const TensorField& g) {
    if (t.rank_up() != 1) throw GeometryError("lower_first_index expects exactly one contravariant slot");
    if (g.rank_up() != 0 || g.rank_down() != 2) throw GeometryError("lower_first_index expects a (0,2) metric");
    if (g.basis() != t.basis()) throw GeometryError("lower_first_index: bases differ");
    TensorField out(0, t.rank_down() + 1, t.basis());
    std::vector<int> idx(static_cast<std::size_t>(t.rank()), 0);
    for (std::size_t o = 0; o < out.size(); ++o) {
        std::vector<int> oidx = out.unflat(o);
        Expr sum = Expr::constant(0);
        for (int e = 0; e < kDim; ++e) {
            idx[0] = e;
            for (int s = 1; s < t.rank(); ++s) idx[static_cast<std::size_t>(s)] = oidx[static_cast<std::size_t>(s)];
            sum = sum + g.at({oidx[0], e}) * t[t.flat(idx)];
        }
        out[o] = sum;
    }
    return out;
}

// Verify the three defining constraints against an arbitrary (1,2) tensor
// given in coordinate components.  Residuals are reported per constraint in
// frame components, where the constraints are algebraic.
inline ResidualMap minimality_residuals(const CarrollStructure& c, const EhresmannForm& w,
                                        const TensorField& t_coord,
                                        const std::vector<Point>& pts) {
    if (t_coord.rank_up() != 1 || t_coord.rank_down() != 2 || t_coord.basis() != Basis::Coordinate)
        throw GeometryError("minimality_residuals expects a (1,2) coordinate-basis tensor");
    Frame f = c.frame(w);
    TensorField t = change_basis(t_coord, f, Basis::Frame);
    TensorField lg = change_basis(lie_derivative_along_fibre(c.metric()), f, Basis::Frame);
    TensorField lw = change_basis(lie_derivative_along_fibre(w.covector()), f, Basis::Frame);

    ResidualMap rm;
    auto& anti = rm["antisymmetry"];
    auto& metric_part = rm["metric-part"];
    auto& fibre_part = rm["fibre-part"];
    auto& kernel_part = rm["kernel-part"];

    for (const auto& p : pts) {
        std::span<const double> sp(p.data(), p.size());
        double tv[kDim][kDim][kDim];
        for (int A = 0; A < kDim; ++A)
            for (int B = 0; B < kDim; ++B)
                for (int C = 0; C < kDim; ++C)
                    tv[A][B][C] = evaluate(t.at({A, B, C}), sp);
        for (int A = 0; A < kDim; ++A)
            for (int B = 0; B < kDim; ++B)
                for (int C = B; C < kDim; ++C)
                    anti.add(tv[A][B][C] + tv[A][C][B],
                             std::max(std::abs(tv[A][B][C]), std::abs(tv[A][C][B])));
        for (int I = 1; I < kDim; ++I)
            for (int J = 1; J < kDim; ++J) {
                const double rhs = 0.5 * evaluate(lg.at({I, J}), sp);
                metric_part.add(tv[J][0][I] - rhs, std::max(std::abs(tv[J][0][I]), std::abs(rhs)));
                for (int A = 0; A < kDim; ++A) kernel_part.add(tv[A][I][J], std::abs(tv[A][I][J]));
            }
        for (int B = 0; B < kDim; ++B) {
            const double rhs = evaluate(lw.at({B}), sp);
            fibre_part.add(tv[0][0][B] - rhs, std::max(std::abs(tv[0][0][B]), std::abs(rhs)));
        }
    }
    return rm;
}

// ---------------------------------------------------------------------------
// Torsion trace

// Trace covector of a (1,2) torsion relative to the structure/form pair:
//   V_a = l^b T^c_{ba} w_c + (l^b T^c_{bc}) w_a.
// Its value on the fibre vector is the pure trace V(l) = T^c_{uc}.  When V(l)
// is nowhere zero the normalized covector gamma = (V - L_l w) / V(l) is
// defined as well.
struct TraceResult {
    TensorField V{0, 1, Basis::Coordinate};
    Expr V_on_fibre = Expr::constant(0);
    ZeroClass v_on_fibre_class = ZeroClass::Indeterminate;
    ZeroClass v_class = ZeroClass::Indeterminate;
    std::optional<TensorField> gamma;
};

inline TraceResult torsion_trace(const CarrollStructure& c, const EhresmannForm& w,
                                 const TensorField& t_coord, const std::vector<Point>& pts) {
    if (t_coord.rank_up() != 1 || t_coord.rank_down() != 2 || t_coord.basis() != Basis::Coordinate)
        throw GeometryError("torsion_trace expects a (1,2) coordinate-basis tensor");
    (void)c;
    TensorField wv = w.covector();

    Expr trace = Expr::constant(0);
    for (int e = 0; e < kDim; ++e) trace = trace + t_coord.at({e, 0, e});

    TraceResult out;
    for (int a = 0; a < kDim; ++a) {
        Expr s = Expr::constant(0);
        for (int e = 0; e < kDim; ++e) s = s + t_coord.at({e, 0, a}) * wv.at({e});
        out.V.at({a}) = s + trace * wv.at({a});
    }
    out.V_on_fibre = trace;

    std::vector<double> fibre_samples, norm_samples;
    fibre_samples.reserve(pts.size());
    norm_samples.reserve(pts.size());
    for (const auto& p : pts) {
        std::span<const double> sp(p.data(), p.size());
        fibre_samples.push_back(evaluate(out.V_on_fibre, sp));
        double n = 0;
        for (int a = 0; a < kDim; ++a) n = std::max(n, std::abs(evaluate(out.V.at({a}), sp)));
        norm_samples.push_back(n);
    }
    out.v_on_fibre_class = classify_signed_samples(fibre_samples);
    out.v_class = classify_norm_samples(norm_samples);

    if (out.v_on_fibre_class == ZeroClass::NonVanishing) {
        TensorField lw = lie_derivative_along_fibre(w.covector());
        TensorField g_(0, 1, Basis::Coordinate);
        for (int a = 0; a < kDim; ++a)
            g_.at({a}) = (out.V.at({a}) - lw.at({a})) / out.V_on_fibre;
        out.gamma = g_;
    }
    return out;
}

}  // namespace carrollforge
