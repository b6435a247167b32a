#pragma once

// Affine connections with prescribed torsion on the fibred three-manifold:
// symbol storage in either basis, covariant derivatives of arbitrary-valence
// tensor fields, torsion and curvature, and the two canonical builders that
// produce a connection adapted to a structure/form pair.

#include <string>
#include <vector>

#include "carroll_forge/carroll.hpp"

namespace carrollforge {

// ---------------------------------------------------------------------------
// Connection symbols

// Symbols Gamma^a_{bc} with the derivative index LAST:
//   (grad V)^a_c = d_c V^a + Gamma^a_{bc} V^b,
//   (grad n)_bc  = d_c n_b - Gamma^a_{bc} n_a.
// Symbols are not tensor components; never run them through change_basis.
// Frame-basis symbols additionally absorb the frame's own rotation, see
// frame_symbols below.
class AffineConnection {
public:
    explicit AffineConnection(Basis basis = Basis::Coordinate)
        : basis_(basis), sym_(27, Expr::constant(0)) {}

    Basis basis() const { return basis_; }

    Expr& gamma(int a, int b, int c) { return sym_[index(a, b, c)]; }
    const Expr& gamma(int a, int b, int c) const { return sym_[index(a, b, c)]; }

private:
    static std::size_t index(int a, int b, int c) {
        if (a < 0 || a >= kDim || b < 0 || b >= kDim || c < 0 || c >= kDim)
            throw GeometryError("connection symbol index out of range");
        return static_cast<std::size_t>((a * kDim + b) * kDim + c);
    }
    Basis basis_;
    std::vector<Expr> sym_;
};

// Directional derivative of a scalar along frame vector e_C (coordinate
// version is plain d_c).
namespace detail {
inline Expr frame_derivative(const Expr& s, const Frame& f, int C) {
    Expr out = Expr::constant(0);
    for (int b = 0; b < kDim; ++b)
        out = out + f.e[static_cast<std::size_t>(C)][static_cast<std::size_t>(b)] * differentiate(s, b);
    return out;
}
}  // namespace detail

// Connection symbols relative to the frame:
//   Gamma^A_{BC} = theta^A_a e_C(e_B^a) + theta^A_a Gamma^a_{bc} e_B^b e_C^c.
inline AffineConnection frame_symbols(const AffineConnection& conn, const Frame& f) {
    if (conn.basis() != Basis::Coordinate)
        throw GeometryError("frame_symbols expects coordinate-basis input");
    AffineConnection out(Basis::Frame);
    for (int A = 0; A < kDim; ++A)
        for (int B = 0; B < kDim; ++B)
            for (int C = 0; C < kDim; ++C) {
                Expr s = Expr::constant(0);
                for (int a = 0; a < kDim; ++a) {
                    s = s + f.theta[static_cast<std::size_t>(A)][static_cast<std::size_t>(a)] *
                                detail::frame_derivative(f.e[static_cast<std::size_t>(B)][static_cast<std::size_t>(a)], f, C);
                    for (int b = 0; b < kDim; ++b)
                        for (int c = 0; c < kDim; ++c)
                            s = s + f.theta[static_cast<std::size_t>(A)][static_cast<std::size_t>(a)] * conn.gamma(a, b, c) *
                                        f.e[static_cast<std::size_t>(B)][static_cast<std::size_t>(b)] *
                                        f.e[static_cast<std::size_t>(C)][static_cast<std::size_t>(c)];
                }
                out.gamma(A, B, C) = s;
            }
    return out;
}

// ---------------------------------------------------------------------------
// Covariant derivative

// Coordinate-basis covariant derivative; the derivative slot is appended as
// the LAST covariant slot, matching partial_derivative.
inline TensorField covariant_derivative(const TensorField& t, const AffineConnection& conn) {
    if (conn.basis() != Basis::Coordinate || t.basis() != Basis::Coordinate)
        throw GeometryError("covariant_derivative: coordinate overload needs coordinate basis");
    TensorField out(t.rank_up(), t.rank_down() + 1, Basis::Coordinate);
    std::vector<int> idx;
    for (std::size_t o = 0; o < out.size(); ++o) {
        std::vector<int> oidx = out.unflat(o);
        const int d = oidx.back();
        idx.assign(oidx.begin(), oidx.end() - 1);
        Expr s = differentiate(t[t.flat(idx)], d);
        for (int slot = 0; slot < t.rank(); ++slot) {
            const int live = idx[static_cast<std::size_t>(slot)];
            for (int e = 0; e < kDim; ++e) {
                idx[static_cast<std::size_t>(slot)] = e;
                const Expr& te = t[t.flat(idx)];
                if (slot < t.rank_up())
                    s = s + conn.gamma(live, e, d) * te;
                else
                    s = s - conn.gamma(e, live, d) * te;
            }
            idx[static_cast<std::size_t>(slot)] = live;
        }
        out[o] = s;
    }
    return out;
}

// Frame-basis covariant derivative; scalar derivatives run along the frame
// vectors themselves.
inline TensorField covariant_derivative(const TensorField& t, const AffineConnection& conn, const Frame& f) {
    if (conn.basis() != Basis::Frame || t.basis() != Basis::Frame)
        throw GeometryError("covariant_derivative: frame overload needs frame basis");
    TensorField out(t.rank_up(), t.rank_down() + 1, Basis::Frame);
    std::vector<int> idx;
    for (std::size_t o = 0; o < out.size(); ++o) {
        std::vector<int> oidx = out.unflat(o);
        const int D = oidx.back();
        idx.assign(oidx.begin(), oidx.end() - 1);
        Expr s = detail::frame_derivative(t[t.flat(idx)], f, D);
        for (int slot = 0; slot < t.rank(); ++slot) {
            const int live = idx[static_cast<std::size_t>(slot)];
            for (int e = 0; e < kDim; ++e) {
                idx[static_cast<std::size_t>(slot)] = e;
                const Expr& te = t[t.flat(idx)];
                if (slot < t.rank_up())
                    s = s + conn.gamma(live, e, D) * te;
                else
                    s = s - conn.gamma(e, live, D) * te;
            }
            idx[static_cast<std::size_t>(slot)] = live;
        }
        out[o] = s;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Torsion and curvature

// T^a_{bc} = Gamma^a_{cb} - Gamma^a_{bc}.
inline TensorField torsion_of(const AffineConnection& conn) {
    if (conn.basis() != Basis::Coordinate)
        throw GeometryError("torsion_of: coordinate overload needs coordinate basis");
    TensorField t(1, 2, Basis::Coordinate);
    for (int a = 0; a < kDim; ++a)
        for (int b = 0; b < kDim; ++b)
            for (int c = 0; c < kDim; ++c)
                t.at({a, b, c}) = conn.gamma(a, c, b) - conn.gamma(a, b, c);
    return t;
}

// Frame version picks up the anholonomy: T^A_{BC} = Gamma^A_{CB} -
// Gamma^A_{BC} - C^A_{BC}.
inline TensorField torsion_of(const AffineConnection& conn, const Frame& f) {
    if (conn.basis() != Basis::Frame)
        throw GeometryError("torsion_of: frame overload needs frame basis");
    TensorField t(1, 2, Basis::Frame);
    for (int A = 0; A < kDim; ++A)
        for (int B = 0; B < kDim; ++B)
            for (int C = 0; C < kDim; ++C)
                t.at({A, B, C}) = conn.gamma(A, C, B) - conn.gamma(A, B, C) -
                                  f.c[static_cast<std::size_t>(A)][static_cast<std::size_t>(B)][static_cast<std::size_t>(C)];
    return t;
}

// R^a_{bcd} = d_c Gamma^a_{bd} - d_d Gamma^a_{bc}
//           + Gamma^e_{bd} Gamma^a_{ec} - Gamma^e_{bc} Gamma^a_{ed},
// so that [grad_c, grad_d] V^a = R^a_{bcd} V^b - T^e_{cd} grad_e V^a.
inline TensorField curvature_of(const AffineConnection& conn) {
    if (conn.basis() != Basis::Coordinate)
        throw GeometryError("curvature_of: coordinate overload needs coordinate basis");
    TensorField r(1, 3, Basis::Coordinate);
    for (int a = 0; a < kDim; ++a)
        for (int b = 0; b < kDim; ++b)
            for (int c = 0; c < kDim; ++c)
                for (int d = 0; d < kDim; ++d) {
                    Expr s = differentiate(conn.gamma(a, b, d), c) - differentiate(conn.gamma(a, b, c), d);
                    for (int e = 0; e < kDim; ++e)
                        s = s + conn.gamma(e, b, d) * conn.gamma(a, e, c) -
                            conn.gamma(e, b, c) * conn.gamma(a, e, d);
                    r.at({a, b, c, d}) = s;
                }
    return r;
}

// Frame version: scalar derivatives along the frame, plus the anholonomy
// correction -C^E_{CD} Gamma^A_{BE}.
inline TensorField curvature_of(const AffineConnection& conn, const Frame& f) {
    if (conn.basis() != Basis::Frame)
        throw GeometryError("curvature_of: frame overload needs frame basis");
    TensorField r(1, 3, Basis::Frame);
    for (int A = 0; A < kDim; ++A)
        for (int B = 0; B < kDim; ++B)
            for (int C = 0; C < kDim; ++C)
                for (int D = 0; D < kDim; ++D) {
                    Expr s = detail::frame_derivative(conn.gamma(A, B, D), f, C) -
                             detail::frame_derivative(conn.gamma(A, B, C), f, D);
                    for (int E = 0; E < kDim; ++E)
                        s = s + conn.gamma(E, B, D) * conn.gamma(A, E, C) -
                            conn.gamma(E, B, C) * conn.gamma(A, E, D) -
                            f.c[static_cast<std::size_t>(E)][static_cast<std::size_t>(C)][static_cast<std::size_t>(D)] * conn.gamma(A, B, E);
                    r.at({A, B, C, D}) = s;
                }
    return r;
}

// ---------------------------------------------------------------------------
// Builders

enum class ConnectionKind { Scm, Pcs };

inline const char* to_string(ConnectionKind k) {
    return k == ConnectionKind::Scm ? "scm" : "pcs";
}

struct BuiltConnection {
    AffineConnection conn;
    TensorField torsion{1, 2, Basis::Coordinate};  // the distinguished torsion used
    EhresmannForm form;
};

// Build the canonical connection for the pair (structure, form):
//   * fibre rows vanish: Gamma^a_{.c} with the fibre in the transported slot,
//   * Gamma^a_{i.} along the fibre equals the distinguished torsion T^a_{.i},
//   * the spatial block solves metric compatibility with that torsion,
//   * the fibre component of the spatial block is fixed by the symmetrized
//     gradient of the form: zero for the strict kind, the metric itself for
//     the potential kind.
// The strict kind needs base components constant along the fibre; boost
// first if they are not.
inline BuiltConnection build_connection(const CarrollStructure& c, const EhresmannForm& w,
                                        ConnectionKind kind) {
    if (kind == ConnectionKind::Scm && (depends_on(w.w1, 0) || depends_on(w.w2, 0)))
        throw CheckError("strict connection needs fibre-independent base components; apply a boost first");

    const TensorField g = c.metric();
    const TensorField t = minimal_torsion(c, w);
    const TensorField tlow = lower_first_index(t, g);
    const TensorField dg = partial_derivative(g);
    const TensorField wv = w.covector();
    const TensorField dwv = partial_derivative(wv);

    // Inverse of the 2x2 spatial metric block.
    const Expr det = g.at({1, 1}) * g.at({2, 2}) - g.at({1, 2}) * g.at({1, 2});
    Expr ginv[kDim][kDim];
    ginv[1][1] = g.at({2, 2}) / det;
    ginv[1][2] = Expr::constant(0) - g.at({1, 2}) / det;
    ginv[2][1] = ginv[1][2];
    ginv[2][2] = g.at({1, 1}) / det;

    BuiltConnection out;
    out.torsion = t;
    out.form = w;
    AffineConnection& conn = out.conn;

    // Fibre-direction derivatives of everything: Gamma^a_{b u} for spatial b.
    for (int a = 0; a < kDim; ++a)
        for (int i = 1; i < kDim; ++i) conn.gamma(a, i, 0) = t.at({a, 0, i});

    // Spatial block: metric compatibility with the prescribed torsion.
    const Expr half = Expr::constant(0.5);
    for (int l = 1; l < kDim; ++l)
        for (int i = 1; i < kDim; ++i)
            for (int k = 1; k < kDim; ++k) {
                Expr s = Expr::constant(0);
                for (int j = 1; j < kDim; ++j) {
                    Expr koszul = half * (dg.at({i, j, k}) + dg.at({j, k, i}) - dg.at({k, i, j}));
                    Expr tors = half * (tlow.at({k, i, j}) + tlow.at({j, i, k}) - tlow.at({i, j, k}));
                    s = s + ginv[l][j] * (koszul - tors);
                }
                conn.gamma(l, i, k) = s;
            }

    // Fibre component of the spatial block, fixed by the form gradient.
    for (int i = 1; i < kDim; ++i)
        for (int j = 1; j < kDim; ++j) {
            Expr sym = half * (dwv.at({i, j}) + dwv.at({j, i}));
            for (int k = 1; k < kDim; ++k)
                sym = sym - half * (conn.gamma(k, i, j) + conn.gamma(k, j, i)) * wv.at({k});
            Expr val = sym - half * t.at({0, i, j});
            if (kind == ConnectionKind::Pcs) val = val - g.at({i, j});
            conn.gamma(0, i, j) = val;
        }

    return out;
}

inline BuiltConnection build_scm_connection(const CarrollStructure& c, const EhresmannForm& w) {
    return build_connection(c, w, ConnectionKind::Scm);
}

inline BuiltConnection build_pcs_connection(const CarrollStructure& c, const EhresmannForm& w) {
    return build_connection(c, w, ConnectionKind::Pcs);
}

// ---------------------------------------------------------------------------
// Postconditions

// Numeric residuals of the properties the builders promise.  Gate on
// "metric-gradient", "fibre-gradient", "form-sym-gradient" and
// "torsion-match"; "form-full-gradient" is informational since the full
// (unsymmetrized) form gradient is obstructed whenever the form fails to be
// closed on the kernel.
inline ResidualMap connection_postconditions(const CarrollStructure& c, const EhresmannForm& w,
                                             const AffineConnection& conn, ConnectionKind kind,
                                             const std::vector<Point>& pts) {
    const TensorField g = c.metric();
    const TensorField dgc = covariant_derivative(g, conn);
    const TensorField dellc = covariant_derivative(c.fibre_vector(), conn);
    const TensorField dwc = covariant_derivative(w.covector(), conn);
    const TensorField t_conn = torsion_of(conn);
    const TensorField t_min = minimal_torsion(c, w);

    ResidualMap rm;
    auto& rg = rm["metric-gradient"];
    auto& rl = rm["fibre-gradient"];
    auto& rs = rm["form-sym-gradient"];
    auto& rf = rm["form-full-gradient"];
    auto& rt = rm["torsion-match"];

    for (const auto& p : pts) {
        std::span<const double> sp(p.data(), p.size());
        for (int a = 0; a < kDim; ++a)
            for (int b = 0; b < kDim; ++b) {
                for (int d = 0; d < kDim; ++d) {
                    const double gd = evaluate(dgc.at({a, b, d}), sp);
                    rg.add(gd, gd);
                    const double t1 = evaluate(t_conn.at({a, b, d}), sp);
                    const double t2 = evaluate(t_min.at({a, b, d}), sp);
                    rt.add(t1 - t2, std::max(std::abs(t1), std::abs(t2)));
                }
                const double lv = evaluate(dellc.at({a, b}), sp);
                rl.add(lv, lv);
                const double sym = 0.5 * (evaluate(dwc.at({a, b}), sp) + evaluate(dwc.at({b, a}), sp));
                const double full = evaluate(dwc.at({a, b}), sp);
                const double target = kind == ConnectionKind::Pcs ? evaluate(g.at({a, b}), sp) : 0.0;
                rs.add(sym - target, std::max(std::abs(sym), std::abs(target)));
                rf.add(full - target, std::max(std::abs(full), std::abs(target)));
            }
    }
    return rm;
}

}  // namespace carrollforge
