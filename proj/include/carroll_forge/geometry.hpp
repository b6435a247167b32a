#pragma once

// Charts, tensor fields and frames on a three-dimensional manifold with a
// distinguished fibre coordinate.  Everything is stored symbolically; numeric
// evaluation happens only at sample points handed in by the caller.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "carroll_forge/expr.hpp"
#include "carroll_forge/tolerance.hpp"

namespace carrollforge {

inline constexpr int kDim = 3;

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Chart

// An adapted chart: coordinate 0 runs along the fibre direction, coordinates
// 1 and 2 span the base.  Each coordinate carries a closed box domain used
// for sampling and for domain-aware checks.
struct Chart {
    std::array<std::string, kDim> coords{"u", "x", "y"};
    std::array<std::array<double, 2>, kDim> domain{{{-1, 1}, {-1, 1}, {-1, 1}}};

    const std::string& fibre_coordinate() const { return coords[0]; }

    double midpoint(int axis) const {
        return 0.5 * (domain[axis][0] + domain[axis][1]);
    }

    Expr parse(const std::string& text) const {
        return carrollforge::parse(text, std::span<const std::string>(coords.data(), coords.size()));
    }
};

using Point = std::array<double, kDim>;

// Stratified (Latin hypercube) sample of the chart's domain box.  Each axis
// is split into `n` equal strata; one jittered value is drawn per stratum and
// the strata are shuffled independently per axis.  Fully determined by seed.
inline std::vector<Point> sample_points(const Chart& chart, int n, std::uint64_t seed) {
    if (n <= 0) throw GeometryError("sample count must be positive");
    std::mt19937_64 rng(seed);
    auto unit = [&rng]() {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };
    std::array<std::vector<double>, kDim> axis;
    for (int k = 0; k < kDim; ++k) {
        const double lo = chart.domain[k][0], hi = chart.domain[k][1];
        axis[k].resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            axis[k][static_cast<std::size_t>(i)] = lo + (i + unit()) * (hi - lo) / n;
        for (int i = n - 1; i > 0; --i) {
            auto j = static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(i + 1));
            std::swap(axis[k][static_cast<std::size_t>(i)], axis[k][j]);
        }
    }
    std::vector<Point> pts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < kDim; ++k)
            pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = axis[k][static_cast<std::size_t>(i)];
    return pts;
}

// ---------------------------------------------------------------------------
// Tensor fields

enum class Basis { Coordinate, Frame };

inline const char* to_string(Basis b) {
    return b == Basis::Coordinate ? "coordinate" : "frame";
}

// Dense symbolic tensor field of type (rank_up, rank_down).  Component layout
// is row-major with all contravariant slots first, so a (1,2) tensor T^a_{bc}
// is stored at flat index (a*3 + b)*3 + c.
class TensorField {
public:
    TensorField(int rank_up, int rank_down, Basis basis)
        : up_(rank_up), down_(rank_down), basis_(basis) {
        if (rank_up < 0 || rank_down < 0 || rank_up + rank_down > 6)
            throw GeometryError("unsupported tensor rank");
        std::size_t size = 1;
        for (int i = 0; i < up_ + down_; ++i) size *= kDim;
        comp_.assign(size, Expr::constant(0));
    }

    int rank_up() const { return up_; }
    int rank_down() const { return down_; }
    int rank() const { return up_ + down_; }
    Basis basis() const { return basis_; }
    std::size_t size() const { return comp_.size(); }

    Expr& at(std::initializer_list<int> idx) { return comp_[flat(idx)]; }
    const Expr& at(std::initializer_list<int> idx) const { return comp_[flat(idx)]; }
    Expr& operator[](std::size_t i) { return comp_[i]; }
    const Expr& operator[](std::size_t i) const { return comp_[i]; }

    std::size_t flat(std::span<const int> idx) const {
        if (static_cast<int>(idx.size()) != rank())
            throw GeometryError("index count does not match tensor rank");
        std::size_t f = 0;
        for (int v : idx) {
            if (v < 0 || v >= kDim) throw GeometryError("tensor index out of range");
            f = f * kDim + static_cast<std::size_t>(v);
        }
        return f;
    }
    std::size_t flat(std::initializer_list<int> idx) const {
        return flat(std::span<const int>(idx.begin(), idx.size()));
    }

    // Decode a flat position back into per-slot indices.
    std::vector<int> unflat(std::size_t f) const {
        std::vector<int> idx(static_cast<std::size_t>(rank()), 0);
        for (int s = rank() - 1; s >= 0; --s) {
            idx[static_cast<std::size_t>(s)] = static_cast<int>(f % kDim);
            f /= kDim;
        }
        return idx;
    }

    std::vector<double> evaluate_at(const Point& p) const {
        std::vector<double> out(comp_.size());
        for (std::size_t i = 0; i < comp_.size(); ++i)
            out[i] = carrollforge::evaluate(comp_[i], std::span<const double>(p.data(), p.size()));
        return out;
    }

private:
    int up_, down_;
    Basis basis_;
    std::vector<Expr> comp_;
};

inline void require_same_shape(const TensorField& a, const TensorField& b, const char* what) {
    if (a.rank_up() != b.rank_up() || a.rank_down() != b.rank_down())
        throw GeometryError(std::string(what) + ": tensor shapes differ");
    if (a.basis() != b.basis())
        throw GeometryError(std::string(what) + ": tensors live in different bases");
}

inline TensorField add(const TensorField& a, const TensorField& b) {
    require_same_shape(a, b, "add");
    TensorField out(a.rank_up(), a.rank_down(), a.basis());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline TensorField subtract(const TensorField& a, const TensorField& b) {
    require_same_shape(a, b, "subtract");
    TensorField out(a.rank_up(), a.rank_down(), a.basis());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline TensorField scale(const TensorField& a, const Expr& s) {
    TensorField out(a.rank_up(), a.rank_down(), a.basis());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
    return out;
}

// Componentwise partial derivatives.  The derivative index becomes a new
// covariant slot appended after all existing slots, so for a (1,2) field T
// the result stores (dT)^a_{bc,d} at index {a,b,c,d}.  Only meaningful for
// coordinate-basis fields; frame components need the full frame data.
inline TensorField partial_derivative(const TensorField& t) {
    if (t.basis() != Basis::Coordinate)
        throw GeometryError("partial_derivative expects a coordinate-basis tensor");
    TensorField out(t.rank_up(), t.rank_down() + 1, Basis::Coordinate);
    for (std::size_t i = 0; i < t.size(); ++i)
        for (int d = 0; d < kDim; ++d)
            out[i * kDim + static_cast<std::size_t>(d)] = differentiate(t[i], d);
    return out;
}

// Contract one contravariant slot against one covariant slot (slot numbers
// count within their own kind, starting at 0).
inline TensorField contract(const TensorField& t, int up_slot, int down_slot) {
    if (up_slot < 0 || up_slot >= t.rank_up() || down_slot < 0 || down_slot >= t.rank_down())
        throw GeometryError("contract: slot out of range");
    TensorField out(t.rank_up() - 1, t.rank_down() - 1, t.basis());
    const int slot_a = up_slot;
    const int slot_b = t.rank_up() + down_slot;
    std::vector<int> src(static_cast<std::size_t>(t.rank()), 0);
    for (std::size_t o = 0; o < out.size(); ++o) {
        std::vector<int> oidx = out.unflat(o);
        Expr sum = Expr::constant(0);
        for (int m = 0; m < kDim; ++m) {
            int pos = 0;
            for (int s = 0; s < t.rank(); ++s) {
                if (s == slot_a || s == slot_b)
                    src[static_cast<std::size_t>(s)] = m;
                else
                    src[static_cast<std::size_t>(s)] = oidx[static_cast<std::size_t>(pos++)];
            }
            sum = sum + t[t.flat(src)];
        }
        out[o] = sum;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Frames

// An anholonomic frame e_A with dual coframe theta^A, both expressed in
// coordinate components: e[A][a] are the components of the vector e_A, and
// theta[A][a] the components of the one-form theta^A.  The structure
// functions satisfy [e_A, e_B] = c[C][A][B] e_C.
struct Frame {
    std::array<std::array<Expr, kDim>, kDim> e;
    std::array<std::array<Expr, kDim>, kDim> theta;
    std::array<std::array<std::array<Expr, kDim>, kDim>, kDim> c;
};

namespace detail {
inline std::array<std::array<std::array<Expr, kDim>, kDim>, kDim>
structure_functions(const std::array<std::array<Expr, kDim>, kDim>& e,
                    const std::array<std::array<Expr, kDim>, kDim>& theta) {
    std::array<std::array<std::array<Expr, kDim>, kDim>, kDim> c;
    for (int A = 0; A < kDim; ++A)
        for (int B = 0; B < kDim; ++B) {
            // bracket[a] = e_A(e_B^a) - e_B(e_A^a)
            std::array<Expr, kDim> bracket;
            for (int a = 0; a < kDim; ++a) {
                Expr s = Expr::constant(0);
                for (int b = 0; b < kDim; ++b) {
                    s = s + e[static_cast<std::size_t>(A)][static_cast<std::size_t>(b)] *
                                differentiate(e[static_cast<std::size_t>(B)][static_cast<std::size_t>(a)], b) -
                            e[static_cast<std::size_t>(B)][static_cast<std::size_t>(b)] *
                                differentiate(e[static_cast<std::size_t>(A)][static_cast<std::size_t>(a)], b);
                }
                bracket[static_cast<std::size_t>(a)] = s;
            }
            for (int C = 0; C < kDim; ++C) {
                Expr s = Expr::constant(0);
                for (int a = 0; a < kDim; ++a)
                    s = s + theta[static_cast<std::size_t>(C)][static_cast<std::size_t>(a)] * bracket[static_cast<std::size_t>(a)];
                c[static_cast<std::size_t>(C)][static_cast<std::size_t>(A)][static_cast<std::size_t>(B)] = s;
            }
        }
    return c;
}
}  // namespace detail

// Build the adapted frame from an upper-triangular spatial coframe
//   m^1 = m11 dx,  m^2 = m21 dx + m22 dy
// and a unit-fibre one-form  w = du + w1 dx + w2 dy.  The coframe matrix in
// the slot ordering (w, m^1, m^2) is triangular up to the w row, so the dual
// frame has the closed form implemented below.  Throws if the coframe is not
// invertible as a symbolic expression (either m11 or m22 identically zero).
inline Frame build_frame(const Expr& m11, const Expr& m21, const Expr& m22,
                         const Expr& w1, const Expr& w2) {
    auto identically_zero = [](const Expr& e) {
        return e.is_constant() && e.constant_value() == 0.0;
    };
    if (identically_zero(m11) || identically_zero(m22))
        throw GeometryError("degenerate spatial coframe: a diagonal entry is identically zero");

    Frame f;
    const Expr zero = Expr::constant(0);
    const Expr one = Expr::constant(1);

    f.theta[0] = {one, w1, w2};
    f.theta[1] = {zero, m11, zero};
    f.theta[2] = {zero, m21, m22};

    f.e[0] = {one, zero, zero};
    f.e[1] = {(w2 * m21 - w1 * m22) / (m11 * m22), one / m11, zero - m21 / (m11 * m22)};
    f.e[2] = {zero - w2 / m22, zero, one / m22};

    f.c = detail::structure_functions(f.e, f.theta);
    return f;
}

// Numeric duality check: max over the grid of |theta^A(e_B) - delta^A_B|.
inline double duality_defect(const Frame& f, const std::vector<Point>& pts) {
    double worst = 0;
    for (const auto& p : pts) {
        for (int A = 0; A < kDim; ++A)
            for (int B = 0; B < kDim; ++B) {
                double s = 0;
                for (int a = 0; a < kDim; ++a)
                    s += evaluate(f.theta[static_cast<std::size_t>(A)][static_cast<std::size_t>(a)], std::span<const double>(p.data(), p.size())) *
                         evaluate(f.e[static_cast<std::size_t>(B)][static_cast<std::size_t>(a)], std::span<const double>(p.data(), p.size()));
                worst = std::max(worst, std::abs(s - (A == B ? 1.0 : 0.0)));
            }
    }
    return worst;
}

// Lie derivative along the fibre vector field (the first coordinate vector of
// the adapted chart).  For purely covariant tensors this is the componentwise
// fibre-coordinate derivative; contravariant slots would pick up extra terms
// and are rejected.
inline TensorField lie_derivative_along_fibre(const TensorField& t) {
    if (t.basis() != Basis::Coordinate)
        throw GeometryError("lie_derivative_along_fibre expects a coordinate-basis tensor");
    if (t.rank_up() != 0)
        throw GeometryError("lie_derivative_along_fibre supports covariant tensors only");
    TensorField out(0, t.rank_down(), Basis::Coordinate);
    for (std::size_t i = 0; i < t.size(); ++i)
        out[i] = differentiate(t[i], 0);
    return out;
}

// Re-express a tensor field in the other basis.  Contravariant slots contract
// with theta (to frame) or e (to coordinates); covariant slots the reverse.
inline TensorField change_basis(const TensorField& t, const Frame& f, Basis target) {
    if (t.basis() == target) return t;
    // to frame:    T^A..._B... = theta^A_a ... e_B^b ... T^a..._b...
    // to coords:   T^a..._b... = e_A^a ... theta^B_b ... T^A..._B...
    const bool to_frame = (target == Basis::Frame);
    TensorField out(t.rank_up(), t.rank_down(), target);
    std::vector<int> src(static_cast<std::size_t>(t.rank()), 0);
    for (std::size_t o = 0; o < out.size(); ++o) {
        std::vector<int> oidx = out.unflat(o);
        Expr sum = Expr::constant(0);
        // Iterate over all source index combinations; zero factors fold away.
        std::size_t total = t.size() ? 1 : 0;
        for (int s = 0; s < t.rank(); ++s) total *= kDim;
        for (std::size_t flat_src = 0; flat_src < total; ++flat_src) {
            std::size_t rem = flat_src;
            for (int s = t.rank() - 1; s >= 0; --s) {
                src[static_cast<std::size_t>(s)] = static_cast<int>(rem % kDim);
                rem /= kDim;
            }
            Expr term = t[t.flat(src)];
            if (term.is_constant() && term.constant_value() == 0.0) continue;
            for (int s = 0; s < t.rank() && !(term.is_constant() && term.constant_value() == 0.0); ++s) {
                const auto out_i = static_cast<std::size_t>(oidx[static_cast<std::size_t>(s)]);
                const auto src_i = static_cast<std::size_t>(src[static_cast<std::size_t>(s)]);
                const bool contravariant = s < t.rank_up();
                // Toward the frame, the frame label is the free (output) index
                // of theta^A_a / e_B^b; toward coordinates it is summed over.
                const auto& matrix = (contravariant == to_frame) ? f.theta : f.e;
                const Expr& factor = to_frame ? matrix[out_i][src_i] : matrix[src_i][out_i];
                term = factor * term;
            }
            sum = sum + term;
        }
        out[o] = sum;
    }
    return out;
}

}  // namespace carrollforge
