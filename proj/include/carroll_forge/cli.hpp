// Command dispatch for the carroll-forge tool.  Every subcommand loads one
// run-description file, samples the domain deterministically, runs the
// requested library operation, and emits a report (JSON with --json, human
// summary otherwise).  Exit codes: 0 pass, 1 fail verdict, 2 error.

#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "carroll_forge/classify.hpp"
#include "carroll_forge/report.hpp"
#include "carroll_forge/specfile.hpp"

namespace carrollforge {

namespace clidetail {

struct Options {
    std::vector<std::string> words;  // subcommand words, then the spec path
    std::optional<int> samples;
    std::optional<double> tol;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> theta;
    std::optional<std::string> xi;
    std::optional<std::string> out_path;
    bool json = false;
    bool boost = false;
};

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline Options parse_options(const std::vector<std::string>& args) {
    Options opt;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        auto value = [&](const char* flag) -> const std::string& {
            if (i + 1 >= args.size()) throw UsageError(std::string(flag) + " needs a value");
            return args[++i];
        };
        if (a == "--json")
            opt.json = true;
        else if (a == "--boost")
            opt.boost = true;
        else if (a == "--samples")
            opt.samples = std::stoi(value("--samples"));
        else if (a == "--tol")
            opt.tol = std::stod(value("--tol"));
        else if (a == "--seed")
            opt.seed = std::stoull(value("--seed"));
        else if (a == "--theta")
            opt.theta = value("--theta");
        else if (a == "--xi")
            opt.xi = value("--xi");
        else if (a == "--out")
            opt.out_path = value("--out");
        else if (!a.empty() && a[0] == '-')
            throw UsageError("unknown flag '" + a + "'");
        else
            opt.words.push_back(a);
    }
    return opt;
}

// Split a covector flag value on commas outside parentheses, e.g.
// "cos(x),0" into its two component expressions.
inline SurfaceCovector parse_covector_flag(const Chart& chart, const std::string& text,
                                           const char* flag) {
    std::vector<std::string> parts(1);
    int depth = 0;
    for (char ch : text) {
        if (ch == '(' || ch == '[') ++depth;
        if (ch == ')' || ch == ']') --depth;
        if (ch == ',' && depth == 0) {
            parts.emplace_back();
            continue;
        }
        parts.back().push_back(ch);
    }
    if (parts.size() != 2)
        throw UsageError(std::string(flag) + " needs two comma-separated expressions");
    return {chart.parse(parts[0]), chart.parse(parts[1])};
}

inline std::string print_covector(const Expr& a, const Expr& b, const Expr& c) {
    return "(" + print(a) + ", " + print(b) + ", " + print(c) + ")";
}

// Built expressions can be large unsimplified trees; when one is constant
// over the sample grid, report the constant instead.
inline std::string print_sampled(const Expr& e, const std::vector<Point>& pts) {
    double lo = 0, hi = 0;
    bool first = true;
    for (const auto& p : pts) {
        const double v = evaluate(e, std::span<const double>(p.data(), p.size()));
        lo = first ? v : std::min(lo, v);
        hi = first ? v : std::max(hi, v);
        first = false;
    }
    if (!first && hi - lo < 1e-12 * (1 + std::max(std::abs(lo), std::abs(hi)))) {
        const double mid = 0.5 * (lo + hi);
        return detail::format_double(snap(mid == 0 ? 0.0 : mid));
    }
    return print(e);
}

inline std::string print_sampled_covector(const Expr& a, const Expr& b, const Expr& c,
                                          const std::vector<Point>& pts) {
    return "(" + print_sampled(a, pts) + ", " + print_sampled(b, pts) + ", " +
           print_sampled(c, pts) + ")";
}

// The builder postconditions gate on four of the five reported statistics;
// the full form gradient is informational.
inline bool postconditions_pass(const ResidualMap& rm, double tolerance) {
    for (const char* key :
         {"metric-gradient", "fibre-gradient", "form-sym-gradient", "torsion-match"})
        if (!rm.at(key).passes(tolerance)) return false;
    return true;
}

inline const char* usage_text() {
    return "usage: carroll-forge <command> <spec-file> [flags]\n"
           "commands:\n"
           "  validate FILE              structure and form sanity checks\n"
           "  frame FILE                 adapted frame and duality residual\n"
           "  torsion FILE               minimal torsion, trace, and gamma\n"
           "  boost FILE                 fibre-independent replacement form\n"
           "  build scm|pcs FILE         connection coefficients and residuals\n"
           "  classify scm|pcs FILE      branch verdict for a connection\n"
           "  lemma26 FILE               trace dichotomy for a target tensor\n"
           "  killing FILE               vorticity-free Killing verdict\n"
           "  surface flat|curved|homothety FILE\n"
           "                             two-dimensional slice checks\n"
           "flags: --samples N  --tol T  --seed S  --json  --out PATH\n"
           "       --theta \"a\",\"b\"  --xi \"a\",\"b\"  --boost\n";
}

}  // namespace clidetail

inline int run_command(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err) {
    using clidetail::Options;
    using clidetail::UsageError;

    Options opt;
    try {
        opt = clidetail::parse_options(args);
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n" << clidetail::usage_text();
        return 2;
    }
    if (opt.words.empty() || opt.words[0] == "help" || opt.words[0] == "--help") {
        out << clidetail::usage_text();
        return opt.words.empty() ? 2 : 0;
    }

    // Commands are one or two words followed by the spec path.
    const std::string& head = opt.words[0];
    const bool two_word = head == "build" || head == "classify" || head == "surface";
    const std::size_t expected = two_word ? 3u : 2u;

    Report rep;
    try {
        if (opt.words.size() != expected)
            throw UsageError("expected " + std::string(two_word ? "a mode and " : "") +
                             "one spec file after '" + head + "'");
        rep.command = two_word ? head + " " + opt.words[1] : head;
        rep.spec = opt.words.back();

        SpecFile spec = read_spec_file(rep.spec);
        if (opt.samples) spec.samples = *opt.samples;
        if (opt.tol) spec.tol = *opt.tol;
        if (opt.seed) spec.seed = *opt.seed;
        if (spec.samples < 1) throw UsageError("--samples must be positive");
        if (spec.tol <= 0) throw UsageError("--tol must be positive");
        rep.samples = spec.samples;
        rep.seed = spec.seed;
        rep.tol = spec.tol;

        CarrollStructure& c = spec.structure;
        EhresmannForm form = spec.form;
        const std::vector<Point> pts = sample_points(c.chart, spec.samples, spec.seed);

        if (opt.boost) {
            BoostResult b = boost_to_principal(c, form);
            form = b.form;
            rep.notes.push_back("form boosted at " + c.chart.coords[0] + " = " +
                                detail::format_double(b.u0));
        }

        auto embedding = [&]() {
            SurfaceEmbedding e;
            e.level = c.chart.midpoint(0);
            if (spec.surface) e = spec.surface->embedding;
            return e;
        };
        auto pulled_alpha = [&](const SurfaceEmbedding& e) {
            if (spec.surface && spec.surface->alpha_pullback) return *spec.surface->alpha_pullback;
            return pullback_form(form, e);
        };

        if (head == "validate") {
            ValidationReport vs = validate_structure(c, pts);
            ValidationReport vf = validate_form(form, pts);
            for (const std::string& s : vs.issues) rep.notes.push_back(s);
            for (const std::string& s : vf.issues) rep.notes.push_back(s);
            rep.verdict = vs.ok() && vf.ok();
        } else if (head == "frame") {
            Frame f = c.frame(form);
            auto& stat = rep.residuals["frame-duality"];
            stat.add(duality_defect(f, pts), 0.0);
            for (int A = 0; A < kDim; ++A) {
                rep.outputs.emplace_back(
                    "e" + std::to_string(A + 1),
                    clidetail::print_covector(f.e[A][0], f.e[A][1], f.e[A][2]));
            }
            for (int A = 0; A < kDim; ++A)
                rep.outputs.emplace_back(
                    "theta" + std::to_string(A + 1),
                    clidetail::print_covector(f.theta[A][0], f.theta[A][1], f.theta[A][2]));
            rep.verdict = stat.passes(spec.tol);
        } else if (head == "torsion") {
            TensorField t = minimal_torsion(c, form);
            rep.residuals = minimality_residuals(c, form, t, pts);
            TraceResult tr = torsion_trace(c, form, t, pts);
            rep.outputs.emplace_back("V", clidetail::print_sampled_covector(
                                                tr.V.at({0}), tr.V.at({1}), tr.V.at({2}), pts));
            rep.outputs.emplace_back("V(l)", clidetail::print_sampled(tr.V_on_fibre, pts));
            if (tr.gamma)
                rep.outputs.emplace_back(
                    "gamma", clidetail::print_sampled_covector(tr.gamma->at({0}),
                                                               tr.gamma->at({1}),
                                                               tr.gamma->at({2}), pts));
            rep.notes.push_back(std::string("fibre trace class: ") +
                                to_string(tr.v_on_fibre_class));
            rep.notes.push_back(std::string("trace covector class: ") + to_string(tr.v_class));
            rep.verdict = all_pass(rep.residuals, spec.tol);
        } else if (head == "boost") {
            BoostResult b = boost_to_principal(c, form);
            auto& stat = rep.residuals["principal-invariance"];
            for (const auto& p : pts) {
                std::span<const double> sp(p.data(), p.size());
                stat.add(evaluate(differentiate(b.form.w1, 0), sp), 0.0);
                stat.add(evaluate(differentiate(b.form.w2, 0), sp), 0.0);
            }
            rep.outputs.emplace_back("nu", clidetail::print_covector(Expr::constant(1),
                                                                     b.form.w1, b.form.w2));
            rep.outputs.emplace_back("u0", detail::format_double(b.u0));
            rep.verdict = stat.passes(tol::kBoostLie);
        } else if (head == "build") {
            const std::string& mode = opt.words[1];
            if (mode != "scm" && mode != "pcs") throw UsageError("build mode must be scm or pcs");
            const ConnectionKind kind =
                mode == "scm" ? ConnectionKind::Scm : ConnectionKind::Pcs;
            BuiltConnection built = build_connection(c, form, kind);
            rep.residuals = connection_postconditions(c, form, built.conn, kind, pts);
            for (int a = 0; a < kDim; ++a)
                for (int b = 0; b < kDim; ++b)
                    for (int d = 0; d < kDim; ++d)
                        rep.outputs.emplace_back("Gamma." + std::to_string(a) + "." +
                                                     std::to_string(b) + "." + std::to_string(d),
                                                 print(built.conn.gamma(a, b, d)));
            rep.verdict = clidetail::postconditions_pass(rep.residuals, spec.tol);
        } else if (head == "classify") {
            const std::string& mode = opt.words[1];
            if (mode != "scm" && mode != "pcs")
                throw UsageError("classify mode must be scm or pcs");
            const ConnectionKind kind =
                mode == "scm" ? ConnectionKind::Scm : ConnectionKind::Pcs;
            AffineConnection conn;
            if (spec.connection) {
                conn = *spec.connection;
                rep.notes.push_back("connection taken from the spec file");
            } else {
                conn = build_connection(c, form, kind).conn;
                rep.notes.push_back("connection built from the structure and form");
            }
            Verdict v = kind == ConnectionKind::Scm ? classify_scm(c, form, conn, pts, spec.tol)
                                                    : classify_pcs(c, form, conn, pts, spec.tol);
            rep.verdict = v.ok;
            rep.branch = v.branch;
            rep.residuals = v.residuals;
            rep.factors = v.factor_samples;
            for (const std::string& n : v.notes) rep.notes.push_back(n);
            if (v.branch == "trace-nonzero") {
                TraceResult tr = torsion_trace(c, form, minimal_torsion(c, form), pts);
                if (tr.gamma)
                    rep.outputs.emplace_back(
                        "gamma", clidetail::print_sampled_covector(tr.gamma->at({0}),
                                                                   tr.gamma->at({1}),
                                                                   tr.gamma->at({2}), pts));
            }
        } else if (head == "lemma26") {
            AffineConnection conn;
            if (spec.connection) {
                conn = *spec.connection;
                rep.notes.push_back("connection taken from the spec file");
            } else {
                conn = build_scm_connection(c, form).conn;
                rep.notes.push_back("connection built from the structure and form");
            }
            TensorField n(0, 2, Basis::Coordinate);
            if (spec.n_target) {
                n = *spec.n_target;
                rep.notes.push_back("target tensor taken from the spec file");
            } else {
                TensorField dw = covariant_derivative(form.covector(), conn);
                for (int a = 0; a < kDim; ++a)
                    for (int b = 0; b < kDim; ++b)
                        n.at({a, b}) =
                            Expr::constant(0.5) * (dw.at({a, b}) + dw.at({b, a}));
                rep.notes.push_back("target tensor is the symmetrized form gradient");
            }
            Verdict v = check_lemma_26(c, form, conn, n, pts, spec.tol);
            rep.verdict = v.ok;
            rep.branch = v.branch;
            rep.residuals = v.residuals;
            for (const std::string& s : v.notes) rep.notes.push_back(s);
        } else if (head == "killing") {
            SurfaceTensor met;
            if (spec.surface) {
                met = induced_metric(c, spec.surface->embedding, pts).metric;
                rep.notes.push_back("slice metric induced by the surface block");
            } else {
                met = spatial_slice_metric(c, c.chart.midpoint(0));
                rep.notes.push_back("slice metric taken at the fibre-domain midpoint");
            }
            SurfaceCovector xi{Expr::constant(0), Expr::constant(0)};
            if (opt.xi)
                xi = clidetail::parse_covector_flag(c.chart, *opt.xi, "--xi");
            else if (spec.surface && spec.surface->xi)
                xi = *spec.surface->xi;
            else
                throw UsageError("killing needs a candidate field: --xi or a surface xi entry");
            Verdict v = verify_vorticity_free_killing(met, xi, pts, spec.tol);
            rep.verdict = v.ok;
            rep.residuals = v.residuals;
        } else if (head == "surface") {
            const std::string& mode = opt.words[1];
            SurfaceEmbedding emb = embedding();
            InducedGeometry geo = induced_metric(c, emb, pts);
            Verdict v;
            if (mode == "flat") {
                v = check_flat_case(geo, pulled_alpha(emb), pts, spec.tol);
            } else if (mode == "curved") {
                SurfaceTensor b = b_tensor(geo, pulled_alpha(emb));
                v = check_curved_case(geo, b, pts, spec.tol);
            } else if (mode == "homothety") {
                SurfaceCovector theta{Expr::constant(0), Expr::constant(0)};
                if (opt.theta)
                    theta = clidetail::parse_covector_flag(c.chart, *opt.theta, "--theta");
                else if (spec.surface && spec.surface->theta)
                    theta = *spec.surface->theta;
                else
                    throw UsageError(
                        "homothety needs a candidate field: --theta or a surface theta entry");
                v = verify_homothety(geo, theta, pts, spec.tol);
            } else {
                throw UsageError("surface mode must be flat, curved, or homothety");
            }
            rep.verdict = v.ok;
            rep.branch = v.branch;
            rep.residuals = v.residuals;
            rep.factors = v.factor_samples;
            for (const std::string& s : v.notes) rep.notes.push_back(s);
        } else {
            throw UsageError("unknown command '" + head + "'");
        }
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << "\n" << clidetail::usage_text();
        return 2;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return 2;
    }

    if (opt.out_path) {
        std::ofstream f(*opt.out_path);
        if (!f) {
            err << "error: cannot write " << *opt.out_path << "\n";
            return 2;
        }
        f << rep.to_json().dump(2) << "\n";
    }
    if (opt.json)
        out << rep.to_json().dump(2) << "\n";
    else
        out << rep.to_text();
    return rep.verdict.value_or(true) ? 0 : 1;
}

}  // namespace carrollforge
