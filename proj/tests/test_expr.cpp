#include <catch2/catch_amalgamated.hpp>

#include <carroll_forge/expr.hpp>

#include <cmath>
#include <random>
#include <vector>

using namespace carrollforge;

namespace {

const std::vector<std::string> kCoords{"u", "x", "y"};

Expr P(const std::string& s) { return parse(s, kCoords); }

double ev(const Expr& e, double u, double x, double y) {
    const double pt[3] = {u, x, y};
    return evaluate(e, std::span<const double>(pt, 3));
}

// Deterministic uniform double in [lo, hi) from raw engine bits.  The
// standard distributions are not bit-stable across library versions, the
// engine itself is.
double uniform(std::mt19937_64& rng, double lo, double hi) {
    double t = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + t * (hi - lo);
}

}  // namespace

TEST_CASE("parser handles grammar and precedence") {
    CHECK(ev(P("x^2 + -y/2"), 0, 3, 4) == Catch::Approx(7.0).margin(1e-15));
    CHECK(ev(P("2*x + 3*y"), 0, 1, 2) == Catch::Approx(8.0));
    CHECK(ev(P("2 - 3 - 4"), 0, 0, 0) == Catch::Approx(-5.0));   // left associative
    CHECK(ev(P("12/3/2"), 0, 0, 0) == Catch::Approx(2.0));
    CHECK(ev(P("-x^2"), 0, 2, 0) == Catch::Approx(-4.0));        // unary minus above power
    CHECK(ev(P("(-x)^2"), 0, 2, 0) == Catch::Approx(4.0));
    CHECK(ev(P("sin(pi/2)"), 0, 0, 0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(ev(P("x^(-2)"), 0, 2, 0) == Catch::Approx(0.25));
    CHECK(ev(P("1.5e2"), 0, 0, 0) == Catch::Approx(150.0));
    CHECK(ev(P("exp(log(x))"), 0, 2.5, 0) == Catch::Approx(2.5));
}

TEST_CASE("parser reports errors with byte offsets") {
    CHECK_THROWS_AS(P("x +"), ParseError);
    CHECK_THROWS_AS(P("q + 1"), ParseError);        // unknown identifier
    CHECK_THROWS_AS(P("foo(x)"), ParseError);       // unknown function
    CHECK_THROWS_AS(P("x^y"), ParseError);          // non-constant exponent
    CHECK_THROWS_AS(P("x^2^3"), ParseError);        // power is non-associative
    CHECK_THROWS_AS(P("(x"), ParseError);
    CHECK_THROWS_AS(P("x 2"), ParseError);          // trailing input

    try {
        P("x + q");
    } catch (const ParseError& e) {
        CHECK(e.offset == 4);
    }
}

TEST_CASE("evaluation reports domain errors with the offending subexpression") {
    CHECK_THROWS_AS(ev(P("log(x)"), 0, -1, 0), EvalError);
    CHECK_THROWS_AS(ev(P("1/(x - 2)"), 0, 2, 0), EvalError);
    CHECK_THROWS_AS(ev(P("sqrt(x)"), 0, -4, 0), EvalError);
    try {
        ev(P("y + 1/(x - 2)"), 0, 2, 0);
        FAIL("expected EvalError");
    } catch (const EvalError& e) {
        CHECK(e.subexpr.find("x - 2") != std::string::npos);
    }
}

TEST_CASE("symbolic derivatives match hand values") {
    // d/dx (x^2 * y) at (2, 5) -> 2*2*5 = 20
    Expr e = P("x^2*y");
    CHECK(ev(differentiate(e, 1), 0, 2, 5) == Catch::Approx(20.0));
    // d/dy -> x^2 = 4
    CHECK(ev(differentiate(e, 2), 0, 2, 5) == Catch::Approx(4.0));
    // d/du sin(u)*exp(u) = cos(u)exp(u) + sin(u)exp(u)
    Expr f = P("sin(u)*exp(u)");
    double u = 0.7;
    CHECK(ev(differentiate(f, 0), u, 0, 0) ==
          Catch::Approx(std::cos(u) * std::exp(u) + std::sin(u) * std::exp(u)).epsilon(1e-14));
    // quotient rule: d/dx (x / (1 + x^2)) = (1 - x^2)/(1+x^2)^2
    Expr q = P("x/(1 + x^2)");
    double x = 1.3;
    double expect = (1 - x * x) / ((1 + x * x) * (1 + x * x));
    CHECK(ev(differentiate(q, 1), 0, x, 0) == Catch::Approx(expect).epsilon(1e-14));
    // constant exponent, negative: d/dx x^(-2) = -2 x^(-3)
    CHECK(ev(differentiate(P("x^(-2)"), 1), 0, 2.0, 0) == Catch::Approx(-2.0 / 8.0));
    // real exponent: d/dx x^2.5 = 2.5 x^1.5
    CHECK(ev(differentiate(P("x^2.5"), 1), 0, 4.0, 0) == Catch::Approx(2.5 * 8.0));
}

TEST_CASE("differentiation is linear") {
    std::mt19937_64 rng(12345);
    Expr e1 = P("sin(x)*y + u^2");
    Expr e2 = P("exp(x/2) - u*y");
    for (int k = 0; k < 32; ++k) {
        double a = uniform(rng, -2, 2);
        Expr lhs = differentiate(Expr::constant(a) * e1 + e2, 1);
        Expr rhs = Expr::constant(a) * differentiate(e1, 1) + differentiate(e2, 1);
        double u = uniform(rng, -1, 1), x = uniform(rng, -1, 1), y = uniform(rng, -1, 1);
        CHECK(std::abs(ev(lhs, u, x, y) - ev(rhs, u, x, y)) < 1e-12);
    }
}

TEST_CASE("print then parse evaluates identically") {
    std::mt19937_64 rng(987654);
    const char* samples[] = {
        "x^2 + -y/2",
        "sin(u)*cos(x) - tan(y/4)",
        "exp(-u^2/2)/sqrt(2*pi)",
        "(x + y)^3/(1 + u^2)",
        "-x - -y",
        "log(2 + sin(x))*u",
        "1/(m + 0.5)",  // placeholder replaced below
    };
    for (const char* s : samples) {
        std::string text = s;
        if (text.find('m') != std::string::npos) text = "1/(x + 0.5)";
        Expr e = parse(text, kCoords);
        Expr r = parse(print(e), kCoords);
        for (int k = 0; k < 64; ++k) {
            double u = uniform(rng, 0.1, 0.9), x = uniform(rng, 0.1, 0.9), y = uniform(rng, 0.1, 0.9);
            CHECK(ev(e, u, x, y) == ev(r, u, x, y));
        }
    }
    // derivatives too (their trees were built by the factories, not the parser)
    Expr d = differentiate(parse("exp(x*y)*sin(u)/(1 + x^2)", kCoords), 1);
    Expr rd = parse(print(d), kCoords);
    for (int k = 0; k < 64; ++k) {
        double u = uniform(rng, 0.1, 0.9), x = uniform(rng, 0.1, 0.9), y = uniform(rng, 0.1, 0.9);
        CHECK(ev(d, u, x, y) == ev(rd, u, x, y));
    }
}

TEST_CASE("substitution composes trees") {
    Expr e = P("u^2 + x");
    Expr r = substitute(e, 0, P("y + 1"));
    CHECK(ev(r, 99, 2, 3) == Catch::Approx(18.0));  // (3+1)^2 + 2
    // substituting an absent coordinate returns the identical handle
    Expr f = P("x*y");
    CHECK(substitute(f, 0, Expr::constant(7)).same_node(f));
    CHECK_FALSE(depends_on(f, 0));
    CHECK(depends_on(f, 1));
}

namespace {

// Random expression generator for the derivative-vs-finite-difference
// property.  Depth-bounded, same op inventory as the parser.
Expr random_expr(std::mt19937_64& rng, int depth) {
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
    if (depth == 0 || pick(4) == 0) {
        switch (pick(4)) {
            case 0: return Expr::constant(uniform(rng, 0.5, 2.5));
            case 1: return Expr::variable(0, "u");
            case 2: return Expr::variable(1, "x");
            default: return Expr::variable(2, "y");
        }
    }
    switch (pick(10)) {
        case 0: return random_expr(rng, depth - 1) + random_expr(rng, depth - 1);
        case 1: return random_expr(rng, depth - 1) - random_expr(rng, depth - 1);
        case 2: return random_expr(rng, depth - 1) * random_expr(rng, depth - 1);
        case 3: return random_expr(rng, depth - 1) / random_expr(rng, depth - 1);
        case 4: return sin(random_expr(rng, depth - 1));
        case 5: return cos(random_expr(rng, depth - 1));
        case 6: return exp(random_expr(rng, depth - 1));
        case 7: return log(random_expr(rng, depth - 1));
        case 8: return sqrt(random_expr(rng, depth - 1));
        default: return pow(random_expr(rng, depth - 1), static_cast<double>(1 + pick(3)));
    }
}

bool sane(double v) { return std::isfinite(v) && std::abs(v) < 1e6; }

}  // namespace

TEST_CASE("symbolic derivatives agree with central finite differences") {
    std::mt19937_64 rng(20240901);
    const double h = 1e-6;
    int accepted = 0;
    while (accepted < 200) {
        Expr e = random_expr(rng, 5);
        double pt[3] = {uniform(rng, 0.3, 1.7), uniform(rng, 0.3, 1.7), uniform(rng, 0.3, 1.7)};
        int var = static_cast<int>(rng() % 3);
        double base, plus, minus, sym;
        try {
            base = evaluate(e, std::span<const double>(pt, 3));
            sym = evaluate(differentiate(e, var), std::span<const double>(pt, 3));
            double save = pt[var];
            pt[var] = save + h;
            plus = evaluate(e, std::span<const double>(pt, 3));
            pt[var] = save - h;
            minus = evaluate(e, std::span<const double>(pt, 3));
            pt[var] = save;
        } catch (const EvalError&) {
            continue;  // singular sample, draw again
        }
        if (!sane(base) || !sane(plus) || !sane(minus) || !sane(sym)) continue;
        double fd = (plus - minus) / (2 * h);
        if (!sane(fd)) continue;
        double rel = std::abs(sym - fd) / std::max(1.0, std::abs(sym));
        INFO("expr: " << print(e) << "  var " << var);
        CHECK(rel < 1e-5);
        ++accepted;
    }
    CHECK(accepted == 200);
}
