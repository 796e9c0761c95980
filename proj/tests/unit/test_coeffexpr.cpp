#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "expr_fixtures.hpp"
#include "pergo/coeffexpr.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace pergo::coeffexpr;

namespace {

double
ev(const std::string& text, Environment env = {}, std::size_t d = 1, std::vector<std::string> params = {})
{
  return eval(parse(text, d, params), env);
}

bool
same(double a, double b)
{
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

} // namespace

TEST_CASE("precedence and associativity")
{
  CHECK(ev("2+3*4") == 14.0);
  CHECK(ev("2^3^2") == 512.0);
  CHECK(ev("-2^2") == -4.0);
  CHECK(ev("(2+3)*4") == 20.0);
  CHECK(ev("8/4/2") == 1.0);
  CHECK(ev("10-4-3") == 3.0);
  CHECK(ev("2*-3") == -6.0);
}

TEST_CASE("evaluation examples")
{
  CHECK(ev("x1^2 - x1 - 1", { { "x1", 2.0 } }) == 1.0);
  CHECK(std::fabs(ev("sin(2*pi*t/T)", { { "t", 0.25 }, { "T", 1.0 } }, 1, { "T" }) - 1.0) <= 1e-15);
  CHECK(ev("exp(0)") == 1.0);
  const double v = ev("2*x1*( S - x1 ) + 1", { { "x1", 1.618034 }, { "S", 1.0 } }, 1, { "S" });
  CHECK(v == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(ev("min(3, x1) + max(-1, 2)", { { "x1", 1.0 } }) == 3.0);
  CHECK(ev("abs(-2.5) + sqrt(4) + tanh(0) + cos(0) + log(e)") == doctest::Approx(6.5));
}

TEST_CASE("slot evaluation matches environment evaluation")
{
  const Expr e = parse("a*x1 + x2*t", 2, { "a" });
  const std::vector<double> slots{ 0.5, 2.0, 3.0, 4.0 };
  CHECK(e.eval(slots) == doctest::Approx(4.0 * 2.0 + 3.0 * 0.5));
  CHECK(e.eval(slots) == e.eval(Environment{ { "t", 0.5 }, { "x1", 2.0 }, { "x2", 3.0 }, { "a", 4.0 } }));
  CHECK(e.uses_time());
  CHECK(e.uses_state());
  CHECK_FALSE(parse("a + 1", 1, { "a" }).uses_state());
}

TEST_CASE("malformed inputs give positioned errors")
{
  try {
    parse("sin(2*pi*t", 1);
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.offset() == 10);
  }
  for (const auto& s : fixtures::malformed_expressions) {
    CAPTURE(s);
    CHECK_THROWS_AS(parse(s, 2), ParseError);
  }
  try {
    parse("x1 + gamm", 1, { "gamma" });
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.offset() == 5);
    CHECK(std::string(err.what()).find("gamm") != std::string::npos);
  }
}

TEST_CASE("parser never crashes on random byte strings")
{
  std::mt19937_64 rng(7);
    for (int n = 0; n < 5000; ++n) {
    std::string s(std::uniform_int_distribution<int>(0, 20)(rng), ' ');
    for (auto& c : s)
      c = fixtures::fuzz_alphabet[std::uniform_int_distribution<std::size_t>(0, fixtures::fuzz_alphabet.size() - 1)(rng)];
    try {
      const Expr e = parse(s, 2);
      (void)e.print();
    } catch (const ParseError&) {
    }
  }
}

TEST_CASE("domain errors name the sub-expression")
{
  try {
    ev("1 + log(x1 - 2)", { { "x1", 1.0 } });
    FAIL("expected a domain error");
  } catch (const EvalError& err) {
    CHECK(err.subexpression().find("log") != std::string::npos);
  }
  CHECK_THROWS_AS(ev("sqrt(x1)", { { "x1", -1.0 } }), EvalError);
  CHECK_THROWS_AS(ev("x1 + 1", {}), EvalError);
}

TEST_CASE("print and parse round-trip evaluates identically")
{
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<std::string> params{ "a" };
  for (int n = 0; n < 1000; ++n) {
    const std::string text = fixtures::random_expr(rng, 6);
    const Expr e = parse(text, 2, params);
    const Expr back = parse(e.print(), 2, params);
    CAPTURE(text);
    for (int k = 0; k < 10; ++k) {
      const std::vector<double> slots{ u(rng), u(rng), u(rng), u(rng) };
      double a = NAN, b = NAN;
      try {
        a = e.eval(slots);
      } catch (const EvalError&) {
      }
      try {
        b = back.eval(slots);
      } catch (const EvalError&) {
      }
      REQUIRE(same(a, b));
    }
  }
}

TEST_CASE("finite-difference derivative bounds")
{
  SUBCASE("linear")
  {
    const auto b = estimate_derivative_bound(parse("x1", 1), Region{ 5.0, 1.0 }, 1, 11, 1e-3);
    CHECK(std::fabs(b.sup() - 1.0) <= 1e-8);
  }
  SUBCASE("sine")
  {
    const auto b = estimate_derivative_bound(parse("sin(x1)", 1), Region{ std::numbers::pi, 1.0 }, 1, 101, 1e-4);
    CHECK(std::fabs(b.sup() - 1.0) <= 1e-3);
  }
  SUBCASE("square")
  {
    const auto b = estimate_derivative_bound(parse("x1^2", 1), Region{ 2.0, 1.0 }, 2, 21, 1e-3);
    REQUIRE(b.by_order.size() == 2);
    CHECK(b.by_order[1] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(b.by_order[0] == doctest::Approx(4.0).epsilon(1e-6));
  }
  SUBCASE("mixed partial")
  {
    const auto p = space_partials([](double, std::span<const double> x) { return x[0] * x[1]; }, 0.0,
                                  std::vector<double>{ 1.0, 2.0 }, 2, 1e-3);
    REQUIRE(p.size() == 5);
    CHECK(p[0] == doctest::Approx(2.0));
    CHECK(p[1] == doctest::Approx(1.0));
    CHECK(p[3] == doctest::Approx(1.0));
  }
}
