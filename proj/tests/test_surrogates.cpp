#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <ggmsel/random.hpp>
#include <ggmsel/surrogates.hpp>
#include "test_support.hpp"

using Catch::Approx;
using namespace ggmsel;

TEST_CASE("surrogate values at reference points", "[surrogates]")
{
    REQUIRE(SurrogateSpec::lp(0.5).value(4.0) == Approx(2.0).epsilon(1e-15));
    REQUIRE(SurrogateSpec::geman(0.5).value(0.0) == 0.0);
    REQUIRE(SurrogateSpec::etp(2.0).value(1.0) == Approx(1.0).epsilon(1e-15));
    REQUIRE(SurrogateSpec::log(1.0).value(0.0) == 0.0);
    REQUIRE(SurrogateSpec::identity().value(3.5) == 3.5);
    REQUIRE(SurrogateSpec::laplace(2.0).value(2.0) == Approx(1.0 - std::exp(-1.0)));
    REQUIRE(SurrogateSpec::logarithm(3.0).value(1.0) == Approx(1.0));
}

TEST_CASE("surrogate derivatives at reference points", "[surrogates]")
{
    REQUIRE(SurrogateSpec::identity().derivative(7.0) == 1.0);
    REQUIRE(SurrogateSpec::geman(1.0).derivative(1.0) == Approx(0.25).epsilon(1e-15));

    // Central difference, h = 1e-6.
    const auto lp = SurrogateSpec::lp(0.5);
    const double h = 1e-6;
    const double fd = (lp.value(4.0 + h) - lp.value(4.0 - h)) / (2 * h);
    REQUIRE(fd == Approx(0.25).epsilon(1e-8));
    REQUIRE(lp.derivative(4.0) == Approx(0.25).epsilon(1e-15));
}

TEST_CASE("surrogate domain checks", "[surrogates]")
{
    REQUIRE_THROWS_AS(SurrogateSpec::lp(0.0), DomainError);
    REQUIRE_THROWS_AS(SurrogateSpec::lp(1.0), DomainError);
    REQUIRE_THROWS_AS(SurrogateSpec::geman(0.0), DomainError);
    REQUIRE_THROWS_AS(SurrogateSpec::laplace(-1.0), DomainError);
    REQUIRE_THROWS_AS(SurrogateSpec::etp(std::nan("")), DomainError);
    REQUIRE_THROWS_AS(SurrogateSpec(SurrogateKind::Geman, {}), InputError);
    REQUIRE_THROWS_AS(SurrogateSpec(SurrogateKind::Geman, {{"gamma", 1.0}}), InputError);
    REQUIRE_THROWS_AS(SurrogateSpec(SurrogateKind::Identity, {{"p", 0.5}}), InputError);

    REQUIRE_THROWS_AS(SurrogateSpec::geman(1.0).value(-1e-3), DomainError);
    REQUIRE_THROWS_AS(SurrogateSpec::lp(0.5).derivative(0.0), DomainError);
    REQUIRE_NOTHROW(SurrogateSpec::geman(1.0).derivative(0.0));
    REQUIRE_NOTHROW(SurrogateSpec::etp(1.0).second_derivative(0.0));
}

TEST_CASE("surrogate kind names round trip", "[surrogates]")
{
    for (auto k : all_surrogate_kinds) REQUIRE(surrogate_kind_from_string(to_string(k)) == k);
    REQUIRE_THROWS_AS(surrogate_kind_from_string("scad"), InputError);
}

TEST_CASE("analytic derivatives match finite differences", "[surrogates][property]")
{
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        for (auto kind : all_surrogate_kinds) {
            const auto g = test::random_surrogate(rng, kind);
            for (int k = 0; k < 50; ++k) {
                const double x = 0.01 + rng.uniform() * 9.99;
                const double h = 1e-5 * std::max(1.0, x);
                const double fd1 = (g.value(x + h) - g.value(x - h)) / (2 * h);
                const double fd2 = (g.derivative(x + h) - g.derivative(x - h)) / (2 * h);
                INFO(to_string(kind) << " param=" << g.param() << " x=" << x);
                REQUIRE(g.derivative(x) == Approx(fd1).epsilon(1e-5).margin(1e-10));
                REQUIRE(g.second_derivative(x) == Approx(fd2).epsilon(1e-4).margin(1e-9));
            }
        }
    }
}

TEST_CASE("surrogates are nondecreasing and concave", "[surrogates][property]")
{
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        for (auto kind : all_surrogate_kinds) {
            const auto g = test::random_surrogate(rng, kind);
            std::vector<double> xs;
            for (int k = 0; k < 60; ++k) xs.push_back(rng.uniform() * 10.0);
            std::sort(xs.begin(), xs.end());
            INFO(to_string(kind) << " param=" << g.param());
            for (std::size_t k = 1; k < xs.size(); ++k) {
                REQUIRE(g.value(xs[k - 1]) <= g.value(xs[k]));
                if (xs[k - 1] > 0.0) REQUIRE(g.derivative(xs[k - 1]) >= g.derivative(xs[k]));
                const double a = xs[k - 1];
                const double b = xs[k];
                REQUIRE(g.value(0.5 * (a + b)) >= 0.5 * (g.value(a) + g.value(b)) - 1e-12);
                if (a > 0.0) REQUIRE(g.second_derivative(a) <= g.second_derivative(b));
            }
            // log(gamma + x) is negative at 0 when gamma < 1.
            if (kind != SurrogateKind::Log || g.param() >= 1.0) REQUIRE(g.value(0.0) >= 0.0);
        }
    }
}

TEST_CASE("identity surrogate turns the group penalty into the l2,1 norm", "[surrogates]")
{
    const std::vector<double> norms{0.0, 1.5, 2.25, 0.125};
    REQUIRE(SurrogateSpec::identity().sum(norms) == 1.5 + 2.25 + 0.125);
}
