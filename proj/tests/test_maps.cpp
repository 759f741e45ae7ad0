#include <gtest/gtest.h>

#include <random>

#include <pdnorm/maps.hpp>

#include "oracles.hpp"

using namespace pdnorm;

namespace
{

cvec vec(std::initializer_list<cplx> v)
{
    cvec z(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (auto x : v) {
        z[i++] = x;
    }
    return z;
}

// F(z) = z/2 + z^2
map_spec quadratic_map()
{
    return make_map_spec({0.5}, 0.0, {}, {{term_key{0, multi_index{2}}, 1.0}});
}

// Koenigs limit mu^{-k} F^k(z), an oracle independent of the series.
cplx koenigs_limit(cplx z, int k = 60)
{
    cplx x = z, scale = 1.0;
    for (int i = 0; i < k; ++i) {
        x = 0.5 * x + x * x;
        scale *= 2.0;
    }
    return x * scale;
}

std::set<std::pair<std::size_t, std::vector<int>>> as_set(const resonance_set &r)
{
    std::set<std::pair<std::size_t, std::vector<int>>> s;
    for (const auto &k : r.entries) {
        s.emplace(k.component, k.index.exponents());
    }
    return s;
}

} // namespace

TEST(MapPoincare, Examples)
{
    EXPECT_TRUE(check_poincare_map({0.5, 0.3}).contracting);
    const auto r = check_poincare_map({2.0, 3.0});
    EXPECT_FALSE(r.contracting);
    EXPECT_NE(r.hint.find("linearize the inverse map"), std::string::npos);
    EXPECT_THROW(check_poincare_map({0.5, 2.0}), MixedSpectrum);
    EXPECT_THROW(check_poincare_map({0.5, 1.0}), MixedSpectrum);
    EXPECT_THROW(check_poincare_map({0.5, 0.0}), NonInvertible);
}

TEST(MapSpec, DerivedTable)
{
    // A = [[0.5, 0.1], [0, 0.5]], F1 = (0, z1^2): A^{-1} F1 = (-0.4, 2) z1^2.
    const auto s = make_map_spec({0.5, 0.5}, 0.1, {0}, {{term_key{1, multi_index{2, 0}}, 1.0}});
    EXPECT_NEAR(std::abs(s.f1.at(term_key{0, multi_index{2, 0}}) + 0.4), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s.f1.at(term_key{1, multi_index{2, 0}}) - 2.0), 0.0, 1e-15);
    EXPECT_EQ(s.rho_star, 0.5);
    EXPECT_EQ(s.rho_sup, 0.5);
    EXPECT_EQ(s.m, 2);
    EXPECT_THROW(make_map_spec({2.0}, 0.0, {}, {}), InvalidInput);
}

TEST(RDelta, Examples)
{
    const auto s = quadratic_map();
    EXPECT_NEAR(r_delta(s, 0.1), 0.1, 1e-12);
    EXPECT_EQ(r_delta(make_map_spec({0.5}, 0.0, {}, {}), 0.1, 7.0), 7.0);
    double prev = infinity;
    for (double d : {0.1, 1e-2, 1e-4, 1e-8}) {
        const double r = r_delta(s, d);
        EXPECT_LT(r, prev);
        EXPECT_NEAR(r, d, 1e-12);
        prev = r;
    }
    EXPECT_THROW(r_delta(s, 0.5), ContractionImpossible);
}

TEST(RDelta, ContractionHoldsOnBall)
{
    const auto s = make_map_spec({cplx(0.3, 0.2), 0.6}, 0.0, {},
                                 {{term_key{0, multi_index{1, 1}}, 0.7}, {term_key{1, multi_index{0, 3}}, cplx(0, 2)}});
    const double delta = default_map_delta(s);
    const double r = r_delta(s, delta);
    const poly_map f = poly_map::jordan(s.mu, 0.0, {}, s.f1_big);
    for (const auto &z : sphere_grid(200, 2, r, 1)) {
        EXPECT_LE(eval(f, z).norm(), (s.rho_sup + delta) * z.norm() * (1 + 1e-12));
    }
}

TEST(MapFlatness, Examples)
{
    EXPECT_EQ(min_flatness_map({0.5}, 0.0, 1.2), 2);
    EXPECT_EQ(min_flatness_map({0.5, 0.25}, 0.0, 1.1), 3);
    EXPECT_EQ(min_flatness_map({0.4, 0.4}, 0.0, 1.0 + 1e-9), 2);
    EXPECT_THROW(min_flatness_map({0.5}, 0.6, 1.1), ContractionImpossible);
    EXPECT_THROW(min_flatness_map({0.5}, 0.0, 1.0), InvalidInput);
}

TEST(MapResonances, Examples)
{
    const auto r = resonances_map({0.25, 0.5}, 3);
    ASSERT_EQ(r.entries.size(), 1u);
    EXPECT_EQ(r.entries[0].component, 0u);
    EXPECT_EQ(r.entries[0].index, (multi_index{0, 2}));
    EXPECT_TRUE(resonances_map({0.5}, 10).entries.empty());
    EXPECT_TRUE(resonances_map({0.3, 0.7}, 4).entries.empty());
}

TEST(MapResonances, AgreeWithBruteForce)
{
    std::mt19937_64 rng(19);
    std::uniform_int_distribution<int> dim(1, 3), bound(2, 6), pick(0, 3);
    const double basis[] = {0.5, 0.25, 0.125, 0.0625};
    std::uniform_real_distribution<double> u(0.1, 0.9), a(0, 6.28);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<std::size_t>(dim(rng));
        std::vector<cplx> mu(n);
        for (auto &x : mu) {
            // Powers of 1/2 produce resonances; random points mostly do not.
            x = trial % 2 ? cplx(basis[pick(rng)]) : std::polar(u(rng), a(rng));
        }
        const int b = bound(rng);
        const auto want = oracle::brute_resonances(n, b, 1e-9, [&](const std::vector<int> &m, std::size_t j) {
            return oracle::multiplicative_divisor(mu, m, j);
        });
        EXPECT_EQ(as_set(resonances_map(mu, b, 1e-9)), want) << "trial " << trial;
    }
}

TEST(MapResonances, CompleteBound)
{
    const std::vector<cplx> mu{0.5, 0.25};
    const int b = complete_resonance_bound_map(mu);
    EXPECT_EQ(b, 3);
    EXPECT_EQ(resonances_map(mu, b).entries.size(), resonances_map(mu, 10).entries.size());
}

TEST(Koenigs, Examples)
{
    const auto c = koenigs_coefficients(0.5, {0, 0, 1}, 3);
    EXPECT_NEAR(std::abs(c[2] - 4.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(c[3] - 32.0 / 3.0), 0.0, 1e-13);
    const auto lin = koenigs_coefficients(0.3, {}, 6);
    for (std::size_t d = 2; d < lin.size(); ++d) {
        EXPECT_EQ(lin[d], cplx{});
    }
}

TEST(Koenigs, MatchesExactRationalRecursion)
{
    using oracle::rat;
    const auto exact = oracle::koenigs_exact(rat(1, 2), {rat(0), rat(0), rat(1)}, 8);
    EXPECT_EQ(exact[2], rat(4));
    EXPECT_EQ(exact[3], rat(32, 3));
    const auto c = koenigs_coefficients(0.5, {0, 0, 1}, 8);
    for (std::size_t d = 1; d <= 8; ++d) {
        EXPECT_NEAR(std::abs(c[d] - oracle::to_double(exact[d])), 0.0, 1e-12 * std::abs(c[d])) << "degree " << d;
    }
    const auto exact2 = oracle::koenigs_exact(rat(1, 3), {rat(0), rat(0), rat(-2), rat(5, 2)}, 7);
    const auto c2 = koenigs_coefficients(1.0 / 3.0, {0, 0, -2, 2.5}, 7);
    for (std::size_t d = 1; d <= 7; ++d) {
        EXPECT_NEAR(std::abs(c2[d] - oracle::to_double(exact2[d])), 0.0, 1e-11 * std::abs(c2[d])) << "degree " << d;
    }
}

TEST(MapSeries, LinearMapIsIdentity)
{
    const map_linearizer L(make_map_spec({0.5, cplx(0, 0.3)}, 0.0, {}, {}), 1e-12);
    const cvec z = vec({0.3, 0.2});
    const auto s = L.sample(z);
    EXPECT_EQ(s.value, z);
    EXPECT_EQ(s.steps, 0u);
    EXPECT_EQ(map_conjugacy_residual(L, {z, vec({0.1, -0.4})}), 0.0);
}

TEST(MapSeries, FirstTerm)
{
    map_config cfg;
    cfg.delta = 0.1;
    const map_linearizer L(quadratic_map(), 1e-12, cfg);
    EXPECT_NEAR(L.radius(), 0.1, 1e-12);
    std::vector<map_series_state> trace;
    L.sample(vec({0.1}), &trace);
    ASSERT_FALSE(trace.empty());
    EXPECT_NEAR(trace[0].delta_norm, 0.02, 1e-16);
    EXPECT_NEAR(std::abs(trace[0].partial[0] - 0.12), 0.0, 1e-16);
}

TEST(MapSeries, MatchesKoenigsSeriesAndLimit)
{
    const map_linearizer L(quadratic_map(), 1e-14);
    const cplx z = 0.05;
    const cplx got = L(vec({z}))[0];
    const auto c = koenigs_coefficients(0.5, {0, 0, 1}, 20);
    cplx series = 0.0, p = 1.0;
    for (int d = 1; d <= 20; ++d) {
        p *= z;
        series += c[static_cast<std::size_t>(d)] * p;
    }
    EXPECT_NEAR(std::abs(got - series), 0.0, 1e-8);
    EXPECT_NEAR(std::abs(got - koenigs_limit(z)), 0.0, 1e-12);
    for (const auto &w : ball_points(20, 1, 0.05, 2)) {
        EXPECT_NEAR(std::abs(L(w)[0] - koenigs_limit(w[0])), 0.0, 1e-12);
    }
}

TEST(MapSeries, TaylorMatchesKoenigs)
{
    const map_linearizer L(quadratic_map(), 1e-14);
    const auto t = map_taylor_coefficients(L, 0.9 * L.radius(), 6);
    const auto exact = oracle::koenigs_exact(oracle::rat(1, 2), {oracle::rat(0), oracle::rat(0), oracle::rat(1)}, 6);
    for (int d = 1; d <= 6; ++d) {
        EXPECT_NEAR(std::abs(t.coefficient(0, multi_index{d}) - oracle::to_double(exact[static_cast<std::size_t>(d)])),
                    0.0, 1e-8)
            << "degree " << d;
    }
}

TEST(MapSeries, FunctionalEquation)
{
    const double tol = 1e-13;
    const map_linearizer L(quadratic_map(), tol);
    EXPECT_LT(map_conjugacy_residual(L, ball_points(20, 1, 0.05, 4)), 1e-8);
    EXPECT_EQ(map_conjugacy_residual(L, {vec({0.0})}), 0.0);

    const auto s = make_map_spec({0.5, cplx(0.2, 0.3)}, 0.0, {},
                                 {{term_key{0, multi_index{1, 1}}, 1.0}, {term_key{1, multi_index{2, 0}}, cplx(0, -1)}});
    const map_linearizer L2(s, tol);
    EXPECT_LT(map_conjugacy_residual(L2, ball_points(20, 2, L2.radius(), 4)), 10 * tol);
}

TEST(MapSeries, JordanBlockFunctionalEquation)
{
    const double tol = 1e-13;
    const auto s = make_map_spec({0.4, 0.4}, 0.05, {0},
                                 {{term_key{0, multi_index{0, 2}}, 0.5}, {term_key{1, multi_index{1, 1}}, 1.0}});
    const map_linearizer L(s, tol);
    EXPECT_LT(map_conjugacy_residual(L, ball_points(20, 2, L.radius(), 9)), 10 * tol);
}

TEST(MapSeries, TelescopingAndNormalization)
{
    const map_linearizer L(quadratic_map(), 1e-14);
    std::vector<map_series_state> trace;
    const cvec z = vec({cplx(0.03, -0.02)});
    const auto s = L.sample(z, &trace);
    ASSERT_GE(trace.size(), 2u);
    EXPECT_NEAR((trace[0].partial - z).norm(), trace[0].delta_norm, 1e-17);
    for (std::size_t l = 1; l < trace.size(); ++l) {
        EXPECT_NEAR((trace[l].partial - trace[l - 1].partial).norm(), trace[l].delta_norm, 1e-17);
    }
    EXPECT_EQ(trace.back().partial, s.value);
    EXPECT_EQ(L(vec({0.0})), vec({0.0}));
    const double h = 1e-5;
    const cplx deriv = (L(vec({h}))[0] - L(vec({-h}))[0]) / (2 * h);
    EXPECT_NEAR(std::abs(deriv - 1.0), 0.0, 1e-8);
}

TEST(MapSeries, GeometricTail)
{
    for (const auto &spec : {quadratic_map(), make_map_spec({0.5, 0.4}, 0.0, {},
                                                            {{term_key{0, multi_index{1, 1}}, 1.0},
                                                             {term_key{1, multi_index{2, 0}}, 0.5}})}) {
        const map_linearizer L(spec, 1e-14);
        ASSERT_LT(L.theta(), 1.0);
        for (const auto &z : ball_points(10, spec.mu.size(), L.radius(), 6)) {
            std::vector<map_series_state> trace;
            L.sample(z, &trace);
            for (std::size_t l = 3; l + 1 < trace.size(); ++l) {
                if (trace[l].delta_norm == 0.0) {
                    continue;
                }
                EXPECT_LE(trace[l + 1].delta_norm / trace[l].delta_norm, L.theta() * 1.1) << "l = " << l;
            }
        }
    }
}

TEST(MapSeries, ThetaFromSpec)
{
    const map_linearizer L(quadratic_map(), 1e-12);
    EXPECT_NEAR(L.delta(), 0.05, 1e-15);
    EXPECT_NEAR(L.theta(), 0.55 * 0.55 / 0.5, 1e-15);
}

TEST(MapSeries, Errors)
{
    const map_linearizer L(quadratic_map(), 1e-12);
    EXPECT_THROW(L(vec({0.2})), Escape);
    map_config cfg;
    cfg.l_max = 2;
    EXPECT_THROW(map_linearizer(quadratic_map(), 1e-12, cfg)(vec({0.04})), NoConvergence);
    EXPECT_THROW(map_linearizer(make_map_spec({0.5, 0.1}, 0.0, {}, {{term_key{0, multi_index{2, 0}}, 1.0}}), 1e-12),
                 InsufficientFlatness);
}

TEST(MapSeries, ResonantPreparedMapRejected)
{
    // 0.5^2 = 0.25: z2^2 in component 1 is resonant and stays in F0.
    cmat a = cmat::Zero(2, 2);
    a(0, 0) = 0.25;
    a(1, 1) = 0.5;
    const poly_map f(a, {{term_key{0, multi_index{0, 2}}, 1.0}});
    const auto pm = prepare_map(f, 3);
    ASSERT_TRUE(pm.f0_nonlinear());
    EXPECT_THROW(make_map_spec(pm), ResonantMap);
}

TEST(MapSeries, PreparedMapRoundTrip)
{
    const poly_map f(cmat::Constant(1, 1, 0.5), {{term_key{0, multi_index{2}}, 1.0}, {term_key{0, multi_index{3}}, 0.5}});
    const auto pm = prepare_map(f, 3);
    const auto s = linearize_map_point(pm, vec({0.01}), 1e-13);
    EXPECT_GT(s.steps, 0u);
    EXPECT_LT(s.tail_bound, 1e-13);
}
