#include <gtest/gtest.h>

#include <random>

#include <pdnorm/prepare.hpp>

#include "oracles.hpp"

using namespace pdnorm;

namespace
{

cplx coeff(const coeff_table &t, std::size_t j, multi_index m)
{
    auto it = t.find(term_key{j, std::move(m)});
    return it == t.end() ? cplx{} : it->second;
}

double max_nonlinear(const poly_map &p)
{
    double s = 0.0;
    for (const auto &[k, c] : p.coefficients()) {
        s = std::max(s, std::abs(c));
    }
    return s;
}

// Spectrum inside the sector |arg(-l)| < 0.7 so that the Poincare condition holds.
std::vector<cplx> random_poincare_spectrum(std::mt19937_64 &rng, std::size_t n, bool integer)
{
    std::uniform_real_distribution<double> rad(0.6, 2.5), ang(-0.7, 0.7);
    std::uniform_int_distribution<int> k(1, 3);
    std::vector<cplx> l(n);
    for (auto &x : l) {
        x = integer ? cplx(-k(rng), 0.0) : -std::polar(rad(rng), ang(rng));
    }
    return l;
}

void expect_prepared(const poly_vector_field &f, const prepared_form &pf, double tol)
{
    const int m = pf.m;
    const auto pushed = pushforward_truncate(pf.change, f, m - 1);
    for (const auto &[k, v] : subtract(truncate_table(pushed.coefficients(), 2, m - 1), pf.x0.coefficients())) {
        EXPECT_LE(std::abs(v), tol) << "component " << k.component << " index " << k.index.str();
    }
    for (const auto &[k, v] : pf.x1.coefficients()) {
        EXPECT_GE(k.index.degree(), m);
    }
    EXPECT_GE(flatness_order(pf.x1), m);
    EXPECT_LT(max_degree(pf.x0.coefficients()), m);
    for (const auto &[k, v] : pf.x0.coefficients()) {
        EXPECT_LE(std::abs(flow_divisor(f.eigenvalues(), k.index, k.component)), default_resonance_tol);
    }
}

} // namespace

TEST(PrepareFlow, NonResonantQuadratic)
{
    const poly_vector_field f({-1.0, -2.0}, 0.0, {}, {{term_key{0, multi_index{0, 2}}, 1.0}});
    const auto pf = prepare_flow(f, 3);
    // w1 = z1 + h z2^2 removes the term when 1 - 3h = 0.
    EXPECT_NEAR(std::abs(coeff(pf.change.coefficients(), 0, {0, 2}) - 1.0 / 3.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(coeff(pf.change_inverse.coefficients(), 0, {0, 2}) + 1.0 / 3.0), 0.0, 1e-15);
    EXPECT_TRUE(pf.x0.is_linear());
    EXPECT_GE(flatness_order(pf.x1), 3);
    expect_prepared(f, pf, 1e-12);
}

TEST(PrepareFlow, ResonantTermKept)
{
    const poly_vector_field f({-1.0, -2.0}, 0.0, {}, {{term_key{1, multi_index{2, 0}}, 1.0}});
    const auto pf = prepare_flow(f, 3);
    EXPECT_EQ(max_nonlinear(pf.change), 0.0);
    EXPECT_EQ(coeff(pf.x0.coefficients(), 1, {2, 0}), cplx(1.0));
    EXPECT_TRUE(pf.x1.coefficients().empty());
    EXPECT_TRUE(pf.x0_nonlinear());
    ASSERT_EQ(pf.resonances.entries.size(), 1u);
}

TEST(PrepareFlow, LinearField)
{
    const poly_vector_field f({cplx(-1, 1), -1.5}, 0.0, {}, {});
    for (int m : {2, 3, 6}) {
        const auto pf = prepare_flow(f, m);
        EXPECT_TRUE(pf.change.is_linear());
        EXPECT_EQ(pf.x0, f.with_coefficients({}, std::max(1, m - 1)));
        EXPECT_TRUE(pf.x1.coefficients().empty());
        EXPECT_EQ(pf.flatness_constant, 0.0);
    }
}

TEST(PrepareFlow, OneDimensionalMatchesDenseOracle)
{
    // -z + z^2 + z^3: the change must reproduce the dense push-forward through degree m - 1.
    const poly_vector_field f({-1.0}, 0.0, {}, {{term_key{0, multi_index{2}}, 1.0}, {term_key{0, multi_index{3}}, 1.0}});
    const int m = 5;
    const auto pf = prepare_flow(f, m);
    oracle::dense p(m + 2, 0.0), x{0.0, -1.0, 1.0, 1.0};
    for (const auto &[k, c] : pf.change.coefficients()) {
        p[static_cast<std::size_t>(k.index.degree())] = c;
    }
    p[1] = 1.0;
    const auto pushed = oracle::pushforward(p, x, m + 1);
    EXPECT_NEAR(std::abs(pushed[1] + 1.0), 0.0, 1e-14);
    for (int d = 2; d < m; ++d) {
        EXPECT_LE(std::abs(pushed[static_cast<std::size_t>(d)]), 1e-12) << "degree " << d;
    }
    for (int d = m; d <= pf.x1.truncation_degree(); ++d) {
        EXPECT_NEAR(std::abs(pushed[static_cast<std::size_t>(d)] - coeff(pf.x1.coefficients(), 0, {d})), 0.0, 1e-12);
    }
}

TEST(PrepareFlow, RandomSuite)
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 3);
        const auto lambda = random_poincare_spectrum(rng, n, trial % 4 == 0);
        const poly_vector_field f(lambda, 0.0, {}, oracle::random_table(rng, n, 4, 6));
        const int m = 3 + trial % 3;
        const auto pf = prepare_flow(f, m);
        SCOPED_TRACE("trial " + std::to_string(trial));
        expect_prepared(f, pf, 1e-12);
    }
}

TEST(PrepareFlow, JordanBlockCoupling)
{
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const poly_vector_field f({-1.0, -1.0, cplx(-2.5, 0.3)}, 0.5, {0}, oracle::random_table(rng, 3, 3, 6));
        const auto pf = prepare_flow(f, 4);
        expect_prepared(f, pf, 1e-12);
    }
}

TEST(PrepareFlow, Idempotent)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 3);
        const auto lambda = random_poincare_spectrum(rng, n, trial % 2 == 0);
        const poly_vector_field f(lambda, 0.0, {}, oracle::random_table(rng, n, 4, 5));
        const auto pf = prepare_flow(f, 4);
        const auto again = prepare_flow(pf.prepared_field(), 4);
        EXPECT_LE(max_nonlinear(again.change), 1e-12);
    }
}

TEST(PrepareFlow, DivisorLowerBound)
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 3);
        const auto lambda = random_poincare_spectrum(rng, n, false);
        const auto info = select_direction(lambda);
        const int bound = 8;
        for (int d = 2; d <= bound; ++d) {
            if (d <= info.beta / info.alpha) {
                continue;
            }
            for (const auto &m : indices_of_degree(n, d)) {
                for (std::size_t j = 0; j < n; ++j) {
                    EXPECT_GT(std::abs(flow_divisor(lambda, m, j)), info.alpha * (d - info.beta / info.alpha) - 1e-12);
                }
            }
        }
    }
}

TEST(PrepareFlow, DivisorTooSmall)
{
    const poly_vector_field f({-1.0, cplx(-2.0 + 1e-8)}, 0.0, {}, {{term_key{1, multi_index{2, 0}}, 1.0}});
    EXPECT_THROW(prepare_flow(f, 3), DivisorTooSmall);
}

TEST(PrepareFlow, RejectsBadOrder)
{
    const poly_vector_field f({-1.0}, 0.0, {}, {});
    EXPECT_THROW(prepare_flow(f, 1), InvalidInput);
    const poly_vector_field saddle({1.0, -1.0}, 0.0, {}, {});
    EXPECT_THROW(prepare_flow(saddle, 3), NotPoincare);
}

TEST(PrepareFlow, DefaultFlatnessGivesDecayingTail)
{
    const poly_vector_field f({-1.0, -5.0}, 0.0, {}, {{term_key{0, multi_index{0, 2}}, 1.0}});
    const int m = default_flatness_flow(f);
    const auto info = select_direction(f.eigenvalues());
    EXPECT_GT(flow_tail_rate(info, m), 0.0);
    EXPECT_LE(flow_tail_rate(info, m - 1), 0.0);
}

TEST(PrepareMap, QuadraticKoenigsStep)
{
    const poly_map f(cmat::Constant(1, 1, 0.5), {{term_key{0, multi_index{2}}, 1.0}});
    const auto pm = prepare_map(f, 3);
    EXPECT_NEAR(std::abs(coeff(pm.change.coefficients(), 0, {2}) - 4.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(coeff(pm.change_inverse.coefficients(), 0, {2}) + 4.0), 0.0, 1e-14);
    EXPECT_TRUE(pm.f0.empty());
    for (const auto &[k, c] : pm.f1) {
        EXPECT_GE(k.index.degree(), 3);
    }
    // Agrees with the first Koenigs coefficient.
    const auto c = oracle::koenigs_exact(oracle::rat(1, 2), {0, 0, 1}, 2);
    EXPECT_NEAR(oracle::to_double(c[2]), 4.0, 0.0);
}

TEST(PrepareMap, NothingBelowOrder)
{
    const poly_map lin(cmat::Constant(1, 1, 0.5), {});
    EXPECT_TRUE(prepare_map(lin, 4).change.is_linear());
    const poly_map f(cmat::Constant(1, 1, 0.5), {{term_key{0, multi_index{5}}, 1.0}});
    const auto pm = prepare_map(f, 4);
    EXPECT_TRUE(pm.change.is_linear());
    EXPECT_EQ(coeff(pm.f1, 0, {5}), cplx(1.0));
}

TEST(PrepareMap, ConjugatesAwayNonResonantTerms)
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> r(0.2, 0.8), a(0, 6.28);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 3);
        std::vector<cplx> mu(n);
        for (auto &x : mu) {
            x = std::polar(r(rng), a(rng));
        }
        const auto f = poly_map::jordan(mu, 0.0, {}, oracle::random_table(rng, n, 3, 5), 3);
        const auto pm = prepare_map(f, 4);
        const poly_map g = detail::map_conjugate(pm.change, f, 3);
        for (const auto &[k, c] : g.coefficients()) {
            if (k.index.degree() < 4) {
                EXPECT_LE(std::abs(c - coeff(pm.f0, k.component, k.index)), 1e-12);
            }
        }
    }
}

TEST(PrepareMap, Errors)
{
    cmat a = cmat::Zero(2, 2);
    a(0, 0) = 0.5;
    EXPECT_THROW(prepare_map(poly_map(a, {}), 3), NonInvertible);
    cmat b = cmat::Zero(2, 2);
    b(0, 0) = 0.5;
    b(1, 1) = 0.25;
    b(1, 0) = 1.0;
    EXPECT_THROW(prepare_map(poly_map(b, {}), 3), InvalidInput);
}

TEST(ToJordan, Examples)
{
    cmat d = cmat::Zero(2, 2);
    d(0, 0) = -1.0;
    d(1, 1) = -2.0;
    const auto a = to_jordan(d);
    EXPECT_EQ(a.eigenvalues, (std::vector<cplx>{-1.0, -2.0}));
    EXPECT_EQ(a.epsilon, 0.0);
    EXPECT_TRUE(a.similarity.linear().isIdentity());

    cmat j(2, 2);
    j << -1.0, 0.5, 0.0, -1.0;
    const auto b = to_jordan(j);
    EXPECT_EQ(b.eigenvalues, (std::vector<cplx>{-1.0, -1.0}));
    EXPECT_EQ(b.epsilon, 0.5);
    EXPECT_EQ(b.nilpotent, (std::vector<std::size_t>{0}));

    // Companion matrix of x^2 + 3x + 2: eigenvectors (1, -1) and (1, -2).
    cmat c(2, 2);
    c << 0.0, 1.0, -2.0, -3.0;
    const auto r = to_jordan(c);
    ASSERT_EQ(r.eigenvalues.size(), 2u);
    EXPECT_NEAR(std::abs(r.eigenvalues[0] + 1.0), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(r.eigenvalues[1] + 2.0), 0.0, 1e-12);
    const cmat &v = r.similarity.linear();
    EXPECT_NEAR(std::abs(v(0, 0) - 1.0), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(v(1, 0) + 1.0), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(v(0, 1) - 1.0), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(v(1, 1) + 2.0), 0.0, 1e-12);
}

TEST(ToJordan, DiagonalizesRandomMatrices)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 1 + trial % 4;
        cmat a(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < n; ++k) {
                a(i, k) = cplx(g(rng), g(rng));
            }
        }
        const auto r = to_jordan(a);
        const cmat &v = r.similarity.linear();
        cmat dm = cmat::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            dm(i, i) = r.eigenvalues[static_cast<std::size_t>(i)];
        }
        EXPECT_LE((a * v - v * dm).norm(), 1e-10 * (1.0 + a.norm()));
    }
}

TEST(ToJordan, NearlyDefective)
{
    cmat a(2, 2);
    a << -1.0, 0.0, 0.3, -1.0;
    EXPECT_THROW(to_jordan(a), NearlyDefective);
    EXPECT_THROW(to_jordan(cmat::Zero(2, 3)), DimensionMismatch);
}
