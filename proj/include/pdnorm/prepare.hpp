#pragma once

// Reduction to prepared form: a polynomial change of coordinates removes every
// non-resonant monomial of degree < m, leaving X = X0 + X1 with X0 the linear
// part plus resonant monomials and X1 m-flat. The same reduction for maps uses
// multiplicative divisors mu^m - mu_j.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <pdnorm/algebra.hpp>
#include <pdnorm/core.hpp>
#include <pdnorm/spectrum.hpp>

namespace pdnorm
{

struct prepare_options {
    double q = 1.1;
    double resonance_tol = default_resonance_tol;
    // Non-resonant divisors between resonance_tol and this floor are rejected.
    double divisor_floor = 1e-7;
    // Truncation degree of the transformed field; < 0 means max(input, m).
    int output_degree = -1;
    // Radius of the ball on which the flatness constant C is quoted.
    double working_radius = 1.0;
};

struct prepared_form {
    poly_map change;         // w = P(z), tangent to the identity
    poly_map change_inverse; // truncated P^{-1}
    poly_vector_field x0;    // linear part + resonant monomials of degree < m
    poly_vector_field x1;    // m-flat remainder
    int m = 2;
    double q = 1.1;
    double flatness_constant = 0.0; // ||X1(w)|| <= C ||w||^m on ||w|| <= working_radius
    double working_radius = 1.0;
    int output_degree = 2;
    resonance_set resonances;

    bool x0_nonlinear() const noexcept
    {
        return !x0.is_linear();
    }
    poly_vector_field prepared_field() const
    {
        return x0.with_coefficients(add(x0.coefficients(), x1.coefficients()),
                                    std::max(x0.truncation_degree(), x1.truncation_degree()));
    }
};

// Prepared form of a map F = A z + F1: F0 = A z + resonant part, F1 m-flat.
struct prepared_map {
    poly_map change;
    poly_map change_inverse;
    std::vector<cplx> eigenvalues;
    double epsilon = 0.0;
    std::vector<std::size_t> nilpotent;
    coeff_table f0; // resonant nonlinear terms of degree < m
    coeff_table f1; // m-flat remainder
    int m = 2;
    double q = 1.1;
    int output_degree = 2;
    resonance_set resonances;

    bool f0_nonlinear() const noexcept
    {
        return !f0.empty();
    }
    poly_map prepared() const
    {
        return poly_map::jordan(eigenvalues, epsilon, nilpotent, add(f0, f1), output_degree);
    }
};

// C = sum |c| R^{|m| - m} over the remainder.
inline double flatness_constant(const coeff_table &x1, int m, double radius)
{
    double c = 0.0;
    for (const auto &[k, v] : x1) {
        c += std::abs(v) * std::pow(radius, k.index.degree() - m);
    }
    return c;
}

// Exponential rate of the tail integrand bound,
// m (alpha - eps - delta) - (beta + eps + delta), with delta = alpha / 10.
inline double flow_tail_rate(const spectrum_info &info, int m, double delta = -1.0)
{
    if (delta < 0) {
        delta = info.alpha / 10.0;
    }
    return m * (info.alpha - info.epsilon - delta) - (info.beta + info.epsilon + delta);
}

namespace detail
{

// Ordering in which the Jordan coupling of the homological operator is
// strictly increasing: weight sum_i i m_i minus the component index.
inline long homological_key(const term_key &k)
{
    long w = 0;
    for (std::size_t i = 0; i < k.index.size(); ++i) {
        w += static_cast<long>(i) * k.index[i];
    }
    return w - static_cast<long>(k.component);
}

enum class homological_kind { flow, map };

struct jordan_data {
    std::vector<cplx> lambda;
    double epsilon;
    std::vector<std::size_t> nilpotent;
    cmat a;
};

// Image of the basis element z^m e_j under h -> Dh A z - A h (flows) or
// h -> h(Az) - A h (maps), restricted to degree |m|.
inline std::map<term_key, cplx> homological_image(homological_kind kind, const jordan_data &jd, const term_key &src)
{
    const std::size_t n = jd.lambda.size();
    const int d = src.index.degree();
    std::map<term_key, cplx> out;
    if (kind == homological_kind::flow) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src.index[k] == 0) {
                continue;
            }
            const double e = src.index[k];
            // d/dz_k z^m times (A z)_k = lambda_k z_k + eps z_{k+1}
            out[src] += e * jd.lambda[k];
            if (std::find(jd.nilpotent.begin(), jd.nilpotent.end(), k) != jd.nilpotent.end()) {
                out[term_key{src.component, src.index.shifted(k, k + 1)}] += e * jd.epsilon;
            }
        }
    } else {
        series_vec az(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                poly::accumulate(az[i], multi_index::unit(n, k),
                                 jd.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
            }
        }
        series mono;
        mono.emplace(src.index, 1.0);
        for (const auto &[mm, c] : poly::compose(mono, az, d)) {
            out[term_key{src.component, mm}] += c;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const cplx a = jd.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(src.component));
        if (a != cplx{}) {
            out[term_key{i, src.index}] -= a;
        }
    }
    return out;
}

struct homological_solution {
    coeff_table h;        // degree-d part of the change
    coeff_table resonant; // coefficients kept in the normal part
};

// Solves T h = -c on the non-resonant degree-d terms.
inline homological_solution solve_homological(homological_kind kind, const jordan_data &jd, const coeff_table &c_deg,
                                              int d, const std::function<cplx(const term_key &)> &divisor,
                                              const prepare_options &opt)
{
    const std::size_t n = jd.lambda.size();
    std::vector<term_key> basis;
    for (std::size_t j = 0; j < n; ++j) {
        for (auto &m : indices_of_degree(n, d)) {
            basis.push_back(term_key{j, std::move(m)});
        }
    }
    std::stable_sort(basis.begin(), basis.end(),
                     [](const term_key &a, const term_key &b) { return homological_key(a) < homological_key(b); });

    homological_solution sol;
    std::vector<term_key> unknowns;
    for (const auto &k : basis) {
        const double div = std::abs(divisor(k));
        auto it = c_deg.find(k);
        if (div <= opt.resonance_tol) {
            if (it != c_deg.end()) {
                sol.resonant.emplace(k, it->second);
            }
            continue;
        }
        if (div < opt.divisor_floor) {
            throw DivisorTooSmall("divisor |" + num_str(div) + "| for component " + std::to_string(k.component + 1)
                                  + ", exponent " + k.index.str() + " is nearly resonant");
        }
        unknowns.push_back(k);
    }
    if (unknowns.empty()) {
        return sol;
    }
    std::map<term_key, std::size_t> pos;
    for (std::size_t i = 0; i < unknowns.size(); ++i) {
        pos.emplace(unknowns[i], i);
    }
    const auto nu = static_cast<Eigen::Index>(unknowns.size());
    cmat t = cmat::Zero(nu, nu);
    bool lower = true;
    for (std::size_t s = 0; s < unknowns.size(); ++s) {
        for (const auto &[tk, v] : homological_image(kind, jd, unknowns[s])) {
            auto it = pos.find(tk);
            if (it == pos.end()) {
                continue; // couplings never leave a divisor class
            }
            t(static_cast<Eigen::Index>(it->second), static_cast<Eigen::Index>(s)) += v;
            lower = lower && (it->second >= s || std::abs(v) == 0.0);
        }
    }
    cvec rhs(nu);
    for (std::size_t i = 0; i < unknowns.size(); ++i) {
        auto it = c_deg.find(unknowns[i]);
        rhs[static_cast<Eigen::Index>(i)] = it == c_deg.end() ? cplx{} : -it->second;
    }
    cvec h(nu);
    if (lower) {
        for (Eigen::Index i = 0; i < nu; ++i) {
            cplx acc = rhs[i];
            for (Eigen::Index s = 0; s < i; ++s) {
                acc -= t(i, s) * h[s];
            }
            h[i] = acc / t(i, i);
        }
    } else {
        h = t.fullPivLu().solve(rhs);
    }
    for (std::size_t i = 0; i < unknowns.size(); ++i) {
        const cplx v = h[static_cast<Eigen::Index>(i)];
        if (std::abs(v) >= canonical_zero) {
            sol.h.emplace(unknowns[i], v);
        }
    }
    return sol;
}

inline jordan_data jordan_of(const std::vector<cplx> &lambda, double eps, const std::vector<std::size_t> &nil)
{
    jordan_data jd{lambda, eps, nil, {}};
    jd.a = poly_map::jordan(lambda, eps, nil, {}).linear();
    return jd;
}

inline poly_map map_conjugate(const poly_map &change, const poly_map &f, int degree)
{
    const poly_map inv = inverse_truncate(change, degree);
    return compose_truncate(change, compose_truncate(f, inv, degree), degree);
}

} // namespace detail

inline prepared_form prepare_flow(const poly_vector_field &field, int m, const prepare_options &opt = {})
{
    const auto info = select_direction(field.eigenvalues(), field.epsilon());
    if (m < 2) {
        throw InvalidInput("prepare_flow: flatness order must be >= 2");
    }
    const std::size_t n = field.dim();
    const int out_deg = opt.output_degree < 0 ? std::max(field.truncation_degree(), m) : opt.output_degree;
    if (out_deg < m - 1) {
        throw InvalidInput("prepare_flow: output degree below m - 1");
    }
    const auto jd = detail::jordan_of(field.eigenvalues(), field.epsilon(), field.nilpotent());
    auto divisor = [&](const term_key &k) { return flow_divisor(field.eigenvalues(), k.index, k.component); };

    poly_map change = poly_map::identity(n);
    poly_vector_field current = field;
    for (int d = 2; d < m; ++d) {
        const coeff_table c_deg = truncate_table(current.coefficients(), d, d);
        const auto sol = detail::solve_homological(detail::homological_kind::flow, jd, c_deg, d, divisor, opt);
        if (sol.h.empty()) {
            continue;
        }
        const poly_map step(cmat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), sol.h, d);
        current = pushforward_truncate(step, current, out_deg);
        change = compose_truncate(step, change, out_deg);
    }

    prepared_form pf;
    pf.m = m;
    pf.q = opt.q;
    pf.output_degree = out_deg;
    pf.working_radius = opt.working_radius;
    pf.resonances = resonances(field.eigenvalues(), std::max(2, m - 1), opt.resonance_tol);
    pf.change = change;
    pf.change_inverse = inverse_truncate(change, std::max(out_deg, 1));

    const poly_vector_field transformed = pushforward_truncate(change, field, out_deg);
    coeff_table normal, rest;
    for (const auto &[k, c] : transformed.coefficients()) {
        if (k.index.degree() >= m) {
            rest.emplace(k, c);
        } else if (std::abs(divisor(k)) <= opt.resonance_tol) {
            normal.emplace(k, c);
        }
    }
    pf.x0 = field.with_coefficients(std::move(normal), std::max(1, m - 1));
    pf.x1 = field.with_coefficients(std::move(rest), out_deg);
    pf.flatness_constant = flatness_constant(pf.x1.coefficients(), m, opt.working_radius);
    (void)info;
    return pf;
}

// Default flatness order for a flow: the smallest admissible order, raised until
// the tail rate of the normalizing integral is positive.
inline int default_flatness_flow(const poly_vector_field &field, double q = 1.1,
                                 double resonance_tol = default_resonance_tol)
{
    const auto info = select_direction(field.eigenvalues(), field.epsilon());
    const auto res = resonances(field.eigenvalues(), complete_resonance_bound(info), resonance_tol);
    int deg_x0 = 1;
    for (const auto &k : res.entries) {
        deg_x0 = std::max(deg_x0, k.index.degree());
    }
    int m = min_flatness_flow(info, deg_x0, q);
    if (info.alpha - info.epsilon - info.alpha / 10.0 <= 0) {
        throw InsufficientFlatness("epsilon too large relative to alpha: no flatness order gives a decaying tail");
    }
    while (flow_tail_rate(info, m) <= 0) {
        ++m;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Maps

inline cplx map_divisor(const std::vector<cplx> &mu, const multi_index &m, std::size_t j)
{
    cplx p = 1.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        for (int e = 0; e < m[k]; ++e) {
            p *= mu[k];
        }
    }
    return p - mu[j];
}

// `map` must have a Jordan linear part diag(mu) + eps N.
inline prepared_map prepare_map(const poly_map &map, int m, const prepare_options &opt = {})
{
    const std::size_t n = map.dim();
    const auto nn = static_cast<Eigen::Index>(n);
    std::vector<cplx> mu(n);
    std::vector<std::size_t> nil;
    double eps = 0.0;
    for (Eigen::Index i = 0; i < nn; ++i) {
        mu[static_cast<std::size_t>(i)] = map.linear()(i, i);
        for (Eigen::Index k = 0; k < nn; ++k) {
            const cplx v = map.linear()(i, k);
            if (k == i || v == cplx{}) {
                continue;
            }
            if (k != i + 1 || v.imag() != 0.0 || v.real() <= 0 || (eps != 0.0 && v.real() != eps)) {
                throw InvalidInput("prepare_map: linear part is not in Jordan form diag(mu) + eps N");
            }
            eps = v.real();
            nil.push_back(static_cast<std::size_t>(i));
        }
    }
    for (const auto &v : mu) {
        if (std::abs(v) == 0.0) {
            throw NonInvertible("prepare_map: zero multiplier");
        }
    }
    for (auto k : nil) {
        if (std::abs(mu[k] - mu[k + 1]) > 1e-12) {
            throw InvalidInput("prepare_map: nilpotent coupling between distinct multipliers");
        }
    }
    if (m < 2) {
        throw InvalidInput("prepare_map: flatness order must be >= 2");
    }
    const int out_deg = opt.output_degree < 0 ? std::max(map.truncation_degree(), m) : opt.output_degree;
    const auto jd = detail::jordan_of(mu, eps, nil);
    auto divisor = [&](const term_key &k) { return map_divisor(mu, k.index, k.component); };

    poly_map change = poly_map::identity(n);
    poly_map current = map;
    for (int d = 2; d < m; ++d) {
        const coeff_table c_deg = truncate_table(current.coefficients(), d, d);
        const auto sol = detail::solve_homological(detail::homological_kind::map, jd, c_deg, d, divisor, opt);
        if (sol.h.empty()) {
            continue;
        }
        const poly_map step(cmat::Identity(nn, nn), sol.h, d);
        current = detail::map_conjugate(step, current, out_deg);
        change = compose_truncate(step, change, out_deg);
    }

    prepared_map pm;
    pm.eigenvalues = mu;
    pm.epsilon = eps;
    pm.nilpotent = nil;
    pm.m = m;
    pm.q = opt.q;
    pm.output_degree = out_deg;
    pm.resonances = enumerate_resonances(n, std::max(2, m - 1), opt.resonance_tol,
                                         [&](const multi_index &mi, std::size_t j) { return map_divisor(mu, mi, j); });
    pm.change = change;
    pm.change_inverse = inverse_truncate(change, std::max(out_deg, 1));
    const poly_map transformed = detail::map_conjugate(change, map, out_deg);
    for (const auto &[k, c] : transformed.coefficients()) {
        if (k.index.degree() >= m) {
            pm.f1.emplace(k, c);
        } else if (std::abs(divisor(k)) <= opt.resonance_tol) {
            pm.f0.emplace(k, c);
        }
    }
    return pm;
}

// ---------------------------------------------------------------------------
// Jordan data from a matrix

struct jordan_result {
    std::vector<cplx> eigenvalues;
    double epsilon = 0.0;
    std::vector<std::size_t> nilpotent;
    // Columns are the new basis vectors: x = similarity * z.
    poly_map similarity;
};

inline jordan_result to_jordan(const cmat &a)
{
    if (a.rows() != a.cols() || a.rows() == 0) {
        throw DimensionMismatch("to_jordan: matrix must be square and non-empty");
    }
    const auto n = a.rows();
    jordan_result r;

    // Explicit upper-bidiagonal input with a constant superdiagonal passes through.
    bool bidiagonal = true;
    double eps = 0.0;
    std::vector<std::size_t> nil;
    for (Eigen::Index i = 0; i < n && bidiagonal; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k == i || a(i, k) == cplx{}) {
                continue;
            }
            const cplx v = a(i, k);
            if (k != i + 1 || v.imag() != 0.0 || v.real() <= 0 || (eps != 0.0 && v.real() != eps)
                || a(i, i) != a(k, k)) {
                bidiagonal = false;
                break;
            }
            eps = v.real();
            nil.push_back(static_cast<std::size_t>(i));
        }
    }
    if (bidiagonal) {
        for (Eigen::Index i = 0; i < n; ++i) {
            r.eigenvalues.push_back(a(i, i));
        }
        r.epsilon = eps;
        r.nilpotent = nil;
        r.similarity = poly_map::identity(static_cast<std::size_t>(n));
        return r;
    }

    Eigen::ComplexEigenSolver<cmat> es(a);
    if (es.info() != Eigen::Success) {
        throw NearlyDefective("to_jordan: eigen-decomposition failed");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        order[static_cast<std::size_t>(i)] = i;
    }
    const cvec ev = es.eigenvalues();
    std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
        if (ev[x].real() != ev[y].real()) {
            return ev[x].real() > ev[y].real();
        }
        return ev[x].imag() > ev[y].imag();
    });
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (std::size_t k = i + 1; k < order.size(); ++k) {
            if (std::abs(ev[order[i]] - ev[order[k]]) <= 1e-8) {
                throw NearlyDefective("to_jordan: eigenvalues closer than 1e-8; supply explicit Jordan form");
            }
        }
    }
    cmat v(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        cvec col = es.eigenvectors().col(order[static_cast<std::size_t>(c)]);
        const double nrm = col.norm();
        // Scale so that the first non-negligible entry equals one.
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(col[i]) > 1e-12 * nrm) {
                col /= col[i];
                break;
            }
        }
        v.col(c) = col;
        r.eigenvalues.push_back(ev[order[static_cast<std::size_t>(c)]]);
    }
    r.similarity = poly_map(v, {}, 1);
    return r;
}

} // namespace pdnorm
