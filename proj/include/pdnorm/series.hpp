#pragma once

// Sparse truncated multivariate complex polynomials. A `series` is one scalar
// polynomial, a `series_vec` is an n-tuple of them (a polynomial self-map or
// vector field written with its linear part). Every routine takes the output
// truncation degree explicitly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include <pdnorm/core.hpp>
#include <pdnorm/multi_index.hpp>

namespace pdnorm
{

using series = std::map<multi_index, cplx>;
using series_vec = std::vector<series>;

namespace poly
{

inline void prune(series &s, double threshold = canonical_zero)
{
    std::erase_if(s, [threshold](const auto &t) { return std::abs(t.second) < threshold; });
}

inline void accumulate(series &s, const multi_index &m, cplx c)
{
    if (c == cplx{}) {
        return;
    }
    s[m] += c;
}

inline series truncated(const series &s, int degree)
{
    series r;
    for (const auto &[m, c] : s) {
        if (m.degree() <= degree) {
            r.emplace(m, c);
        }
    }
    return r;
}

inline series add(const series &a, const series &b, cplx scale_b = 1.0)
{
    series r = a;
    for (const auto &[m, c] : b) {
        accumulate(r, m, scale_b * c);
    }
    prune(r);
    return r;
}

inline series scaled(const series &a, cplx f)
{
    series r;
    for (const auto &[m, c] : a) {
        r.emplace(m, f * c);
    }
    prune(r);
    return r;
}

inline series mul(const series &a, const series &b, int degree)
{
    series r;
    for (const auto &[ma, ca] : a) {
        const int da = ma.degree();
        if (da > degree) {
            break; // graded order: everything after is of higher degree
        }
        for (const auto &[mb, cb] : b) {
            if (da + mb.degree() > degree) {
                break;
            }
            accumulate(r, ma + mb, ca * cb);
        }
    }
    prune(r);
    return r;
}

inline series derivative(const series &a, std::size_t k)
{
    series r;
    for (const auto &[m, c] : a) {
        if (m[k] > 0) {
            accumulate(r, m.decremented(k), c * static_cast<double>(m[k]));
        }
    }
    prune(r);
    return r;
}

inline int min_degree(const series &a)
{
    return a.empty() ? std::numeric_limits<int>::max() : a.begin()->first.degree();
}

// Substitution f(g_1, ..., g_n) truncated at `degree`. Each g_k must vanish at
// the origin, which keeps the truncation exact.
inline series compose(const series &f, const series_vec &g, int degree)
{
    const std::size_t n = g.size();
    for (const auto &gk : g) {
        if (gk.count(multi_index(n)) && std::abs(gk.at(multi_index(n))) > 0) {
            throw InvalidInput("compose: inner map must fix the origin");
        }
    }
    // powers[k][e] = g_k^e truncated; built lazily.
    std::vector<std::vector<series>> powers(n);
    auto power = [&](std::size_t k, int e) -> const series & {
        auto &pk = powers[k];
        if (pk.empty()) {
            series one;
            one.emplace(multi_index(n), 1.0);
            pk.push_back(std::move(one));
        }
        while (static_cast<int>(pk.size()) <= e) {
            pk.push_back(mul(pk.back(), g[k], degree));
        }
        return pk[static_cast<std::size_t>(e)];
    };
    series r;
    for (const auto &[m, c] : f) {
        require_dim(n, m.size(), "compose");
        if (m.degree() > degree) {
            break;
        }
        series term;
        term.emplace(multi_index(n), c);
        for (std::size_t k = 0; k < n && !term.empty(); ++k) {
            if (m[k] > 0) {
                term = mul(term, power(k, m[k]), degree);
            }
        }
        for (const auto &[mt, ct] : term) {
            accumulate(r, mt, ct);
        }
    }
    prune(r);
    return r;
}

inline series_vec compose(const series_vec &f, const series_vec &g, int degree)
{
    series_vec r;
    r.reserve(f.size());
    for (const auto &fj : f) {
        r.push_back(compose(fj, g, degree));
    }
    return r;
}

inline series_vec identity(std::size_t n)
{
    series_vec r(n);
    for (std::size_t k = 0; k < n; ++k) {
        r[k].emplace(multi_index::unit(n, k), 1.0);
    }
    return r;
}

// Table of z_k^e for e <= max_exp.
class power_table
{
public:
    power_table(const cvec &z, int max_exp) : n_(static_cast<std::size_t>(z.size())), stride_(max_exp + 1)
    {
        data_.resize(n_ * static_cast<std::size_t>(stride_));
        for (std::size_t k = 0; k < n_; ++k) {
            cplx p = 1.0;
            for (int e = 0; e <= max_exp; ++e) {
                data_[k * stride_ + e] = p;
                p *= z[static_cast<Eigen::Index>(k)];
            }
        }
    }
    cplx operator()(std::size_t k, int e) const
    {
        return data_[k * stride_ + static_cast<std::size_t>(e)];
    }
    cplx monomial(const multi_index &m) const
    {
        cplx v = 1.0;
        for (std::size_t k = 0; k < n_; ++k) {
            if (m[k]) {
                v *= (*this)(k, m[k]);
            }
        }
        return v;
    }

private:
    std::size_t n_;
    std::size_t stride_;
    std::vector<cplx> data_;
};

inline int max_exponent(const series &s)
{
    int e = 0;
    for (const auto &[m, c] : s) {
        for (int v : m.exponents()) {
            e = std::max(e, v);
        }
    }
    return e;
}

inline cplx eval(const series &s, const power_table &pw)
{
    cplx v = 0.0;
    for (const auto &[m, c] : s) {
        v += c * pw.monomial(m);
    }
    return v;
}

} // namespace poly
} // namespace pdnorm
