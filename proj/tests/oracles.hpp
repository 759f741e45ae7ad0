#pragma once

// Reference computations used by the tests. None of these call into the
// library's series or resonance code.

#include <boost/rational.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include <pdnorm/algebra.hpp>

namespace oracle
{

using cplx = std::complex<double>;

// Dense 1D power series a_0 + a_1 z + ... truncated at a.size() - 1.
using dense = std::vector<cplx>;

inline dense mul(const dense &a, const dense &b, std::size_t deg)
{
    dense c(deg + 1, 0.0);
    for (std::size_t i = 0; i < a.size() && i <= deg; ++i) {
        for (std::size_t j = 0; j < b.size() && i + j <= deg; ++j) {
            c[i + j] += a[i] * b[j];
        }
    }
    return c;
}

// a(b(z)) by Horner, b(0) = 0.
inline dense compose(const dense &a, const dense &b, std::size_t deg)
{
    dense r(deg + 1, 0.0);
    for (std::size_t k = a.size(); k-- > 0;) {
        r = mul(r, b, deg);
        r[0] += a[k];
    }
    return r;
}

inline dense derivative(const dense &a)
{
    dense d(a.size() > 1 ? a.size() - 1 : 1, 0.0);
    for (std::size_t k = 1; k < a.size(); ++k) {
        d[k - 1] = static_cast<double>(k) * a[k];
    }
    return d;
}

// Compositional inverse of a = z + ..., by undetermined coefficients.
inline dense inverse(const dense &a, std::size_t deg)
{
    dense q(deg + 1, 0.0);
    q[1] = 1.0;
    for (std::size_t d = 2; d <= deg; ++d) {
        const dense c = compose(a, q, deg);
        q[d] -= c[d];
    }
    return q;
}

// dP(P^{-1}) X(P^{-1}) in one variable.
inline dense pushforward(const dense &p, const dense &x, std::size_t deg)
{
    const dense q = inverse(p, deg);
    return mul(compose(derivative(p), q, deg), compose(x, q, deg), deg);
}

// Exhaustive enumeration of (j, m) with 2 <= |m| <= bound and
// |divisor(m, j)| <= tol, by an odometer over [0, bound]^n.
inline std::set<std::pair<std::size_t, std::vector<int>>>
brute_resonances(std::size_t n, int bound, double tol, const std::function<cplx(const std::vector<int> &, std::size_t)> &div)
{
    std::set<std::pair<std::size_t, std::vector<int>>> out;
    std::vector<int> m(n, 0);
    while (true) {
        int deg = 0;
        for (int e : m) {
            deg += e;
        }
        if (deg >= 2 && deg <= bound) {
            for (std::size_t j = 0; j < n; ++j) {
                if (std::abs(div(m, j)) <= tol) {
                    out.emplace(j, m);
                }
            }
        }
        std::size_t k = 0;
        while (k < n && m[k] == bound) {
            m[k] = 0;
            ++k;
        }
        if (k == n) {
            break;
        }
        ++m[k];
    }
    return out;
}

inline cplx additive_divisor(const std::vector<cplx> &lambda, const std::vector<int> &m, std::size_t j)
{
    cplx s = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        s += static_cast<double>(m[k]) * lambda[k];
    }
    return s - lambda[j];
}

inline cplx multiplicative_divisor(const std::vector<cplx> &mu, const std::vector<int> &m, std::size_t j)
{
    cplx p = 1.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        p *= std::pow(mu[k], m[k]);
    }
    return p - mu[j];
}

// Koenigs coefficients in exact rationals for F = mu z + sum a_k z^k.
using rat = boost::rational<long long>;

inline std::vector<rat> koenigs_exact(rat mu, const std::vector<rat> &a, std::size_t deg)
{
    std::vector<rat> f(deg + 1, rat(0));
    f[1] = mu;
    for (std::size_t k = 2; k < a.size() && k <= deg; ++k) {
        f[k] = a[k];
    }
    std::vector<std::vector<rat>> pw(deg + 1, std::vector<rat>(deg + 1, rat(0)));
    pw[1] = f;
    for (std::size_t k = 2; k <= deg; ++k) {
        for (std::size_t i = 1; i <= deg; ++i) {
            for (std::size_t j = 1; i + j <= deg; ++j) {
                pw[k][i + j] += pw[k - 1][i] * f[j];
            }
        }
    }
    std::vector<rat> c(deg + 1, rat(0));
    c[1] = 1;
    for (std::size_t d = 2; d <= deg; ++d) {
        rat s = 0;
        for (std::size_t k = 1; k < d; ++k) {
            s += c[k] * pw[k][d];
        }
        rat mud = 1;
        for (std::size_t e = 0; e < d; ++e) {
            mud *= mu;
        }
        c[d] = s / (mu - mud);
    }
    return c;
}

inline double to_double(const rat &r)
{
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// Closed forms for dz/dt = -z + z^2.
inline cplx quadratic_flow(cplx z, double t)
{
    const double e = std::exp(-t);
    return z * e / (1.0 - z + z * e);
}

inline cplx quadratic_linearizer(cplx z)
{
    return z / (1.0 - z);
}

// Random sparse coefficient table with entries of degree 2..max_deg.
inline pdnorm::coeff_table random_table(std::mt19937_64 &rng, std::size_t n, int max_deg, int terms, double scale = 1.0)
{
    std::uniform_int_distribution<std::size_t> comp(0, n - 1);
    std::uniform_int_distribution<int> dg(2, max_deg);
    std::uniform_real_distribution<double> u(-scale, scale);
    pdnorm::coeff_table t;
    for (int i = 0; i < terms; ++i) {
        const int d = dg(rng);
        std::vector<int> e(n, 0);
        for (int k = 0; k < d; ++k) {
            ++e[comp(rng)];
        }
        t[pdnorm::term_key{comp(rng), pdnorm::multi_index(e)}] += cplx(u(rng), u(rng));
    }
    return pdnorm::detail::canonical(t);
}

} // namespace oracle
