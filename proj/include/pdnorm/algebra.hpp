#pragma once

// Polynomial vector fields with Jordan-structured linear part, polynomial
// self-maps, and the truncated composition / push-forward / inversion that the
// normal-form machinery is built on.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <pdnorm/core.hpp>
#include <pdnorm/multi_index.hpp>
#include <pdnorm/series.hpp>

namespace pdnorm
{

// Key of one nonlinear coefficient: component j (0-based) and exponent m.
struct term_key {
    std::size_t component;
    multi_index index;

    std::strong_ordering operator<=>(const term_key &o) const
    {
        if (auto c = component <=> o.component; c != 0) {
            return c;
        }
        return index <=> o.index;
    }
    bool operator==(const term_key &) const = default;
};

using coeff_table = std::map<term_key, cplx>;

inline constexpr int infinite_order = std::numeric_limits<int>::max();

namespace detail
{

inline int check_table(const coeff_table &t, std::size_t n, int truncation_degree, const char *who)
{
    int max_exp = 0;
    for (const auto &[k, c] : t) {
        require_dim(n, k.index.size(), who);
        if (k.component >= n) {
            throw DimensionMismatch(std::string(who) + ": component out of range");
        }
        const int d = k.index.degree();
        if (d < 2) {
            throw InvalidInput(std::string(who) + ": nonlinear table holds a term of degree < 2");
        }
        if (d > truncation_degree) {
            throw InvalidInput(std::string(who) + ": term of degree " + std::to_string(d)
                               + " exceeds truncation degree " + std::to_string(truncation_degree));
        }
        for (int e : k.index.exponents()) {
            max_exp = std::max(max_exp, e);
        }
    }
    return max_exp;
}

inline int max_degree(const coeff_table &t)
{
    int d = 1;
    for (const auto &[k, c] : t) {
        d = std::max(d, k.index.degree());
    }
    return d;
}

inline coeff_table canonical(coeff_table t)
{
    std::erase_if(t, [](const auto &e) { return std::abs(e.second) < canonical_zero; });
    return t;
}

inline cvec eval_table(const coeff_table &t, std::size_t n, const cvec &z, int max_exp)
{
    cvec out = cvec::Zero(static_cast<Eigen::Index>(n));
    if (t.empty()) {
        return out;
    }
    const poly::power_table pw(z, max_exp);
    for (const auto &[k, c] : t) {
        out[static_cast<Eigen::Index>(k.component)] += c * pw.monomial(k.index);
    }
    return out;
}

inline cmat jacobian_table(const coeff_table &t, std::size_t n, const cvec &z, int max_exp)
{
    const auto nn = static_cast<Eigen::Index>(n);
    cmat out = cmat::Zero(nn, nn);
    if (t.empty()) {
        return out;
    }
    const poly::power_table pw(z, max_exp);
    for (const auto &[k, c] : t) {
        for (std::size_t v = 0; v < n; ++v) {
            const int e = k.index[v];
            if (e == 0) {
                continue;
            }
            cplx d = c * static_cast<double>(e);
            for (std::size_t u = 0; u < n; ++u) {
                const int eu = (u == v) ? e - 1 : k.index[u];
                if (eu) {
                    d *= pw(u, eu);
                }
            }
            out(static_cast<Eigen::Index>(k.component), static_cast<Eigen::Index>(v)) += d;
        }
    }
    return out;
}

inline series_vec table_to_series(const coeff_table &t, std::size_t n)
{
    series_vec s(n);
    for (const auto &[k, c] : t) {
        s[k.component].emplace(k.index, c);
    }
    return s;
}

// Nonlinear part (degrees 2..degree) of a series tuple as a table.
inline coeff_table series_to_table(const series_vec &s, int degree)
{
    coeff_table t;
    for (std::size_t j = 0; j < s.size(); ++j) {
        for (const auto &[m, c] : s[j]) {
            const int d = m.degree();
            if (d >= 2 && d <= degree && std::abs(c) >= canonical_zero) {
                t.emplace(term_key{j, m}, c);
            }
        }
    }
    return t;
}

} // namespace detail

// Sum over the nonlinear terms of |c| r^{|m|}: a bound for ||N(z)|| on ||z|| <= r.
inline double coefficient_bound(const coeff_table &t, double r)
{
    double s = 0.0;
    for (const auto &[k, c] : t) {
        s += std::abs(c) * std::pow(r, k.index.degree());
    }
    return s;
}

// Vector field X(z) = (S + eps N) z + sum c_{m,j} z^m e_j.
class poly_vector_field
{
public:
    poly_vector_field() = default;

    // `nilpotent` lists 0-based k with N(k, k+1) = 1; the two eigenvalues of
    // such a pair must coincide. A negative truncation degree means "as stored".
    poly_vector_field(std::vector<cplx> eigenvalues, double epsilon, std::vector<std::size_t> nilpotent,
                      coeff_table coefficients, int truncation_degree = -1)
        : n_(eigenvalues.size()), lambda_(std::move(eigenvalues)), epsilon_(epsilon),
          nilpotent_(std::move(nilpotent)), coeffs_(detail::canonical(std::move(coefficients)))
    {
        if (n_ == 0) {
            throw InvalidInput("vector field: dimension must be positive");
        }
        if (epsilon_ < 0 || !std::isfinite(epsilon_)) {
            throw InvalidInput("vector field: epsilon must be finite and non-negative");
        }
        std::sort(nilpotent_.begin(), nilpotent_.end());
        nilpotent_.erase(std::unique(nilpotent_.begin(), nilpotent_.end()), nilpotent_.end());
        for (auto k : nilpotent_) {
            if (k + 1 >= n_) {
                throw InvalidInput("vector field: nilpotent position out of range");
            }
            if (std::abs(lambda_[k] - lambda_[k + 1]) > 1e-12) {
                throw InvalidInput("vector field: nilpotent coupling between distinct eigenvalues");
            }
        }
        trunc_ = truncation_degree < 0 ? detail::max_degree(coeffs_) : truncation_degree;
        max_exp_ = detail::check_table(coeffs_, n_, trunc_, "vector field");
    }

    std::size_t dim() const noexcept
    {
        return n_;
    }
    const std::vector<cplx> &eigenvalues() const noexcept
    {
        return lambda_;
    }
    double epsilon() const noexcept
    {
        return epsilon_;
    }
    const std::vector<std::size_t> &nilpotent() const noexcept
    {
        return nilpotent_;
    }
    const coeff_table &coefficients() const noexcept
    {
        return coeffs_;
    }
    int truncation_degree() const noexcept
    {
        return trunc_;
    }
    bool is_linear() const noexcept
    {
        return coeffs_.empty();
    }

    cmat linear() const
    {
        const auto nn = static_cast<Eigen::Index>(n_);
        cmat a = cmat::Zero(nn, nn);
        for (std::size_t k = 0; k < n_; ++k) {
            a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = lambda_[k];
        }
        for (auto k : nilpotent_) {
            a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k + 1)) = epsilon_;
        }
        return a;
    }

    // Same linear part, different nonlinear table.
    poly_vector_field with_coefficients(coeff_table t, int truncation_degree = -1) const
    {
        return poly_vector_field(lambda_, epsilon_, nilpotent_, std::move(t), truncation_degree);
    }

    cvec apply_linear(const cvec &z) const
    {
        cvec out(z.size());
        for (std::size_t k = 0; k < n_; ++k) {
            out[static_cast<Eigen::Index>(k)] = lambda_[k] * z[static_cast<Eigen::Index>(k)];
        }
        for (auto k : nilpotent_) {
            out[static_cast<Eigen::Index>(k)] += epsilon_ * z[static_cast<Eigen::Index>(k + 1)];
        }
        return out;
    }

    cvec eval_nonlinear(const cvec &z) const
    {
        return detail::eval_table(coeffs_, n_, z, max_exp_);
    }

    cmat jacobian_nonlinear(const cvec &z) const
    {
        return detail::jacobian_table(coeffs_, n_, z, max_exp_);
    }

    // Full field as a series tuple, linear part included.
    series_vec to_series() const
    {
        series_vec s = detail::table_to_series(coeffs_, n_);
        for (std::size_t k = 0; k < n_; ++k) {
            poly::accumulate(s[k], multi_index::unit(n_, k), lambda_[k]);
        }
        for (auto k : nilpotent_) {
            poly::accumulate(s[k], multi_index::unit(n_, k + 1), epsilon_);
        }
        for (auto &sk : s) {
            poly::prune(sk);
        }
        return s;
    }

    bool operator==(const poly_vector_field &) const = default;

private:
    std::size_t n_ = 0;
    std::vector<cplx> lambda_;
    double epsilon_ = 0.0;
    std::vector<std::size_t> nilpotent_;
    coeff_table coeffs_;
    int trunc_ = 1;
    int max_exp_ = 0;
};

// Polynomial self-map F(z) = M z + sum c_{m,j} z^m e_j fixing the origin.
class poly_map
{
public:
    poly_map() = default;

    poly_map(cmat linear, coeff_table coefficients, int truncation_degree = -1)
        : n_(static_cast<std::size_t>(linear.rows())), linear_(std::move(linear)),
          coeffs_(detail::canonical(std::move(coefficients)))
    {
        if (linear_.rows() != linear_.cols() || n_ == 0) {
            throw DimensionMismatch("poly_map: linear part must be a non-empty square matrix");
        }
        trunc_ = truncation_degree < 0 ? detail::max_degree(coeffs_) : truncation_degree;
        max_exp_ = detail::check_table(coeffs_, n_, trunc_, "poly_map");
    }

    static poly_map identity(std::size_t n)
    {
        const auto nn = static_cast<Eigen::Index>(n);
        return poly_map(cmat::Identity(nn, nn), {}, 1);
    }

    // Linear part diag(mu) + eps N in Jordan form.
    static poly_map jordan(const std::vector<cplx> &mu, double epsilon, const std::vector<std::size_t> &nilpotent,
                           coeff_table coefficients, int truncation_degree = -1)
    {
        const auto nn = static_cast<Eigen::Index>(mu.size());
        cmat a = cmat::Zero(nn, nn);
        for (std::size_t k = 0; k < mu.size(); ++k) {
            a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = mu[k];
        }
        for (auto k : nilpotent) {
            if (k + 1 >= mu.size()) {
                throw InvalidInput("poly_map: nilpotent position out of range");
            }
            a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k + 1)) = epsilon;
        }
        return poly_map(std::move(a), std::move(coefficients), truncation_degree);
    }

    // Build from a series tuple: degree-1 block becomes the matrix, degrees
    // 2..degree the table. Constant terms are rejected.
    static poly_map from_series(const series_vec &s, int degree)
    {
        const std::size_t n = s.size();
        const auto nn = static_cast<Eigen::Index>(n);
        cmat lin = cmat::Zero(nn, nn);
        for (std::size_t j = 0; j < n; ++j) {
            for (const auto &[m, c] : s[j]) {
                if (m.degree() == 0 && std::abs(c) > 0) {
                    throw InvalidInput("poly_map: map must fix the origin");
                }
                if (m.degree() == 1) {
                    for (std::size_t k = 0; k < n; ++k) {
                        if (m[k] == 1) {
                            lin(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = c;
                        }
                    }
                }
            }
        }
        return poly_map(std::move(lin), detail::series_to_table(s, degree), std::max(degree, 1));
    }

    std::size_t dim() const noexcept
    {
        return n_;
    }
    const cmat &linear() const noexcept
    {
        return linear_;
    }
    const coeff_table &coefficients() const noexcept
    {
        return coeffs_;
    }
    int truncation_degree() const noexcept
    {
        return trunc_;
    }
    bool is_linear() const noexcept
    {
        return coeffs_.empty();
    }

    bool is_tangent_to_identity(double tol = 1e-12) const
    {
        const auto nn = static_cast<Eigen::Index>(n_);
        return (linear_ - cmat::Identity(nn, nn)).cwiseAbs().maxCoeff() <= tol;
    }

    cvec eval_nonlinear(const cvec &z) const
    {
        return detail::eval_table(coeffs_, n_, z, max_exp_);
    }
    cmat jacobian_nonlinear(const cvec &z) const
    {
        return detail::jacobian_table(coeffs_, n_, z, max_exp_);
    }

    series_vec to_series() const
    {
        series_vec s = detail::table_to_series(coeffs_, n_);
        for (std::size_t j = 0; j < n_; ++j) {
            for (std::size_t k = 0; k < n_; ++k) {
                poly::accumulate(s[j], multi_index::unit(n_, k),
                                 linear_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
            }
            poly::prune(s[j]);
        }
        return s;
    }

    bool operator==(const poly_map &o) const
    {
        return n_ == o.n_ && trunc_ == o.trunc_ && linear_ == o.linear_ && coeffs_ == o.coeffs_;
    }

private:
    std::size_t n_ = 0;
    cmat linear_;
    coeff_table coeffs_;
    int trunc_ = 1;
    int max_exp_ = 0;
};

// ---------------------------------------------------------------------------
// Operations

inline cvec eval(const poly_vector_field &f, const cvec &z)
{
    require_dim(f.dim(), static_cast<std::size_t>(z.size()), "eval");
    return f.apply_linear(z) + f.eval_nonlinear(z);
}

inline cvec eval(const poly_map &f, const cvec &z)
{
    require_dim(f.dim(), static_cast<std::size_t>(z.size()), "eval");
    return f.linear() * z + f.eval_nonlinear(z);
}

inline cmat jacobian(const poly_vector_field &f, const cvec &z)
{
    require_dim(f.dim(), static_cast<std::size_t>(z.size()), "jacobian");
    return f.linear() + f.jacobian_nonlinear(z);
}

inline cmat jacobian(const poly_map &f, const cvec &z)
{
    require_dim(f.dim(), static_cast<std::size_t>(z.size()), "jacobian");
    return f.linear() + f.jacobian_nonlinear(z);
}

// Taylor expansion of outer o inner, all terms of degree > `degree` dropped.
inline poly_map compose_truncate(const poly_map &outer, const poly_map &inner, int degree)
{
    require_dim(outer.dim(), inner.dim(), "compose_truncate");
    return poly_map::from_series(poly::compose(outer.to_series(), inner.to_series(), degree), degree);
}

// Truncated compositional inverse of a tangent-to-identity map. Writing
// P = id + p, the fixed point Q = id - p o Q gains one correct degree per pass.
inline poly_map inverse_truncate(const poly_map &change, int degree)
{
    const std::size_t n = change.dim();
    const auto nn = static_cast<Eigen::Index>(n);
    if (std::abs(change.linear().determinant()) < 1e-14) {
        throw NonInvertible("inverse_truncate: linear part is singular");
    }
    if (!change.is_tangent_to_identity()) {
        throw NotTangentToIdentity("inverse_truncate: linear part of the change is not the identity");
    }
    const series_vec p = detail::table_to_series(change.coefficients(), n);
    series_vec q = poly::identity(n);
    for (int pass = 2; pass <= degree; ++pass) {
        series_vec pq = poly::compose(p, q, degree);
        series_vec next = poly::identity(n);
        for (std::size_t j = 0; j < n; ++j) {
            next[j] = poly::add(next[j], pq[j], -1.0);
        }
        q = std::move(next);
    }
    return poly_map(cmat::Identity(nn, nn), detail::series_to_table(q, degree), std::max(degree, 1));
}

// (P_* X)(w) = dP(P^{-1}(w)) X(P^{-1}(w)), truncated at `degree`. The change
// must be tangent to the identity, so the linear part of X is preserved.
inline poly_vector_field pushforward_truncate(const poly_map &change, const poly_vector_field &field, int degree)
{
    require_dim(field.dim(), change.dim(), "pushforward_truncate");
    const std::size_t n = field.dim();
    const series_vec q = inverse_truncate(change, degree).to_series();
    const series_vec xq = poly::compose(field.to_series(), q, degree);
    const series_vec pser = change.to_series();
    series_vec out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const series_vec dpk = [&] {
            series_vec col(n);
            for (std::size_t j = 0; j < n; ++j) {
                col[j] = poly::derivative(pser[j], k);
            }
            return col;
        }();
        for (std::size_t j = 0; j < n; ++j) {
            if (dpk[j].empty() || xq[k].empty()) {
                continue;
            }
            const series dpq = poly::compose(dpk[j], q, degree - 1);
            out[j] = poly::add(out[j], poly::mul(dpq, xq[k], degree));
        }
    }
    return field.with_coefficients(detail::series_to_table(out, degree), std::max(degree, 1));
}

// Smallest total degree carrying a nonlinear coefficient; infinite_order if none.
inline int flatness_order(const coeff_table &t)
{
    int d = infinite_order;
    for (const auto &[k, c] : t) {
        d = std::min(d, k.index.degree());
    }
    return d;
}

inline int flatness_order(const poly_vector_field &f)
{
    return flatness_order(f.coefficients());
}

inline int flatness_order(const poly_map &f)
{
    return flatness_order(f.coefficients());
}

// Coefficient-wise difference a - b, canonical.
inline coeff_table subtract(const coeff_table &a, const coeff_table &b)
{
    coeff_table r = a;
    for (const auto &[k, c] : b) {
        r[k] -= c;
    }
    return detail::canonical(std::move(r));
}

inline coeff_table add(const coeff_table &a, const coeff_table &b)
{
    coeff_table r = a;
    for (const auto &[k, c] : b) {
        r[k] += c;
    }
    return detail::canonical(std::move(r));
}

inline coeff_table truncate_table(const coeff_table &t, int min_degree, int max_degree)
{
    coeff_table r;
    for (const auto &[k, c] : t) {
        const int d = k.index.degree();
        if (d >= min_degree && d <= max_degree) {
            r.emplace(k, c);
        }
    }
    return r;
}

inline int max_degree(const coeff_table &t)
{
    return detail::max_degree(t);
}

} // namespace pdnorm
