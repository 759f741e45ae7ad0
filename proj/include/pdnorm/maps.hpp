#pragma once

// Discrete-time linearization of a contracting map F = A z + F1:
// L(z) = z + sum_l A^{-(l+1)} F1(F^l(z)), its contraction radius, and the
// 1D Koenigs recursion used as a cross-check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <pdnorm/algebra.hpp>
#include <pdnorm/core.hpp>
#include <pdnorm/prepare.hpp>
#include <pdnorm/sampling.hpp>
#include <pdnorm/spectrum.hpp>
#include <pdnorm/voc.hpp>

namespace pdnorm
{

struct map_poincare_result {
    bool contracting = false;
    std::string hint;
};

inline map_poincare_result check_poincare_map(const std::vector<cplx> &mu)
{
    if (mu.empty()) {
        throw InvalidInput("check_poincare_map: empty spectrum");
    }
    double lo = infinity, hi = 0.0;
    for (const auto &v : mu) {
        const double a = std::abs(v);
        if (a == 0.0) {
            throw NonInvertible("check_poincare_map: zero multiplier");
        }
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    map_poincare_result r;
    if (hi < 1.0) {
        r.contracting = true;
        return r;
    }
    if (lo > 1.0) {
        r.hint = "all multipliers lie outside the unit disc; linearize the inverse map";
        return r;
    }
    throw MixedSpectrum("check_poincare_map: multipliers on both sides of (or on) the unit circle");
}

struct map_spec {
    std::vector<cplx> mu;
    double epsilon = 0.0;
    std::vector<std::size_t> nilpotent;
    coeff_table f1_big; // F1
    coeff_table f1;     // A^{-1} F1
    double rho_star = 0.0; // min |mu_j|
    double rho_sup = 0.0;  // max |mu_j|
    int m = 2;             // flatness order used for the tail
};

namespace detail
{

inline cmat jordan_matrix(const std::vector<cplx> &mu, double eps, const std::vector<std::size_t> &nil)
{
    return poly_map::jordan(mu, eps, nil, {}, 1).linear();
}

// Solves A x = y for upper-bidiagonal A by back-substitution.
inline cvec jordan_solve(const std::vector<cplx> &mu, double eps, const std::vector<bool> &coupled, cvec y)
{
    const auto n = static_cast<Eigen::Index>(mu.size());
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        if (coupled[static_cast<std::size_t>(i)]) {
            y[i] -= eps * y[i + 1];
        }
        y[i] /= mu[static_cast<std::size_t>(i)];
    }
    return y;
}

inline double spectral_norm(const cmat &m)
{
    Eigen::JacobiSVD<cmat> svd(m);
    return svd.singularValues()(0);
}

} // namespace detail

inline map_spec make_map_spec(const std::vector<cplx> &mu, double epsilon, const std::vector<std::size_t> &nilpotent,
                              const coeff_table &f1_big, int m = -1)
{
    const auto pr = check_poincare_map(mu);
    if (!pr.contracting) {
        throw InvalidInput("map spectrum is not contracting: " + pr.hint);
    }
    map_spec s;
    s.mu = mu;
    s.epsilon = epsilon;
    s.nilpotent = nilpotent;
    s.f1_big = f1_big;
    s.rho_star = infinity;
    for (const auto &v : mu) {
        s.rho_star = std::min(s.rho_star, std::abs(v));
        s.rho_sup = std::max(s.rho_sup, std::abs(v));
    }
    const int fo = flatness_order(f1_big);
    s.m = m > 0 ? m : (fo == infinite_order ? 2 : fo);
    if (fo != infinite_order && fo < s.m) {
        throw InvalidInput("map spec: F1 has terms below the declared flatness order");
    }
    std::vector<bool> coupled(mu.size(), false);
    for (auto k : nilpotent) {
        coupled.at(k) = true;
    }
    // A^{-1} F1 coefficientwise: A^{-1} acts on the component index only.
    const auto n = static_cast<Eigen::Index>(mu.size());
    std::map<multi_index, cvec> by_index;
    for (const auto &[k, c] : f1_big) {
        auto [it, fresh] = by_index.try_emplace(k.index, cvec::Zero(n));
        it->second[static_cast<Eigen::Index>(k.component)] += c;
    }
    for (const auto &[idx, v] : by_index) {
        const cvec w = detail::jordan_solve(mu, epsilon, coupled, v);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (std::abs(w[j]) >= canonical_zero) {
                s.f1.emplace(term_key{static_cast<std::size_t>(j), idx}, w[j]);
            }
        }
    }
    return s;
}

inline map_spec make_map_spec(const prepared_map &pm)
{
    if (pm.f0_nonlinear()) {
        throw ResonantMap("map has resonant terms below the flatness order; the series needs a non-resonant F0");
    }
    return make_map_spec(pm.eigenvalues, pm.epsilon, pm.nilpotent, pm.f1, pm.m);
}

inline double default_map_delta(const map_spec &s)
{
    return (1.0 - s.rho_sup - s.epsilon) / 10.0;
}

// Largest R <= cap with sum |c| R^{|m|-1} <= delta, so that
// ||F(z)|| <= (rho* + eps + delta) ||z|| on ||z|| <= R.
inline double r_delta(const map_spec &s, double delta, double cap = 10.0, double rel_tol = 1e-13)
{
    if (!(delta > 0)) {
        throw InvalidInput("r_delta: delta must be positive");
    }
    if (s.rho_sup + s.epsilon + delta >= 1.0) {
        throw ContractionImpossible("r_delta: rho* + eps + delta = " + num_str(s.rho_sup + s.epsilon + delta)
                                    + " >= 1");
    }
    auto g = [&](double r) { return coefficient_bound(s.f1_big, r) / r; };
    if (s.f1_big.empty() || g(cap) <= delta) {
        return cap;
    }
    double lo = 0.0, hi = cap;
    while (hi - lo > rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) <= delta ? lo : hi) = mid;
    }
    return lo;
}

inline double map_theta(const map_spec &s, double delta)
{
    return std::pow(s.rho_sup + s.epsilon + delta, s.m) / s.rho_star;
}

inline int min_flatness_map(const std::vector<cplx> &mu, double epsilon, double q)
{
    if (!(q > 1.0)) {
        throw InvalidInput("min_flatness_map: q must exceed 1");
    }
    double lo = infinity, hi = 0.0;
    for (const auto &v : mu) {
        lo = std::min(lo, std::abs(v));
        hi = std::max(hi, std::abs(v));
    }
    if (hi + epsilon >= 1.0) {
        throw ContractionImpossible("min_flatness_map: max |mu| + eps >= 1");
    }
    if (lo == 0.0) {
        throw NonInvertible("min_flatness_map: zero multiplier");
    }
    const double bound = q * std::abs(std::log(lo)) / std::abs(std::log(hi + epsilon));
    return static_cast<int>(std::floor(bound)) + 1;
}

inline resonance_set resonances_map(const std::vector<cplx> &mu, int degree_bound, double tol = default_resonance_tol)
{
    return enumerate_resonances(mu.size(), degree_bound, tol,
                                [&](const multi_index &m, std::size_t j) { return map_divisor(mu, m, j); });
}

// Degree bound past which no multiplicative resonance can occur:
// |mu^m| <= (rho*)^{|m|} < rho_* once |m| > log rho_* / log rho*.
inline int complete_resonance_bound_map(const std::vector<cplx> &mu)
{
    double lo = infinity, hi = 0.0;
    for (const auto &v : mu) {
        lo = std::min(lo, std::abs(v));
        hi = std::max(hi, std::abs(v));
    }
    if (!(hi < 1.0) || lo == 0.0) {
        throw InvalidInput("complete_resonance_bound_map: multipliers must satisfy 0 < |mu| < 1");
    }
    return std::max(2, static_cast<int>(std::floor(std::log(lo) / std::log(hi))) + 1);
}

// Coefficients c_0..c_degree (c_0 = 0, c_1 = 1) of the tangent-to-identity L
// with mu L(z) = L(F(z)), F(z) = mu z + sum_{k>=2} f[k] z^k.
inline std::vector<cplx> koenigs_coefficients(cplx mu, const std::vector<cplx> &f, int degree)
{
    if (std::abs(mu) == 0.0 || std::abs(mu) >= 1.0) {
        throw InvalidInput("koenigs_coefficients: need 0 < |mu| < 1");
    }
    const auto d = static_cast<std::size_t>(std::max(degree, 1));
    std::vector<cplx> F(d + 1, cplx{});
    F[1] = mu;
    for (std::size_t k = 2; k < f.size() && k <= d; ++k) {
        F[k] = f[k];
    }
    // powers[k] = F^k truncated at degree d
    std::vector<std::vector<cplx>> powers(d + 1, std::vector<cplx>(d + 1, cplx{}));
    powers[1] = F;
    for (std::size_t k = 2; k <= d; ++k) {
        for (std::size_t a = 1; a <= d; ++a) {
            for (std::size_t b = 1; a + b <= d; ++b) {
                powers[k][a + b] += powers[k - 1][a] * F[b];
            }
        }
    }
    std::vector<cplx> c(d + 1, cplx{});
    c[1] = 1.0;
    for (std::size_t n = 2; n <= d; ++n) {
        cplx rhs{};
        for (std::size_t k = 1; k < n; ++k) {
            rhs += c[k] * powers[k][n];
        }
        c[n] = rhs / (mu - std::pow(mu, static_cast<int>(n)));
    }
    c.resize(static_cast<std::size_t>(degree) + 1);
    return c;
}

struct map_series_state {
    std::size_t l = 0;
    cvec partial;
    double delta_norm = 0.0;
    double theta = 0.0;
    double r_delta = 0.0;
};

struct map_config {
    double delta = -1.0; // < 0: (1 - rho* - eps) / 10
    double radius_cap = 10.0;
    std::size_t l_max = 10'000;
};

class map_linearizer
{
public:
    map_linearizer(map_spec spec, double tol, map_config cfg = {}) : s_(std::move(spec)), tol_(tol), cfg_(cfg)
    {
        if (!(tol > 0)) {
            throw InvalidInput("map_linearizer: tolerance must be positive");
        }
        delta_ = cfg_.delta < 0 ? default_map_delta(s_) : cfg_.delta;
        rho_ = s_.rho_sup + s_.epsilon + delta_;
        r_delta_ = r_delta(s_, delta_, cfg_.radius_cap);
        theta_ = map_theta(s_, delta_);
        coupled_.assign(s_.mu.size(), false);
        for (auto k : s_.nilpotent) {
            coupled_.at(k) = true;
        }
        const auto n = static_cast<Eigen::Index>(s_.mu.size());
        a_ = detail::jordan_matrix(s_.mu, s_.epsilon, s_.nilpotent);
        a_inv_ = a_.triangularView<Eigen::Upper>().solve(cmat::Identity(n, n));
        f_ = poly_map(a_, s_.f1_big);
        if (!s_.f1_big.empty()) {
            tail_sum_ = tail_series();
        }
    }

    const map_spec &spec() const noexcept
    {
        return s_;
    }
    double delta() const noexcept
    {
        return delta_;
    }
    double tol() const noexcept
    {
        return tol_;
    }
    const map_config &config() const noexcept
    {
        return cfg_;
    }
    double radius() const noexcept
    {
        return r_delta_;
    }
    double theta() const noexcept
    {
        return theta_;
    }
    const cmat &linear() const noexcept
    {
        return a_;
    }
    const poly_map &map() const noexcept
    {
        return f_;
    }

    linearization_sample sample(const cvec &z, std::vector<map_series_state> *trace = nullptr) const
    {
        require_dim(s_.mu.size(), static_cast<std::size_t>(z.size()), "linearize_map_point");
        linearization_sample out;
        out.z = z;
        out.value = z;
        out.increment = cvec::Zero(z.size());
        if (s_.f1_big.empty()) {
            return out;
        }
        const double bound = r_delta_ * (1.0 + 1e-12);
        cvec x = z;
        cmat power = a_inv_; // A^{-(l+1)} / exp(log_norm) for the tail estimate
        double log_norm = 0.0;
        for (std::size_t l = 0;; ++l) {
            if (l >= cfg_.l_max) {
                throw NoConvergence("map series: more than " + std::to_string(cfg_.l_max) + " terms");
            }
            if (!(x.norm() <= bound)) {
                throw Escape("map series: iterate " + std::to_string(l) + " left the contraction ball R_delta = "
                             + num_str(r_delta_));
            }
            cvec d = eval_table(x);
            for (std::size_t k = 0; k <= l; ++k) {
                d = detail::jordan_solve(s_.mu, s_.epsilon, coupled_, std::move(d));
            }
            out.increment += d;
            out.value = z + out.increment;
            out.increments.push_back(d.norm());
            const double pn = detail::spectral_norm(power);
            log_norm += std::log(pn);
            power /= pn;
            const double b = coefficient_bound(s_.f1_big, x.norm());
            const double tail = b == 0.0 ? 0.0 : std::exp(std::log(b) + log_norm) * tail_sum_;
            if (trace) {
                trace->push_back(map_series_state{l, out.value, out.increments.back(), theta_, r_delta_});
            }
            x = eval(f_, x);
            power = power * a_inv_;
            if (tail < tol_) {
                out.tail_bound = tail;
                out.steps = l + 1;
                out.t_reached = static_cast<double>(l + 1);
                return out;
            }
        }
    }

    cvec operator()(const cvec &z) const
    {
        return sample(z).value;
    }

private:
    cvec eval_table(const cvec &x) const
    {
        return f_.eval_nonlinear(x);
    }

    // sum_{k>=1} ||A^{-k}|| rho^{k m}, summed until the terms are negligible.
    double tail_series() const
    {
        if (theta_ >= 1.0) {
            throw InsufficientFlatness("map series: theta = (rho* + eps + delta)^m / rho_* = " + num_str(theta_)
                                       + " >= 1; increase m");
        }
        cmat power = a_inv_;
        double log_norm = 0.0, sum = 0.0, prev = infinity;
        const double log_rho_m = static_cast<double>(s_.m) * std::log(rho_);
        for (std::size_t k = 1; k < 1'000'000; ++k) {
            const double pn = detail::spectral_norm(power);
            log_norm += std::log(pn);
            power /= pn;
            const double term = std::exp(log_norm + static_cast<double>(k) * log_rho_m);
            sum += term;
            if (term < prev && term < 1e-17 * sum) {
                return sum;
            }
            prev = term;
            power = power * a_inv_;
        }
        throw InsufficientFlatness("map series: tail sum does not converge; increase m");
    }

    map_spec s_;
    double tol_;
    map_config cfg_;
    double delta_ = 0.0;
    double rho_ = 0.0;
    double r_delta_ = 0.0;
    double theta_ = 0.0;
    double tail_sum_ = 0.0;
    std::vector<bool> coupled_;
    cmat a_, a_inv_;
    poly_map f_;
};

inline linearization_sample linearize_map_point(const prepared_map &pm, const cvec &z, double tol,
                                                const map_config &cfg = {})
{
    return map_linearizer(make_map_spec(pm), tol, cfg).sample(z);
}

// max ||A L(z) - L(F(z))|| over the samples.
inline double map_conjugacy_residual(const map_linearizer &L, const std::vector<cvec> &samples)
{
    std::vector<double> r(samples.size(), 0.0);
    parallel_for(samples.size(), [&](std::size_t i) {
        const cvec &z = samples[i];
        r[i] = (L.linear() * L(z) - L(eval(L.map(), z))).norm();
    });
    return r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
}

// The DFT divides point errors by r^d, so the series is summed to tol * r^d
// and the increment is used without re-subtracting z.
inline taylor_table map_taylor_coefficients(const map_linearizer &L, double r, int d, bool check_aliasing = true)
{
    const map_linearizer fine(L.spec(), std::max(L.tol() * std::pow(r, d), 1e-300), L.config());
    return extract_taylor(
        L.spec().mu.size(), [&](const cvec &z) -> cvec { return fine.sample(z).increment; }, r, d, check_aliasing);
}

} // namespace pdnorm
