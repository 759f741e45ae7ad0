#pragma once

// Spectral geometry of the linear part: the Poincare test, the choice of the
// integration ray, resonance enumeration, flatness thresholds and the
// transversality radius of the spheres ||z|| = R.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include <pdnorm/algebra.hpp>
#include <pdnorm/core.hpp>
#include <pdnorm/sampling.hpp>

namespace pdnorm
{

struct spectrum_info {
    std::vector<cplx> eigenvalues;
    double epsilon = 0.0;
    // Unit complex time direction; Re(c lambda_j) <= -alpha for all j.
    cplx direction{1.0, 0.0};
    double alpha = 0.0;
    double beta = 0.0;

    double margin() const noexcept
    {
        return alpha;
    }
};

struct poincare_result {
    bool poincare = false;
    // Separating direction (valid when poincare == true).
    cplx direction{1.0, 0.0};
    // Convex weights with sum w_j lambda_j ~ 0 (valid when poincare == false).
    std::vector<double> witness;
};

struct resonance_set {
    std::vector<term_key> entries;
    int degree_bound = 2;
    double tol = 1e-9;

    bool contains(const term_key &k) const
    {
        return std::find(entries.begin(), entries.end(), k) != entries.end();
    }
};

struct radius_report {
    double certified_lower = 0.0;
    double sampled_estimate = infinity; // infinity: transversal up to the cap
    bool unbounded = false;
    std::size_t samples_per_sphere = 0;
    double bisection_tol = 0.0;
    double cap = 0.0;
    std::uint64_t seed = 0;

    // Radius used downstream: the sampled estimate, or the cap when unbounded.
    double working() const noexcept
    {
        return unbounded ? cap : sampled_estimate;
    }
};

struct radius_config {
    std::size_t samples = 20000;
    double bisection_tol = 1e-4;
    double cap = 10.0;
    std::uint64_t seed = 0;
    std::size_t refine_top = 16;
};

inline constexpr double default_resonance_tol = 1e-9;

namespace detail
{

inline double direction_objective(const std::vector<cplx> &lambda, double theta)
{
    const cplx c = std::polar(1.0, theta);
    double g = infinity;
    for (const auto &l : lambda) {
        g = std::min(g, -std::real(c * l));
    }
    return g;
}

// Maximiser of min_j -Re(e^{i theta} lambda_j): uniform grid then
// golden-section refinement around the best grid node.
inline double optimal_angle(const std::vector<cplx> &lambda)
{
    constexpr int grid = 4096;
    const double h = 2.0 * std::numbers::pi / grid;
    int best = 0;
    double best_val = -infinity;
    for (int i = 0; i < grid; ++i) {
        const double v = direction_objective(lambda, i * h);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = (best - 1) * h, b = (best + 1) * h;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = direction_objective(lambda, x1), f2 = direction_objective(lambda, x2);
    while (b - a > 1e-12) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = direction_objective(lambda, x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = direction_objective(lambda, x1);
        }
    }
    double theta = 0.5 * (a + b);
    if (direction_objective(lambda, best * h) > direction_objective(lambda, theta)) {
        theta = best * h;
    }
    return std::remainder(theta, 2.0 * std::numbers::pi);
}

// Convex combination of at most three eigenvalues that (nearly) vanishes.
inline std::vector<double> hull_witness(const std::vector<cplx> &lambda, double tol)
{
    const std::size_t n = lambda.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(lambda[i]) <= tol) {
            w[i] = 1.0;
            return w;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const cplx a = lambda[i], b = lambda[j];
            const double cross = a.real() * b.imag() - a.imag() * b.real();
            const double dot = a.real() * b.real() + a.imag() * b.imag();
            if (std::abs(cross) <= tol * std::abs(a) * std::abs(b) && dot < 0) {
                const double t = std::abs(b) / (std::abs(a) + std::abs(b));
                w[i] = t;
                w[j] = 1.0 - t;
                return w;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            for (std::size_t k = j + 1; k < n; ++k) {
                Eigen::Matrix3d m;
                m << lambda[i].real(), lambda[j].real(), lambda[k].real(), lambda[i].imag(), lambda[j].imag(),
                    lambda[k].imag(), 1.0, 1.0, 1.0;
                if (std::abs(m.determinant()) < 1e-300) {
                    continue;
                }
                const Eigen::Vector3d bary = m.fullPivLu().solve(Eigen::Vector3d(0.0, 0.0, 1.0));
                if (bary.minCoeff() >= -tol) {
                    w[i] = bary[0];
                    w[j] = bary[1];
                    w[k] = bary[2];
                    return w;
                }
            }
        }
    }
    return {};
}

} // namespace detail

inline poincare_result check_poincare(const std::vector<cplx> &lambda)
{
    if (lambda.empty()) {
        throw InvalidInput("check_poincare: empty spectrum");
    }
    double scale = 0.0;
    for (const auto &l : lambda) {
        if (!std::isfinite(l.real()) || !std::isfinite(l.imag())) {
            throw InvalidInput("check_poincare: non-finite eigenvalue");
        }
        scale = std::max(scale, std::abs(l));
    }
    const double tol = 1e-12 * std::max(scale, 1.0);
    poincare_result r;
    bool has_zero = false;
    for (const auto &l : lambda) {
        has_zero = has_zero || std::abs(l) <= tol;
    }
    if (!has_zero) {
        const double theta = detail::optimal_angle(lambda);
        if (detail::direction_objective(lambda, theta) > tol) {
            r.poincare = true;
            r.direction = std::polar(1.0, theta);
            return r;
        }
    }
    r.witness = detail::hull_witness(lambda, 1e-9);
    return r;
}

inline spectrum_info select_direction(const std::vector<cplx> &lambda, double epsilon = 0.0)
{
    const auto p = check_poincare(lambda);
    if (!p.poincare) {
        throw NotPoincare("origin lies in the convex hull of the eigenvalues");
    }
    spectrum_info info;
    info.eigenvalues = lambda;
    info.epsilon = epsilon;
    info.direction = p.direction;
    info.alpha = infinity;
    info.beta = -infinity;
    for (const auto &l : lambda) {
        const double d = -std::real(info.direction * l);
        info.alpha = std::min(info.alpha, d);
        info.beta = std::max(info.beta, d);
    }
    return info;
}

// All (j, m) with 2 <= |m| <= degree_bound and |divisor(m, j)| <= tol.
inline resonance_set enumerate_resonances(std::size_t n, int degree_bound, double tol,
                                          const std::function<cplx(const multi_index &, std::size_t)> &divisor)
{
    if (degree_bound < 2) {
        throw InvalidInput("resonances: degree bound must be >= 2");
    }
    resonance_set r;
    r.degree_bound = degree_bound;
    r.tol = tol;
    for (std::size_t j = 0; j < n; ++j) {
        for (int d = 2; d <= degree_bound; ++d) {
            for (auto &m : indices_of_degree(n, d)) {
                if (std::abs(divisor(m, j)) <= tol) {
                    r.entries.push_back(term_key{j, std::move(m)});
                }
            }
        }
    }
    return r;
}

// <lambda, m> - lambda_j
inline cplx flow_divisor(const std::vector<cplx> &lambda, const multi_index &m, std::size_t j)
{
    cplx s = -lambda[j];
    for (std::size_t k = 0; k < lambda.size(); ++k) {
        s += static_cast<double>(m[k]) * lambda[k];
    }
    return s;
}

inline resonance_set resonances(const std::vector<cplx> &lambda, int degree_bound, double tol = default_resonance_tol)
{
    return enumerate_resonances(lambda.size(), degree_bound, tol,
                                [&](const multi_index &m, std::size_t j) { return flow_divisor(lambda, m, j); });
}

// Degree bound beyond which a Poincare spectrum has no resonances.
inline int complete_resonance_bound(const spectrum_info &info)
{
    return std::max(2, static_cast<int>(std::ceil(info.beta / info.alpha)) + 1);
}

// Smallest integer m > max(deg_x0, q (beta + eps) / (alpha + eps)).
inline int min_flatness_flow(const spectrum_info &info, int deg_x0, double q)
{
    if (!(q > 1.0)) {
        throw InvalidInput("min_flatness_flow: q must exceed 1");
    }
    const double bound = q * (info.beta + info.epsilon) / (info.alpha + info.epsilon);
    return static_cast<int>(std::floor(std::max(static_cast<double>(deg_x0), bound))) + 1;
}

namespace detail
{

// Homogeneous pieces of Re<c X(u), u> for a unit vector u:
// value(R) / R^2 = sum_d a[d] R^{d-1}, d = 1 (linear part) .. max degree.
class transversality_profile
{
public:
    transversality_profile(const poly_vector_field &f, cplx c) : f_(f), c_(c)
    {
        max_deg_ = std::max(1, pdnorm::max_degree(f.coefficients()));
        for (int d = 2; d <= max_deg_; ++d) {
            pieces_.push_back(truncate_table(f.coefficients(), d, d));
        }
    }

    int max_degree_value() const noexcept
    {
        return max_deg_;
    }

    std::vector<double> coefficients(const cvec &u) const
    {
        std::vector<double> a(static_cast<std::size_t>(max_deg_), 0.0);
        a[0] = std::real(c_ * u.dot(f_.apply_linear(u)));
        for (int d = 2; d <= max_deg_; ++d) {
            const cvec v = detail::eval_table(pieces_[static_cast<std::size_t>(d - 2)], f_.dim(), u, d);
            a[static_cast<std::size_t>(d - 1)] = std::real(c_ * u.dot(v));
        }
        return a;
    }

    // Exact Re<c X(R u), R u> / R^2.
    double scaled_value(const cvec &u, double r) const
    {
        const cvec z = r * u;
        return std::real(c_ * z.dot(eval(f_, z))) / (r * r);
    }

private:
    const poly_vector_field &f_;
    cplx c_;
    int max_deg_ = 1;
    std::vector<coeff_table> pieces_;
};

inline double profile_value(const std::vector<double> &a, double r)
{
    double v = 0.0, p = 1.0;
    for (double ad : a) {
        v += ad * p;
        p *= r;
    }
    return v;
}

// Local ascent of u -> scaled_value(u, r) on the unit sphere by coordinate
// moves in the 2n real directions with a shrinking step.
inline cvec refine_direction(const transversality_profile &prof, cvec u, double r)
{
    const auto n = u.size();
    double best = prof.scaled_value(u, r);
    double step = 0.05;
    while (step > 1e-10) {
        bool improved = false;
        for (Eigen::Index k = 0; k < n; ++k) {
            for (cplx dir : {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)}) {
                cvec v = u;
                v[k] += step * dir;
                v /= v.norm();
                const double val = prof.scaled_value(v, r);
                if (val > best) {
                    best = val;
                    u = v;
                    improved = true;
                }
            }
        }
        if (!improved) {
            step *= 0.5;
        }
    }
    return u;
}

} // namespace detail

// Largest R with (alpha - eps) R^2 > sum |c| R^{|m|+1}: on such spheres the
// linear part dominates and Re<cX(z), z> < 0.
inline double certified_transversality_radius(const poly_vector_field &field, const spectrum_info &info, double cap)
{
    const double margin = info.alpha - field.epsilon();
    if (margin <= 0) {
        return 0.0;
    }
    if (field.is_linear()) {
        return cap;
    }
    auto h = [&](double r) { return coefficient_bound(field.coefficients(), r) / r; };
    double lo = 0.0, hi = cap;
    if (h(hi) < margin) {
        return cap;
    }
    while (hi - lo > 1e-13 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) < margin ? lo : hi) = mid;
    }
    return lo;
}

inline radius_report transversality_radius(const poly_vector_field &field, const spectrum_info &info,
                                           const radius_config &cfg = {})
{
    if (!check_poincare(field.eigenvalues()).poincare) {
        throw NotPoincare("transversality_radius: field is not of Poincare type");
    }
    radius_report rep;
    rep.samples_per_sphere = cfg.samples;
    rep.bisection_tol = cfg.bisection_tol;
    rep.cap = cfg.cap;
    rep.seed = cfg.seed;
    rep.certified_lower = certified_transversality_radius(field, info, cfg.cap);

    const std::size_t n = field.dim();
    const detail::transversality_profile prof(field, info.direction);
    std::vector<cvec> dirs;
    std::vector<std::vector<double>> coef;
    dirs.reserve(cfg.samples);
    for (std::size_t i = 0; i < cfg.samples; ++i) {
        dirs.push_back(sphere_point(i, n, cfg.seed));
        coef.push_back(prof.coefficients(dirs.back()));
    }
    auto sup = [&](double r) {
        double s = -infinity;
        for (const auto &a : coef) {
            s = std::max(s, detail::profile_value(a, r));
        }
        return s;
    };
    auto add_refined = [&](double r) {
        std::vector<std::size_t> order(dirs.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        const std::size_t top = std::min(cfg.refine_top, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              return detail::profile_value(coef[a], r) > detail::profile_value(coef[b], r);
                          });
        for (std::size_t i = 0; i < top; ++i) {
            cvec u = detail::refine_direction(prof, dirs[order[i]], r);
            coef.push_back(prof.coefficients(u));
            dirs.push_back(std::move(u));
        }
    };

    // First sign change of sup(R) on a geometric scan, then bisection. The
    // refined directions are fed back and the bracket recomputed once more.
    auto locate = [&]() -> std::optional<std::pair<double, double>> {
        double lo = cfg.cap * 1e-6;
        if (sup(lo) >= 0) {
            return std::make_pair(0.0, lo);
        }
        while (lo < cfg.cap) {
            const double hi = std::min(lo * 1.05, cfg.cap);
            if (sup(hi) >= 0) {
                double a = lo, b = hi;
                while (b - a > 0.25 * cfg.bisection_tol) {
                    const double mid = 0.5 * (a + b);
                    (sup(mid) < 0 ? a : b) = mid;
                }
                return std::make_pair(a, b);
            }
            lo = hi;
        }
        return std::nullopt;
    };

    auto bracket = locate();
    for (int pass = 0; pass < 2; ++pass) {
        add_refined(bracket ? bracket->second : cfg.cap);
        bracket = locate();
    }
    if (!bracket) {
        rep.unbounded = true;
        rep.sampled_estimate = infinity;
        return rep;
    }
    rep.sampled_estimate = bracket->second;
    return rep;
}

} // namespace pdnorm
