#pragma once

// The continuous-time normalizer L(z) = lim_{t->inf} L_t(z) in prepared
// coordinates, its Taylor coefficients, and the checks that it conjugates X to
// X0 on a ball whose radius comes from the transversality estimate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <pdnorm/algebra.hpp>
#include <pdnorm/core.hpp>
#include <pdnorm/flow.hpp>
#include <pdnorm/prepare.hpp>
#include <pdnorm/sampling.hpp>
#include <pdnorm/spectrum.hpp>

namespace pdnorm
{

struct linearization_sample {
    cvec z;
    cvec value;
    cvec increment; // value - z, accumulated without cancellation
    double tail_bound = 0.0;
    double t_reached = 0.0;
    std::size_t steps = 0;
    // ||I(t_k) - I(t_{k-1})|| at the checkpoints t_k = k / alpha.
    std::vector<double> increments;
};

struct voc_config {
    double delta = -1.0;          // < 0: alpha / 10
    double t_max = -1.0;          // < 0: 50 / alpha
    double escape_radius = 10.0;
    double integrator_tol = -1.0; // < 0: tol / 100, floored at 1e-14
    bool force_variational = false;
};

struct taylor_table {
    coeff_table coefficients; // includes the degree-1 block
    double sample_radius = 0.0;
    int degree = 1;
    std::size_t samples_per_circle = 0;
    // Largest coefficient change when the per-circle count is halved.
    double aliasing_estimate = 0.0;

    cplx coefficient(std::size_t j, const multi_index &m) const
    {
        auto it = coefficients.find(term_key{j, m});
        return it == coefficients.end() ? cplx{} : it->second;
    }

    // Tangent-to-identity map with the degree 2..degree coefficients.
    poly_map as_change(int degree_cap) const
    {
        const auto n = static_cast<Eigen::Index>(coefficients.empty() ? 0 : coefficients.begin()->first.index.size());
        return poly_map(cmat::Identity(n, n), truncate_table(coefficients, 2, degree_cap), degree_cap);
    }
};

// Recovers Taylor coefficients of degree <= d of a map G with G(0) = 0 from its
// values on the torus |z_k| = r by a multidimensional DFT. `increment(z)` must
// return G(z) - z; the identity is added back exactly. With check_aliasing the
// grid has 4(d+1) points per circle and the result is compared with the
// 2(d+1)-point subgrid.
inline taylor_table extract_taylor(std::size_t n, const std::function<cvec(const cvec &)> &increment, double r, int d,
                                   bool check_aliasing = true)
{
    if (d < 1) {
        throw InvalidInput("taylor: degree must be >= 1");
    }
    if (!(r > 0)) {
        throw InvalidInput("taylor: sample radius must be positive");
    }
    const std::size_t base = 2 * static_cast<std::size_t>(d + 1);
    const std::size_t per = check_aliasing ? 2 * base : base;
    std::size_t total = 1;
    for (std::size_t k = 0; k < n; ++k) {
        total *= per;
    }
    auto grid_index = [&](std::size_t flat) {
        std::vector<std::size_t> p(n);
        for (std::size_t k = 0; k < n; ++k) {
            p[k] = flat % per;
            flat /= per;
        }
        return p;
    };
    std::vector<cvec> values(total);
    parallel_for(total, [&](std::size_t i) {
        const auto p = grid_index(i);
        cvec z(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < n; ++k) {
            z[static_cast<Eigen::Index>(k)] =
                std::polar(r, 2.0 * std::numbers::pi * static_cast<double>(p[k]) / static_cast<double>(per));
        }
        values[i] = increment(z);
    });

    auto transform = [&](std::size_t stride) {
        const std::size_t count_per = per / stride;
        double count = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            count *= static_cast<double>(count_per);
        }
        coeff_table out;
        for (int deg = 1; deg <= d; ++deg) {
            for (const auto &m : indices_of_degree(n, deg)) {
                cvec acc = cvec::Zero(static_cast<Eigen::Index>(n));
                for (std::size_t i = 0; i < total; ++i) {
                    const auto p = grid_index(i);
                    bool on_sub = true;
                    double phase = 0.0;
                    for (std::size_t k = 0; k < n; ++k) {
                        on_sub = on_sub && p[k] % stride == 0;
                        phase += static_cast<double>(m[k]) * static_cast<double>(p[k]) / static_cast<double>(per);
                    }
                    if (on_sub) {
                        acc += values[i] * std::polar(1.0, -2.0 * std::numbers::pi * phase);
                    }
                }
                acc /= count * std::pow(r, deg);
                for (std::size_t j = 0; j < n; ++j) {
                    cplx v = acc[static_cast<Eigen::Index>(j)];
                    if (deg == 1 && m[j] == 1) {
                        v += 1.0;
                    }
                    if (std::abs(v) >= canonical_zero) {
                        out.emplace(term_key{j, m}, v);
                    }
                }
            }
        }
        return out;
    };

    taylor_table tt;
    tt.sample_radius = r;
    tt.degree = d;
    tt.samples_per_circle = per;
    tt.coefficients = transform(1);
    if (check_aliasing) {
        const coeff_table coarse = transform(2);
        for (const auto &[k, v] : subtract(tt.coefficients, coarse)) {
            tt.aliasing_estimate = std::max(tt.aliasing_estimate, std::abs(v));
        }
    }
    return tt;
}

// Evaluates L and the finite-time L_t for one prepared form.
class normalizer
{
public:
    normalizer(prepared_form prep, spectrum_info info, double tol, voc_config cfg = {})
        : prep_(std::move(prep)), info_(std::move(info)), tol_(tol), cfg_(cfg),
          system_(prep_.prepared_field(), prep_.x0, info_.direction, make_flow_config(tol, cfg))
    {
        if (!(tol > 0)) {
            throw InvalidInput("normalizer: tolerance must be positive");
        }
        delta_ = cfg_.delta < 0 ? info_.alpha / 10.0 : cfg_.delta;
        t_max_ = cfg_.t_max < 0 ? 50.0 / info_.alpha : cfg_.t_max;
        kappa_ = flow_tail_rate(info_, prep_.m, delta_);
    }

    const prepared_form &prepared() const noexcept
    {
        return prep_;
    }
    const spectrum_info &spectrum() const noexcept
    {
        return info_;
    }
    double tol() const noexcept
    {
        return tol_;
    }
    double kappa() const noexcept
    {
        return kappa_;
    }
    double t_max() const noexcept
    {
        return t_max_;
    }
    const flow_system &system() const noexcept
    {
        return system_;
    }

    // Bound on the remaining integral from the current state:
    // ||W(t)|| * sum |c| ||w(t)||^{|m|} / kappa.
    double tail_bound(const flow_state &s) const
    {
        Eigen::JacobiSVD<cmat> svd(s.W);
        const double wnorm = svd.singularValues()(0);
        return wnorm * coefficient_bound(prep_.x1.coefficients(), s.w.norm()) / kappa_;
    }

    linearization_sample sample(const cvec &z, std::ostream *trajectory = nullptr) const
    {
        require_dim(prep_.x0.dim(), static_cast<std::size_t>(z.size()), "normalize_point");
        linearization_sample out;
        out.z = z;
        if (prep_.x1.is_linear()) {
            out.value = z;
            out.increment = cvec::Zero(z.size());
            return out;
        }
        if (kappa_ <= 0) {
            throw InsufficientFlatness("tail rate m(alpha - eps - delta) - (beta + eps + delta) = "
                                       + num_str(kappa_) + " is not positive; increase m (currently "
                                       + std::to_string(prep_.m) + ")");
        }
        const double dt = 1.0 / info_.alpha;
        flow_state s = flow_state::initial(z);
        if (trajectory) {
            flow_system::dump(*trajectory, s);
        }
        cvec prev = s.I;
        for (int k = 1;; ++k) {
            const double t_k = k * dt;
            if (t_k > t_max_ * (1.0 + 1e-12)) {
                throw NoConvergence("tail bound " + num_str(tail_bound(s)) + " above tolerance at t_max = "
                                    + num_str(t_max_));
            }
            s = system_.advance(s, t_k, trajectory);
            out.increments.push_back((s.I - prev).norm());
            prev = s.I;
            const double tail = tail_bound(s);
            const std::size_t ni = out.increments.size();
            if (tail < tol_ && ni >= 3 && out.increments[ni - 1] < tol_ && out.increments[ni - 2] < tol_
                && out.increments[ni - 3] < tol_) {
                out.tail_bound = tail;
                break;
            }
        }
        out.value = z + s.I;
        out.increment = s.I;
        out.t_reached = s.t;
        out.steps = s.steps;
        return out;
    }

    cvec operator()(const cvec &z) const
    {
        return sample(z).value;
    }

    // L_t(z) at finite t.
    cvec finite_time(const cvec &z, double t) const
    {
        return system_.integrate_to(z, t).value(z);
    }

    flow_config flow_cfg() const
    {
        return make_flow_config(tol_, cfg_);
    }

private:
    static flow_config make_flow_config(double tol, const voc_config &cfg)
    {
        flow_config fc;
        fc.tol = cfg.integrator_tol > 0 ? cfg.integrator_tol : std::max(tol * 1e-2, 1e-14);
        fc.escape_radius = cfg.escape_radius;
        fc.force_variational = cfg.force_variational;
        return fc;
    }

    prepared_form prep_;
    spectrum_info info_;
    double tol_;
    voc_config cfg_;
    flow_system system_;
    double delta_ = 0.0;
    double t_max_ = 0.0;
    double kappa_ = 0.0;
};

inline linearization_sample normalize_point(const prepared_form &prep, const spectrum_info &info, const cvec &z,
                                            double tol, const voc_config &cfg = {})
{
    return normalizer(prep, info, tol, cfg).sample(z);
}

inline taylor_table taylor_coefficients(const normalizer &L, double r, int d, bool check_aliasing = true)
{
    return extract_taylor(
        L.prepared().x0.dim(), [&](const cvec &z) -> cvec { return L.sample(z).increment; }, r, d, check_aliasing);
}

inline taylor_table taylor_coefficients(const prepared_form &prep, const spectrum_info &info, double r, int d,
                                        double tol, const voc_config &cfg = {}, bool check_aliasing = true)
{
    return taylor_coefficients(normalizer(prep, info, tol, cfg), r, d, check_aliasing);
}

// Flow of c X0 for time tau (closed form when X0 is linear).
inline cvec normal_form_flow(const normalizer &L, const cvec &z, double tau)
{
    const auto &x0 = L.prepared().x0;
    if (tau == 0.0) {
        return z;
    }
    if (x0.is_linear()) {
        return matrix_exp(x0, tau * L.spectrum().direction) * z;
    }
    return flow_point(x0, L.spectrum().direction, z, tau, L.flow_cfg());
}

inline cvec field_flow(const normalizer &L, const cvec &z, double tau)
{
    if (tau == 0.0) {
        return z;
    }
    return flow_point(L.prepared().prepared_field(), L.spectrum().direction, z, tau, L.flow_cfg());
}

// ||L(Phi_X^tau(z)) - Phi_{X0}^tau(L(z))|| for each sample.
inline std::vector<double> conjugacy_residuals(const normalizer &L, const std::vector<cvec> &samples, double tau)
{
    std::vector<double> out(samples.size(), 0.0);
    if (tau == 0.0) {
        return out;
    }
    parallel_for(samples.size(), [&](std::size_t i) {
        const cvec &z = samples[i];
        const cvec lhs = L(field_flow(L, z, tau));
        const cvec rhs = normal_form_flow(L, L(z), tau);
        out[i] = (lhs - rhs).norm();
    });
    return out;
}

inline double conjugacy_residual(const prepared_form &prep, const spectrum_info &info, const std::vector<cvec> &samples,
                                 double tau, double tol, const voc_config &cfg = {})
{
    const normalizer L(prep, info, tol / 10.0, cfg);
    const auto r = conjugacy_residuals(L, samples, tau);
    return r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
}

struct push_check {
    cplx predicted;
    cplx measured;
};

// Coefficient (j, k) of (L_t)_* X against exp(t c (<lambda,k> - lambda_j)) X1_{k,j}.
inline push_check pushforward_order_check(const prepared_form &prep, const spectrum_info &info, double t,
                                          const multi_index &k, std::size_t j, double tol, double sample_radius,
                                          const voc_config &cfg = {})
{
    if (prep.x0_nonlinear()) {
        throw InvalidInput("pushforward_order_check: X0 must be linear");
    }
    const int deg = k.degree();
    if (deg != flatness_order(prep.x1)) {
        throw InvalidInput("pushforward_order_check: |k| must equal the flatness order of X1");
    }
    const auto &lambda = prep.x0.eigenvalues();
    const cplx div = flow_divisor(lambda, k, j);
    auto it = prep.x1.coefficients().find(term_key{j, k});
    const cplx x1c = it == prep.x1.coefficients().end() ? cplx{} : it->second;
    push_check out;
    out.predicted = std::exp(t * info.direction * div) * x1c;
    if (t == 0.0) {
        out.measured = x1c;
        return out;
    }
    const normalizer L(prep, info, tol, cfg);
    // Oversampled so that aliasing from degrees above |k| stays negligible.
    const int d_ext = std::max(3 * deg, 8);
    const auto table = extract_taylor(
        prep.x0.dim(), [&](const cvec &z) -> cvec { return L.finite_time(z, t) - z; }, sample_radius, d_ext, false);
    const poly_map lt = table.as_change(deg);
    const poly_vector_field pushed = pushforward_truncate(lt, prep.prepared_field(), deg);
    auto pit = pushed.coefficients().find(term_key{j, k});
    out.measured = pit == pushed.coefficients().end() ? cplx{} : pit->second;
    return out;
}

struct domain_report_t {
    double radius = 0.0;
    std::size_t points = 0;
    std::size_t converged = 0;
    double success_rate = 1.0;
    double max_tail_bound = 0.0;
    double min_abs_det = infinity;
    std::vector<std::string> failures;
};

// Evaluates L on `grid` deterministic points of the sphere of radius
// 0.95 * R0 and records convergence, tails and the smallest |det dL| from
// centred finite differences.
inline domain_report_t domain_report(const normalizer &L, const radius_report &radius, std::size_t grid)
{
    const auto &prep = L.prepared();
    if (prep.x0_nonlinear()) {
        throw InvalidInput("domain_report: defined for the linearization case only");
    }
    domain_report_t rep;
    rep.radius = 0.95 * radius.working();
    rep.points = grid;
    if (grid == 0) {
        rep.min_abs_det = 0.0;
        return rep;
    }
    const std::size_t n = prep.x0.dim();
    const auto pts = sphere_grid(grid, n, rep.radius, radius.seed);
    const double h = 1e-4 * std::max(rep.radius, 1e-3);
    std::vector<int> ok(grid, 0);
    std::vector<double> tails(grid, 0.0), dets(grid, infinity);
    std::vector<std::string> why(grid);
    parallel_for(grid, [&](std::size_t i) {
        try {
            const auto s = L.sample(pts[i]);
            tails[i] = s.tail_bound;
            cmat jac(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            for (std::size_t k = 0; k < n; ++k) {
                cvec dz = cvec::Zero(static_cast<Eigen::Index>(n));
                dz[static_cast<Eigen::Index>(k)] = h;
                jac.col(static_cast<Eigen::Index>(k)) = (L(pts[i] + dz) - L(pts[i] - dz)) / (2.0 * h);
            }
            dets[i] = std::abs(jac.determinant());
            ok[i] = 1;
        } catch (const error &e) {
            why[i] = std::string(e.name()) + ": " + e.what();
        }
    });
    for (std::size_t i = 0; i < grid; ++i) {
        if (ok[i]) {
            ++rep.converged;
            rep.max_tail_bound = std::max(rep.max_tail_bound, tails[i]);
            rep.min_abs_det = std::min(rep.min_abs_det, dets[i]);
        } else {
            rep.failures.push_back(why[i]);
        }
    }
    rep.success_rate = static_cast<double>(rep.converged) / static_cast<double>(grid);
    return rep;
}

} // namespace pdnorm
