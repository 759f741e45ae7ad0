#pragma once

// Real-time integration of dz/dt = c X(z) together with the variational
// matrix W ~ d Phi_{X0}^{-t} and the variation-of-constants integral
// I(t) = int_0^t W(s) c X1(w(s)) ds, so that L_t(z) = z + I(t).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <vector>

#include <pdnorm/algebra.hpp>
#include <pdnorm/core.hpp>

namespace pdnorm
{

// exp(tau (S + eps N)) = exp(tau S) * sum_k (tau eps N)^k / k!, exact since S
// and N commute on Jordan blocks.
inline cmat matrix_exp(const std::vector<cplx> &lambda, double epsilon, const std::vector<std::size_t> &nilpotent,
                       cplx tau)
{
    const auto n = static_cast<Eigen::Index>(lambda.size());
    cmat nil = cmat::Zero(n, n);
    for (auto k : nilpotent) {
        nil(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k + 1)) = tau * epsilon;
    }
    cmat series = cmat::Identity(n, n);
    if (!nilpotent.empty() && epsilon != 0.0) {
        cmat term = cmat::Identity(n, n);
        for (Eigen::Index k = 1; k < n; ++k) {
            term = term * nil / static_cast<double>(k);
            if (term.cwiseAbs().maxCoeff() == 0.0) {
                break;
            }
            series += term;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        series.row(i) *= std::exp(tau * lambda[static_cast<std::size_t>(i)]);
    }
    return series;
}

inline cmat matrix_exp(const poly_vector_field &f, cplx tau)
{
    return matrix_exp(f.eigenvalues(), f.epsilon(), f.nilpotent(), tau);
}

struct flow_state {
    double t = 0.0;
    cvec w;             // Phi_X^{tc}(z)
    cmat W;             // d Phi_{X0}^{-tc} along the trajectory
    cvec I;             // accumulated integral; L_t(z) = z + I
    double err_estimate = 0.0;
    double h = 0.0;     // proposed next step
    double err_old = 1e-4;
    std::size_t steps = 0;
    std::size_t rejected = 0;

    static flow_state initial(const cvec &z)
    {
        flow_state s;
        s.w = z;
        s.W = cmat::Identity(z.size(), z.size());
        s.I = cvec::Zero(z.size());
        return s;
    }

    cvec value(const cvec &z) const
    {
        return z + I;
    }
};

struct flow_config {
    double tol = 1e-10;
    double escape_radius = 10.0;
    double h_min = 1e-14;
    std::size_t max_steps = 10'000'000;
    // Integrate W even when X0 is linear (cross-check path).
    bool force_variational = false;
    // Fixed step size (> 0 disables adaptivity).
    double fixed_step = 0.0;
};

// The augmented system for one (X, X0, c). X1 = X - X0 is evaluated from its own
// coefficient table.
class flow_system
{
public:
    flow_system(const poly_vector_field &field, const poly_vector_field &x0, cplx c, flow_config cfg = {})
        : field_(field), x0_(x0), x1_(x0.with_coefficients(subtract(field.coefficients(), x0.coefficients()),
                                                          std::max(field.truncation_degree(), 1))),
          c_(c), cfg_(cfg)
    {
        require_dim(field.dim(), x0.dim(), "flow_system");
        if (field.eigenvalues() != x0.eigenvalues() || field.epsilon() != x0.epsilon()
            || field.nilpotent() != x0.nilpotent()) {
            throw InvalidInput("flow_system: X and X0 must share the linear part");
        }
        variational_ = cfg_.force_variational || !x0.is_linear();
        n_ = static_cast<Eigen::Index>(field.dim());
    }

    bool variational() const noexcept
    {
        return variational_;
    }
    const poly_vector_field &x1() const noexcept
    {
        return x1_;
    }
    cplx direction() const noexcept
    {
        return c_;
    }
    const flow_config &config() const noexcept
    {
        return cfg_;
    }

    // exp(-t c A), the closed-form W for linear X0.
    cmat linear_propagator(double t) const
    {
        return matrix_exp(field_, -t * c_);
    }

    // One adaptive embedded 5(4) step (Dormand-Prince coefficients, PI control).
    flow_state step(const flow_state &s, double t_limit = infinity) const
    {
        flow_state cur = s;
        if (cur.h <= 0) {
            cur.h = initial_step(cur);
        }
        for (;;) {
            double h = std::min(cur.h, t_limit - cur.t);
            const bool fixed = cfg_.fixed_step > 0;
            if (fixed) {
                h = std::min(cfg_.fixed_step, t_limit - cur.t);
            }
            if (h < cfg_.h_min && t_limit - cur.t > cfg_.h_min) {
                throw StepUnderflow("step size fell below " + num_str(cfg_.h_min) + " at t = "
                                    + num_str(cur.t));
            }
            if (cur.steps + cur.rejected >= cfg_.max_steps) {
                throw NoConvergence("maximum number of integration steps exceeded");
            }
            const cvec y0 = pack(cur);
            cvec y5, err;
            dp_step(cur.t, y0, h, y5, err);
            const double e = error_norm(y0, y5, err);
            if (fixed || e <= 1.0) {
                flow_state next = unpack(y5, cur.t + h);
                next.err_estimate = cur.err_estimate + err.cwiseAbs().maxCoeff();
                next.steps = cur.steps + 1;
                next.rejected = cur.rejected;
                const double ee = std::max(e, 1e-10);
                double fac = std::pow(ee, 0.2 - 0.04 * 0.75) / std::pow(cur.err_old, 0.04) / 0.9;
                fac = std::clamp(fac, 0.1, 5.0);
                next.h = fixed ? cfg_.fixed_step : (h == cur.h ? h / fac : cur.h);
                next.err_old = std::max(e, 1e-4);
                if (next.w.norm() > cfg_.escape_radius || !next.w.allFinite()) {
                    throw Escape("trajectory left the ball of radius " + num_str(cfg_.escape_radius)
                                 + " at t = " + num_str(next.t));
                }
                return next;
            }
            cur.h = h / std::min(5.0, std::pow(e, 0.2) / 0.9);
            ++cur.rejected;
        }
    }

    flow_state integrate_to(const cvec &z, double t_end, std::ostream *trajectory = nullptr) const
    {
        require_dim(field_.dim(), static_cast<std::size_t>(z.size()), "integrate_to");
        flow_state s = flow_state::initial(z);
        if (trajectory) {
            dump(*trajectory, s);
        }
        return advance(s, t_end, trajectory);
    }

    flow_state advance(flow_state s, double t_end, std::ostream *trajectory = nullptr) const
    {
        while (s.t < t_end) {
            s = step(s, t_end);
            if (t_end - s.t < 1e-13 * std::max(1.0, t_end)) {
                s.t = t_end;
            }
            if (trajectory) {
                dump(*trajectory, s);
            }
        }
        return s;
    }

    static void dump(std::ostream &os, const flow_state &s)
    {
        os << s.t;
        for (Eigen::Index k = 0; k < s.w.size(); ++k) {
            os << ',' << s.w[k].real() << ',' << s.w[k].imag();
        }
        os << ',' << s.err_estimate << '\n';
    }

private:
    Eigen::Index state_size() const
    {
        return variational_ ? 2 * n_ + n_ * n_ : 2 * n_;
    }

    cvec pack(const flow_state &s) const
    {
        cvec y(state_size());
        y.head(n_) = s.w;
        if (variational_) {
            y.segment(n_, n_ * n_) = s.W.reshaped();
        }
        y.tail(n_) = s.I;
        return y;
    }

    flow_state unpack(const cvec &y, double t) const
    {
        flow_state s;
        s.t = t;
        s.w = y.head(n_);
        s.W = variational_ ? cmat(y.segment(n_, n_ * n_).reshaped(n_, n_)) : linear_propagator(t);
        s.I = y.tail(n_);
        return s;
    }

    cvec rhs(double t, const cvec &y) const
    {
        cvec dy(y.size());
        const cvec w = y.head(n_);
        dy.head(n_) = c_ * eval(field_, w);
        const cvec x1 = c_ * x1_.eval_nonlinear(w);
        if (variational_) {
            const cmat wm = y.segment(n_, n_ * n_).reshaped(n_, n_);
            const cmat dw = -c_ * (jacobian(x0_, w) * wm);
            dy.segment(n_, n_ * n_) = dw.reshaped();
            dy.tail(n_) = wm * x1;
        } else {
            dy.tail(n_) = linear_propagator(t) * x1;
        }
        return dy;
    }

    // Block-relative max norm: w and W relative to their own norms, I with an
    // absolute floor of one.
    double error_norm(const cvec &y0, const cvec &y1, const cvec &err) const
    {
        const double tol = cfg_.tol;
        const double sw = tol * std::max({y0.head(n_).norm(), y1.head(n_).norm(), 1e-300});
        double e = err.head(n_).cwiseAbs().maxCoeff() / sw;
        if (variational_) {
            const double sW =
                tol * std::max(y0.segment(n_, n_ * n_).norm(), y1.segment(n_, n_ * n_).norm());
            e = std::max(e, err.segment(n_, n_ * n_).cwiseAbs().maxCoeff() / sW);
        }
        const double sI = tol * (1.0 + std::max(y0.tail(n_).norm(), y1.tail(n_).norm()));
        e = std::max(e, err.tail(n_).cwiseAbs().maxCoeff() / sI);
        return std::isfinite(e) ? e : infinity;
    }

    double initial_step(const flow_state &s) const
    {
        double rate = 0.0;
        for (const auto &l : field_.eigenvalues()) {
            rate = std::max(rate, std::abs(l));
        }
        rate = std::max(rate + field_.epsilon(), 1e-3);
        return 0.05 / rate * std::pow(cfg_.tol / 1e-10, 0.2);
    }

    void dp_step(double t, const cvec &y, double h, cvec &y5, cvec &err) const
    {
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                         a65 = -5103.0 / 18656;
        constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                         e6 = 22.0 / 525, e7 = -1.0 / 40;
        const cvec k1 = rhs(t, y);
        const cvec k2 = rhs(t + c2 * h, y + h * a21 * k1);
        const cvec k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
        const cvec k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const cvec k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const cvec k6 = rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const cvec k7 = rhs(t + h, y5);
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    }

    poly_vector_field field_;
    poly_vector_field x0_;
    poly_vector_field x1_;
    cplx c_;
    flow_config cfg_;
    bool variational_ = false;
    Eigen::Index n_ = 0;
};

inline flow_state step(const poly_vector_field &field, const poly_vector_field &x0, cplx c, const flow_state &state,
                       double tol)
{
    flow_config cfg;
    cfg.tol = tol;
    return flow_system(field, x0, c, cfg).step(state);
}

inline flow_state integrate_to(const poly_vector_field &field, const poly_vector_field &x0, cplx c, const cvec &z,
                               double t_end, double tol, flow_config cfg = {})
{
    cfg.tol = tol;
    return flow_system(field, x0, c, cfg).integrate_to(z, t_end);
}

// Plain trajectory of c X from z over time t (no integral bookkeeping).
inline cvec flow_point(const poly_vector_field &field, cplx c, const cvec &z, double t, flow_config cfg = {})
{
    if (t == 0.0) {
        return z;
    }
    const poly_vector_field x0 = field.with_coefficients({}, 1);
    if (field.is_linear()) {
        return matrix_exp(field, t * c) * z;
    }
    return flow_system(field, x0, c, cfg).integrate_to(z, t).w;
}

} // namespace pdnorm
