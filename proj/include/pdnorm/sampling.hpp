#pragma once

// Deterministic point sets and a small index-parallel loop.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

#include <pdnorm/core.hpp>

namespace pdnorm
{

inline constexpr std::array<unsigned, 16> halton_bases{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

// Radical inverse of `index` in `base`.
inline double halton(std::uint64_t index, unsigned base)
{
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

// Point on the unit sphere of C^n (real dimension 2n-1). Halton coordinates go
// through Box-Muller and are normalised; `seed` offsets the sequence.
inline cvec sphere_point(std::uint64_t index, std::size_t n, std::uint64_t seed = 0)
{
    if (2 * n > halton_bases.size()) {
        throw InvalidInput("sphere_point: dimension too large for the Halton table");
    }
    const std::uint64_t i = index + seed + 1;
    cvec z(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        const double u1 = std::max(halton(i, halton_bases[2 * k]), 1e-300);
        const double u2 = halton(i, halton_bases[2 * k + 1]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        z[static_cast<Eigen::Index>(k)] = std::polar(rad, 2.0 * std::numbers::pi * u2);
    }
    const double nz = z.norm();
    if (nz == 0.0) {
        z.setZero();
        z[0] = 1.0;
        return z;
    }
    return z / nz;
}

// Deterministic grid of `count` points on the sphere of radius r. In one
// dimension the points are equally spaced in angle starting at +r.
inline std::vector<cvec> sphere_grid(std::size_t count, std::size_t n, double r, std::uint64_t seed = 0)
{
    std::vector<cvec> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (n == 1) {
            cvec z(1);
            z[0] = std::polar(r, 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count));
            pts.push_back(z);
        } else {
            pts.push_back(r * sphere_point(i, n, seed));
        }
    }
    return pts;
}

// `count` seeded points uniformly distributed in the ball of radius r in C^n.
inline std::vector<cvec> ball_points(std::size_t count, std::size_t n, double r, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<cvec> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        cvec z(static_cast<Eigen::Index>(n));
        for (auto &v : z) {
            const double re = normal(rng);
            const double im = normal(rng);
            v = cplx(re, im);
        }
        const double radius = r * std::pow(unif(rng), 1.0 / (2.0 * static_cast<double>(n)));
        pts.push_back(z * (radius / z.norm()));
    }
    return pts;
}

// Runs fn(i) for i in [0, count) on the available hardware threads. Results
// must be written to caller-owned slots indexed by i. If several calls throw,
// the exception of the lowest index is rethrown.
template <class Fn>
void parallel_for(std::size_t count, Fn &&fn)
{
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), count));
    std::vector<std::exception_ptr> errors(count);
    auto run = [&](std::size_t w) {
        for (std::size_t i = w; i < count; i += workers) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        run(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(run, w);
        }
    }
    for (auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace pdnorm
