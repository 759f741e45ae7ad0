#pragma once

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <pdnorm/core.hpp>

namespace pdnorm
{

// Exponent vector (m_1, ..., m_n) of a monomial z^m.
class multi_index
{
public:
    multi_index() = default;
    explicit multi_index(std::size_t n) : exps_(n, 0) {}
    multi_index(std::initializer_list<int> e) : exps_(e)
    {
        check();
    }
    explicit multi_index(std::vector<int> e) : exps_(std::move(e))
    {
        check();
    }

    static multi_index unit(std::size_t n, std::size_t k)
    {
        multi_index m(n);
        m.exps_[k] = 1;
        return m;
    }

    std::size_t size() const noexcept
    {
        return exps_.size();
    }
    int operator[](std::size_t k) const
    {
        return exps_[k];
    }
    const std::vector<int> &exponents() const noexcept
    {
        return exps_;
    }
    int degree() const noexcept
    {
        return std::accumulate(exps_.begin(), exps_.end(), 0);
    }

    multi_index operator+(const multi_index &o) const
    {
        require_dim(size(), o.size(), "multi_index addition");
        multi_index r(*this);
        for (std::size_t k = 0; k < exps_.size(); ++k) {
            r.exps_[k] += o.exps_[k];
        }
        return r;
    }

    // Exponent with one unit moved from variable `from` to variable `to`.
    multi_index shifted(std::size_t from, std::size_t to) const
    {
        multi_index r(*this);
        --r.exps_[from];
        ++r.exps_[to];
        return r;
    }

    multi_index decremented(std::size_t k) const
    {
        multi_index r(*this);
        --r.exps_[k];
        return r;
    }

    // Graded order: lower total degree first, then lexicographically descending
    // exponents, so that z1^2 < z1 z2 < z2^2 inside a degree.
    std::strong_ordering operator<=>(const multi_index &o) const
    {
        if (auto c = degree() <=> o.degree(); c != 0) {
            return c;
        }
        for (std::size_t k = 0; k < exps_.size() && k < o.exps_.size(); ++k) {
            if (auto c = o.exps_[k] <=> exps_[k]; c != 0) {
                return c;
            }
        }
        return exps_.size() <=> o.exps_.size();
    }
    bool operator==(const multi_index &o) const = default;

    std::string str() const
    {
        std::string s = "(";
        for (std::size_t k = 0; k < exps_.size(); ++k) {
            s += (k ? "," : "") + std::to_string(exps_[k]);
        }
        return s + ")";
    }

private:
    void check() const
    {
        for (int e : exps_) {
            if (e < 0) {
                throw InvalidInput("multi_index: negative exponent");
            }
        }
    }

    std::vector<int> exps_;
};

inline std::ostream &operator<<(std::ostream &os, const multi_index &m)
{
    return os << m.str();
}

// All exponent vectors of length n and total degree d, in graded order.
inline std::vector<multi_index> indices_of_degree(std::size_t n, int d)
{
    std::vector<multi_index> out;
    if (n == 0) {
        return out;
    }
    std::vector<int> e(n, 0);
    // Recursive fill of the first n-1 slots; the last takes the remainder.
    auto rec = [&](auto &&self, std::size_t k, int left) -> void {
        if (k + 1 == n) {
            e[k] = left;
            out.emplace_back(e);
            return;
        }
        for (int v = left; v >= 0; --v) {
            e[k] = v;
            self(self, k + 1, left - v);
        }
    };
    rec(rec, 0, d);
    return out;
}

} // namespace pdnorm
