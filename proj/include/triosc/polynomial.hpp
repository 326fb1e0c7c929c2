#pragma once

// Sparse trivariate polynomials (perturbation terms a_ijk x^i y^j z^k) and
// dense univariate polynomials with Sturm-sequence real root isolation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace triosc {

/// Trivariate polynomial stored as a sparse exponent->coefficient map.
/// Zero-coefficient terms are never stored.
class MultiPoly {
public:
    using Key = std::array<int, 3>;  // exponents (i, j, k) of x^i y^j z^k

    MultiPoly() = default;

    static MultiPoly constant(double c) {
        MultiPoly p;
        p.add_term(0, 0, 0, c);
        return p;
    }

    /// x, y or z for axis 0, 1, 2.
    static MultiPoly variable(int axis) {
        MultiPoly p;
        Key k{0, 0, 0};
        k[static_cast<std::size_t>(axis)] = 1;
        p.terms_[k] = 1.0;
        return p;
    }

    void add_term(int i, int j, int k, double coeff) {
        if (i < 0 || j < 0 || k < 0)
            throw std::invalid_argument("MultiPoly: negative exponent");
        if (coeff == 0.0)
            return;
        const Key key{i, j, k};
        auto it = terms_.find(key);
        if (it == terms_.end()) {
            terms_.emplace(key, coeff);
        } else {
            it->second += coeff;
            if (it->second == 0.0)
                terms_.erase(it);
        }
    }

    const std::map<Key, double>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }

    /// Max total degree i+j+k; 0 for the zero polynomial.
    int degree() const {
        int d = 0;
        for (const auto& [key, c] : terms_)
            d = std::max(d, key[0] + key[1] + key[2]);
        return d;
    }

    double eval(double x, double y, double z) const {
        double s = 0.0;
        for (const auto& [key, c] : terms_)
            s += c * ipow(x, key[0]) * ipow(y, key[1]) * ipow(z, key[2]);
        return s;
    }

    MultiPoly derivative(int axis) const {
        MultiPoly out;
        for (const auto& [key, c] : terms_) {
            const int e = key[static_cast<std::size_t>(axis)];
            if (e == 0)
                continue;
            Key k2 = key;
            k2[static_cast<std::size_t>(axis)] = e - 1;
            out.add_term(k2[0], k2[1], k2[2], c * e);
        }
        return out;
    }

    MultiPoly& operator+=(const MultiPoly& o) {
        for (const auto& [key, c] : o.terms_)
            add_term(key[0], key[1], key[2], c);
        return *this;
    }

    friend MultiPoly operator+(MultiPoly a, const MultiPoly& b) {
        a += b;
        return a;
    }

    friend MultiPoly operator*(const MultiPoly& a, const MultiPoly& b) {
        MultiPoly out;
        for (const auto& [ka, ca] : a.terms_)
            for (const auto& [kb, cb] : b.terms_)
                out.add_term(ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2], ca * cb);
        return out;
    }

    friend MultiPoly operator*(double s, const MultiPoly& p) {
        MultiPoly out;
        for (const auto& [key, c] : p.terms_)
            out.add_term(key[0], key[1], key[2], s * c);
        return out;
    }

    friend bool operator==(const MultiPoly& a, const MultiPoly& b) {
        return a.terms_ == b.terms_;
    }

private:
    static double ipow(double v, int e) {
        double r = 1.0;
        for (int q = 0; q < e; ++q)
            r *= v;
        return r;
    }

    std::map<Key, double> terms_;
};

/// Dense univariate polynomial, coeffs[d] multiplies s^d.
class UniPoly {
public:
    UniPoly() = default;
    explicit UniPoly(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) { trim(); }

    static UniPoly zero() { return UniPoly{}; }

    const std::vector<double>& coeffs() const { return coeffs_; }
    bool is_zero() const { return coeffs_.empty(); }
    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }  // -1 for zero

    double leading() const { return coeffs_.empty() ? 0.0 : coeffs_.back(); }

    double eval(double s) const {
        double acc = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it)
            acc = acc * s + *it;
        return acc;
    }

    UniPoly derivative() const {
        if (coeffs_.size() <= 1)
            return UniPoly{};
        std::vector<double> d(coeffs_.size() - 1);
        for (std::size_t i = 1; i < coeffs_.size(); ++i)
            d[i - 1] = coeffs_[i] * static_cast<double>(i);
        return UniPoly(std::move(d));
    }

    double max_abs_coeff() const {
        double m = 0.0;
        for (double c : coeffs_)
            m = std::max(m, std::abs(c));
        return m;
    }

    /// Divide each coefficient by a positive scale (sign preserving).
    void scale_down(double s) {
        for (double& c : coeffs_)
            c /= s;
    }

    /// Polynomial division: num = quot * den + rem with deg(rem) < deg(den).
    static void divmod(const UniPoly& num, const UniPoly& den, UniPoly& quot, UniPoly& rem) {
        if (den.is_zero())
            throw std::invalid_argument("UniPoly: division by zero polynomial");
        std::vector<double> r = num.coeffs_;
        const int dn = den.degree();
        const double lead = den.coeffs_.back();
        std::vector<double> q(
            num.degree() >= dn ? static_cast<std::size_t>(num.degree() - dn + 1) : 0, 0.0);
        for (int d = num.degree(); d >= dn; --d) {
            const double f = r[static_cast<std::size_t>(d)] / lead;
            q[static_cast<std::size_t>(d - dn)] = f;
            for (int i = 0; i <= dn; ++i)
                r[static_cast<std::size_t>(d - dn + i)] -= f * den.coeffs_[static_cast<std::size_t>(i)];
            r[static_cast<std::size_t>(d)] = 0.0;  // cancel rounding residue of the pivot
        }
        quot = UniPoly(std::move(q));
        rem = UniPoly(std::move(r));
    }

private:
    void trim() {
        while (!coeffs_.empty() && coeffs_.back() == 0.0)
            coeffs_.pop_back();
    }

    std::vector<double> coeffs_;
};

namespace detail {

// Remainders whose coefficients fall below this fraction of the chain's
// opening scale are treated as zero.
inline constexpr double kSturmZeroTol = 1e-13;

inline UniPoly drop_small(const UniPoly& p, double floor) {
    if (p.max_abs_coeff() <= floor)
        return UniPoly::zero();
    std::vector<double> c = p.coeffs();
    for (double& v : c)
        if (std::abs(v) <= floor)
            v = 0.0;
    return UniPoly(std::move(c));
}

}  // namespace detail

/// Sturm chain p0 = p, p1 = p', p_{k+1} = -rem(p_{k-1}, p_k).
/// Each entry is rescaled to unit max coefficient (signs preserved).
inline std::vector<UniPoly> sturm_chain(const UniPoly& p) {
    std::vector<UniPoly> chain;
    if (p.is_zero())
        return chain;
    UniPoly p0 = p;
    p0.scale_down(p0.max_abs_coeff());
    chain.push_back(p0);
    UniPoly p1 = p0.derivative();
    if (p1.is_zero())
        return chain;
    p1.scale_down(p1.max_abs_coeff());
    chain.push_back(p1);
    while (chain.back().degree() > 0) {
        UniPoly quot, rem;
        UniPoly::divmod(chain[chain.size() - 2], chain.back(), quot, rem);
        rem = detail::drop_small(rem, detail::kSturmZeroTol);
        if (rem.is_zero())
            break;
        std::vector<double> neg = rem.coeffs();
        for (double& c : neg)
            c = -c;
        UniPoly next{std::move(neg)};
        next.scale_down(next.max_abs_coeff());
        chain.push_back(std::move(next));
    }
    return chain;
}

/// Number of sign changes of the chain evaluated at s (zeros skipped).
inline int sturm_sign_variations(const std::vector<UniPoly>& chain, double s) {
    int changes = 0;
    int prev = 0;
    for (const auto& q : chain) {
        const double v = q.eval(s);
        const int sg = (v > 0.0) - (v < 0.0);
        if (sg == 0)
            continue;
        if (prev != 0 && sg != prev)
            ++changes;
        prev = sg;
    }
    return changes;
}

/// Count of distinct real roots in (lo, hi].
inline int sturm_count_roots(const std::vector<UniPoly>& chain, double lo, double hi) {
    return sturm_sign_variations(chain, lo) - sturm_sign_variations(chain, hi);
}

namespace detail {

inline void isolate_rec(const std::vector<UniPoly>& chain, double lo, double hi, int vlo, int vhi,
                        std::vector<std::pair<double, double>>& out) {
    const int n = vlo - vhi;
    if (n <= 0)
        return;
    const double width_floor = 1e-14 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    if (n == 1 || hi - lo < width_floor) {
        out.emplace_back(lo, hi);  // cluster narrower than resolution counts once
        return;
    }
    const double mid = 0.5 * (lo + hi);
    const int vmid = sturm_sign_variations(chain, mid);
    isolate_rec(chain, lo, mid, vlo, vmid, out);
    isolate_rec(chain, mid, hi, vmid, vhi, out);
}

}  // namespace detail

/// Squarefree part of p: the Sturm chain ends at gcd(p, p'), so a chain tail
/// of positive degree gets divided out.
inline UniPoly squarefree_part(const UniPoly& p) {
    if (p.is_zero() || p.degree() <= 1)
        return p;
    const auto chain = sturm_chain(p);
    if (chain.back().degree() == 0)
        return p;
    UniPoly quot, rem;
    UniPoly::divmod(chain.front(), chain.back(), quot, rem);
    return squarefree_part(quot);
}

/// Intervals (lo, hi] each containing exactly one distinct real root of p.
/// For reliable polishing run this on the squarefree part.
inline std::vector<std::pair<double, double>> isolate_roots(const UniPoly& p, double lo, double hi) {
    std::vector<std::pair<double, double>> out;
    if (p.is_zero() || p.degree() == 0 || hi <= lo)
        return out;
    auto chain = sturm_chain(p);
    if (chain.back().degree() > 0)
        return isolate_roots(squarefree_part(p), lo, hi);
    detail::isolate_rec(chain, lo, hi, sturm_sign_variations(chain, lo),
                        sturm_sign_variations(chain, hi), out);
    return out;
}

/// Refine the single root of p inside (lo, hi]: bisection then Newton polish.
inline double polish_root(const UniPoly& p, double lo, double hi) {
    double flo = p.eval(lo);
    double fhi = p.eval(hi);
    if (fhi == 0.0)
        return hi;
    // The interval is half-open: a zero at lo belongs to the neighbour
    // bracket, so step just inside before bisecting.
    for (int nudge = 0; flo == 0.0 && nudge < 8; ++nudge) {
        lo += (hi - lo) * 1e-12;
        flo = p.eval(lo);
    }
    if ((flo > 0) == (fhi > 0)) {
        // Root of even local multiplicity or boundary rounding: fall back to
        // the derivative's sign structure via a dense scan of the bracket.
        const int kScan = 64;
        double best = lo, bestv = std::abs(flo);
        for (int i = 1; i <= kScan; ++i) {
            const double s = lo + (hi - lo) * i / kScan;
            const double v = std::abs(p.eval(s));
            if (v < bestv) {
                best = s;
                bestv = v;
            }
        }
        return best;
    }
    double a = lo, b = hi, fa = flo;
    for (int it = 0; it < 200 && b - a > 1e-16 * std::max(1.0, std::abs(b)); ++it) {
        const double m = 0.5 * (a + b);
        const double fm = p.eval(m);
        if (fm == 0.0)
            return m;
        if ((fa > 0) == (fm > 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    double root = 0.5 * (a + b);
    const UniPoly dp = p.derivative();
    for (int it = 0; it < 4; ++it) {
        const double f = p.eval(root);
        const double d = dp.eval(root);
        if (d == 0.0)
            break;
        const double next = root - f / d;
        if (next < a || next > b)
            break;
        root = next;
    }
    return root;
}

/// All distinct real roots of p in (lo, hi], ascending.
inline std::vector<double> real_roots_in(const UniPoly& p, double lo, double hi) {
    const UniPoly sf = squarefree_part(p);
    std::vector<double> roots;
    for (const auto& [a, b] : isolate_roots(sf, lo, hi))
        roots.push_back(polish_root(sf, a, b));
    std::sort(roots.begin(), roots.end());
    return roots;
}

}  // namespace triosc
