#pragma once

// First-order averaging of the perturbed system around the isochronous plane:
// the eigenbasis change, the trigonometric moment table, the averaged odd
// polynomial in the radius, its simple positive roots and the Chebyshev bound
// on how many of them there can be.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "triosc/model.hpp"
#include "triosc/polynomial.hpp"

namespace triosc {

struct IdenticallyZero : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct QuadratureNoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A root counts as simple only if the derivative there clears this bound.
inline constexpr double kSimpleRootTol = 1e-8;

struct Mat3 {
    double m[3][3] = {};

    static Mat3 identity() {
        Mat3 e;
        e.m[0][0] = e.m[1][1] = e.m[2][2] = 1.0;
        return e;
    }

    friend Mat3 operator*(const Mat3& a, const Mat3& b) {
        Mat3 c;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k)
                    c.m[i][j] += a.m[i][k] * b.m[k][j];
        return c;
    }

    friend State3 operator*(const Mat3& a, const State3& v) {
        return {a.m[0][0] * v.x + a.m[0][1] * v.y + a.m[0][2] * v.z,
                a.m[1][0] * v.x + a.m[1][1] * v.y + a.m[1][2] * v.z,
                a.m[2][0] * v.x + a.m[2][1] * v.y + a.m[2][2] * v.z};
    }
};

inline double max_abs_diff(const Mat3& a, const Mat3& b) {
    double d = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            d = std::max(d, std::abs(a.m[i][j] - b.m[i][j]));
    return d;
}

/// Linear part of the unperturbed system, [[0,1,0],[-b,-a,-ab],[1,0,0]].
inline Mat3 linear_part_unperturbed(const Params& prm) {
    Mat3 A;
    A.m[0][1] = 1.0;
    A.m[1][0] = -prm.b;
    A.m[1][1] = -prm.a;
    A.m[1][2] = -prm.a * prm.b;
    A.m[2][0] = 1.0;
    return A;
}

/// Spectrum {-a, +i sqrt(b), -i sqrt(b)} of the unperturbed linear part.
inline std::array<std::complex<double>, 3> spectrum_unperturbed(const Params& prm) {
    const double w = std::sqrt(prm.b);
    return {std::complex<double>(-prm.a, 0.0), std::complex<double>(0.0, w),
            std::complex<double>(0.0, -w)};
}

struct JordanTransform {
    Mat3 B;      // eigenvector matrix
    Mat3 B_inv;  // closed-form inverse
    Mat3 J;      // rotation block diag(+-i sqrt(b)) realified, plus -a
};

/// Explicit eigenbasis of the unperturbed linear part: B J B^-1 = A.
inline JordanTransform jordan_transform(const Params& prm) {
    if (prm.b <= 0.0)
        throw std::invalid_argument("jordan_transform: b must be positive");
    if (prm.a == 0.0)
        throw std::invalid_argument("jordan_transform: a must be nonzero");
    const double a = prm.a, b = prm.b;
    const double w = std::sqrt(b);
    JordanTransform t;
    t.B.m[0][0] = 0.0;
    t.B.m[0][1] = w;
    t.B.m[0][2] = -a;
    t.B.m[1][0] = -b;
    t.B.m[1][1] = 0.0;
    t.B.m[1][2] = a * a;
    t.B.m[2][0] = 1.0;
    t.B.m[2][1] = 0.0;
    t.B.m[2][2] = 1.0;
    const double den = w * (a * a + b);
    t.B_inv.m[0][0] = 0.0;
    t.B_inv.m[0][1] = -w / den;
    t.B_inv.m[0][2] = a * a * w / den;
    t.B_inv.m[1][0] = (a * a + b) / den;
    t.B_inv.m[1][1] = a / den;
    t.B_inv.m[1][2] = a * b / den;
    t.B_inv.m[2][0] = 0.0;
    t.B_inv.m[2][1] = w / den;
    t.B_inv.m[2][2] = b * w / den;
    t.J.m[0][1] = w;
    t.J.m[1][0] = -w;
    t.J.m[2][2] = -a;
    return t;
}

/// n!! with the empty-product convention (-1)!! = 0!! = 1.
inline long long double_factorial(int n) {
    if (n < -1)
        throw std::invalid_argument("double_factorial: n must be >= -1");
    long long r = 1;
    for (int k = n; k >= 2; k -= 2)
        r *= k;
    return r;
}

/// I(p, q) = integral over one period 2 pi / sqrt(b) of sin^p(sqrt(b) t)
/// cos^q(sqrt(b) t): zero when p or q is odd, otherwise
/// 2 pi (p-1)!! (q-1)!! / (sqrt(b) (p+q)!!).
inline double trig_moment(int p, int q, double b) {
    if (p < 0 || q < 0)
        throw std::invalid_argument("trig_moment: negative exponent");
    if (b <= 0.0)
        throw std::invalid_argument("trig_moment: b must be positive");
    if (p % 2 == 1 || q % 2 == 1)
        return 0.0;
    const double num = 2.0 * std::numbers::pi *
                       static_cast<double>(double_factorial(p - 1)) *
                       static_cast<double>(double_factorial(q - 1));
    return num / (std::sqrt(b) * static_cast<double>(double_factorial(p + q)));
}

/// Odd univariate polynomial in the radius with the 1/(2 pi (a^2+b))
/// prefactor already folded into the coefficients.
struct AveragedPoly {
    std::map<int, double> coeffs;  // odd degree -> coefficient

    bool identically_zero() const { return coeffs.empty(); }

    int degree() const {
        int d = 0;
        for (const auto& [deg, c] : coeffs)
            d = std::max(d, deg);
        return d;
    }

    double eval(double r) const {
        const double s = r * r;
        double acc = 0.0;
        int top = degree();
        for (int d = (top % 2 == 1) ? top : top - 1; d >= 1; d -= 2) {
            const auto it = coeffs.find(d);
            acc = acc * s + (it == coeffs.end() ? 0.0 : it->second);
        }
        return acc * r;
    }

    double derivative_eval(double r) const {
        double acc = 0.0;
        for (const auto& [d, c] : coeffs)
            acc += c * d * std::pow(r, d - 1);
        return acc;
    }

    /// P with F(r) = r * P(r^2).
    UniPoly radial_square_poly() const {
        const int top = degree();
        std::vector<double> c(static_cast<std::size_t>(top / 2) + 1, 0.0);
        for (const auto& [d, v] : coeffs)
            c[static_cast<std::size_t>((d - 1) / 2)] = v;
        return UniPoly(std::move(c));
    }
};

/// Closed-form averaged function. A term a_ijk x^i y^j z^k contributes to the
/// coefficient of r^(i+j+k) only when i+j+k is odd; the two parity branches
/// carry the moment values with the common 2 pi cancelled against the
/// prefactor:
///   i even:  a_ijk (-1)^j b^(i/2+j)       (i-1)!! (j+k)!!   / ((d+1)!! (a^2+b))
///   i odd:  -a a_ijk (-1)^j b^((i-1)/2+j) i!! (j+k-1)!!     / ((d+1)!! (a^2+b))
inline AveragedPoly averaged_function(const Params& prm, const MultiPoly& F) {
    if (prm.b <= 0.0)
        throw std::invalid_argument("averaged_function: b must be positive");
    AveragedPoly out;
    const double scale = prm.a * prm.a + prm.b;
    for (const auto& [key, aijk] : F.terms()) {
        const int i = key[0], j = key[1], k = key[2];
        const int d = i + j + k;
        if (d % 2 == 0)
            continue;
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        double contrib;
        if (i % 2 == 0) {
            // j + k odd here, so (j+k)!! and (i-1)!! are both defined.
            const double num = static_cast<double>(double_factorial(i - 1)) *
                               static_cast<double>(double_factorial(j + k));
            contrib = aijk * sign * std::pow(prm.b, i / 2 + j) * num /
                      (static_cast<double>(double_factorial(d + 1)) * scale);
        } else {
            const double num = static_cast<double>(double_factorial(i)) *
                               static_cast<double>(double_factorial(j + k - 1));
            contrib = -prm.a * aijk * sign * std::pow(prm.b, (i - 1) / 2 + j) * num /
                      (static_cast<double>(double_factorial(d + 1)) * scale);
        }
        out.coeffs[d] += contrib;
        if (out.coeffs[d] == 0.0)
            out.coeffs.erase(d);
    }
    return out;
}

namespace detail {

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int n) : nodes(n), weights(n) {
        for (int i = 0; i < n; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15)
                    break;
            }
            nodes[static_cast<std::size_t>(i)] = x;
            weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

/// Composite Gauss-Legendre with panel doubling until two consecutive
/// refinements agree to abs_tol plus a small multiple of the integrand scale
/// (the attainable floor in double precision).
template <class F>
double adaptive_quadrature(F&& f, double lo, double hi, double abs_tol) {
    static const GaussLegendre rule(20);
    double scale = 0.0;
    auto composite = [&](int panels) {
        double total = 0.0;
        scale = 0.0;
        const double w = (hi - lo) / panels;
        for (int p = 0; p < panels; ++p) {
            const double a = lo + p * w;
            const double mid = a + 0.5 * w;
            double acc = 0.0, mag = 0.0;
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double v = rule.weights[q] * f(mid + 0.5 * w * rule.nodes[q]);
                acc += v;
                mag += std::abs(v);
            }
            total += 0.5 * w * acc;
            scale += 0.5 * w * mag;
        }
        return total;
    };
    double prev = composite(4);
    for (int panels = 8; panels <= 4096; panels *= 2) {
        const double cur = composite(panels);
        if (std::abs(cur - prev) <= abs_tol + 1e-14 * scale)
            return cur;
        prev = cur;
    }
    throw QuadratureNoConvergence("adaptive_quadrature: tolerance not reached");
}

}  // namespace detail

/// Independent oracle for averaged_function: numerical quadrature of
/// (sqrt(b) cos - a sin) F(sqrt(b) r sin, -b r cos, r cos) over one period,
/// scaled by 1/(2 pi (a^2+b)).
inline double averaged_quadrature(const Params& prm, const MultiPoly& F, double r,
                                  double abs_tol = 1e-12) {
    if (prm.b <= 0.0)
        throw std::invalid_argument("averaged_quadrature: b must be positive");
    if (r < 0.0)
        throw std::invalid_argument("averaged_quadrature: r must be nonnegative");
    const double a = prm.a, b = prm.b;
    const double w = std::sqrt(b);
    auto integrand = [&](double th) {
        const double c = std::cos(w * th), s = std::sin(w * th);
        return (w * c - a * s) * F.eval(w * r * s, -b * r * c, r * c);
    };
    const double integral =
        detail::adaptive_quadrature(integrand, 0.0, 2.0 * std::numbers::pi / w, abs_tol);
    return integral / (2.0 * std::numbers::pi * (a * a + b));
}

struct RootInfo {
    double r = 0.0;
    double derivative = 0.0;
};

/// Simple positive roots of the averaged polynomial in (0, r_max], found by
/// Sturm isolation of P(s), s = r^2, and polished to ~1e-12.
inline std::vector<RootInfo> simple_positive_roots(const AveragedPoly& fbar, double r_max) {
    if (fbar.identically_zero())
        throw IdenticallyZero("simple_positive_roots: averaged function vanishes identically");
    const UniPoly P = fbar.radial_square_poly();
    std::vector<RootInfo> out;
    for (double s : real_roots_in(P, 0.0, r_max * r_max)) {
        if (s <= 0.0)
            continue;
        const double r = std::sqrt(s);
        const double d = fbar.derivative_eval(r);
        if (std::abs(d) > kSimpleRootTol)
            out.push_back({r, d});
    }
    return out;
}

/// Sharp bound on simple positive roots: (n+1)/2 for odd n, n/2 for even n.
inline int cycle_bound(int n) {
    if (n < 0)
        throw std::invalid_argument("cycle_bound: n must be >= 0");
    return (n % 2 == 1) ? (n + 1) / 2 : n / 2;
}

/// Wronskian check of {r, r^3, ..., r^(2k+1)} at each sample: the family is
/// an extended complete Chebyshev system on r > 0, so every Wronskian must be
/// nonzero. The entry in row m, column l is the falling factorial
/// fall(2l+1, m) times r^(2l+1-m); scaling row m by r^m and column l by
/// r^-(2l+1) factors the matrix as W(r) = det[fall] * r^((k+1)^2 - k(k+1)/2),
/// so nonvanishing is decided by the well-conditioned combinatorial
/// determinant together with positivity of the power factor.
inline bool ect_check(int k, const std::vector<double>& sample_points) {
    if (k < 0)
        throw std::invalid_argument("ect_check: k must be >= 0");
    const int n = k + 1;
    for (double r : sample_points)
        if (r <= 0.0)
            throw std::invalid_argument("ect_check: sample points must be positive");

    std::vector<std::vector<double>> M(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(n)));
    for (int col = 0; col < n; ++col) {
        const int e = 2 * col + 1;
        double fall = 1.0;
        for (int row = 0; row < n; ++row) {
            M[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] =
                (row > e) ? 0.0 : fall;
            fall *= (e - row);
        }
    }
    for (int col = 0; col < n; ++col) {
        double cmax = 0.0;
        for (int row = 0; row < n; ++row)
            cmax = std::max(cmax,
                            std::abs(M[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]));
        if (cmax == 0.0)
            return false;
        for (int row = 0; row < n; ++row)
            M[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] /= cmax;
    }
    double det = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int row = col + 1; row < n; ++row)
            if (std::abs(M[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]) >
                std::abs(M[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)]))
                piv = row;
        if (piv != col) {
            std::swap(M[static_cast<std::size_t>(piv)], M[static_cast<std::size_t>(col)]);
            det = -det;
        }
        const double d = M[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
        det *= d;
        if (d == 0.0)
            return false;
        for (int row = col + 1; row < n; ++row) {
            const double f = M[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] / d;
            for (int c2 = col; c2 < n; ++c2)
                M[static_cast<std::size_t>(row)][static_cast<std::size_t>(c2)] -=
                    f * M[static_cast<std::size_t>(col)][static_cast<std::size_t>(c2)];
        }
    }
    if (std::abs(det) <= 1e-10)
        return false;
    // The r-dependent factor r^power with power > 0 is finite and positive at
    // every admissible sample, so it cannot introduce a zero.
    for (double r : sample_points) {
        const int power = n * n - n * (n - 1) / 2;
        if (!std::isfinite(std::pow(r, power)))
            return false;
    }
    return true;
}

struct CyclePrediction {
    std::vector<RootInfo> roots;
    int count = 0;
    int bound = 0;
    bool attained = false;
};

/// End-to-end prediction: averaged function, its simple positive roots, and
/// the degree bound they must respect.
inline CyclePrediction predict_limit_cycles(const Params& prm, const MultiPoly& F, double r_max) {
    if (prm.b <= 0.0)
        throw std::invalid_argument("predict_limit_cycles: b must be positive");
    if (prm.a == 0.0)
        throw std::invalid_argument("predict_limit_cycles: a must be nonzero");
    const AveragedPoly fbar = averaged_function(prm, F);
    if (fbar.identically_zero())
        throw IdenticallyZero("predict_limit_cycles: averaged function vanishes identically");
    CyclePrediction pred;
    pred.roots = simple_positive_roots(fbar, r_max);
    pred.count = static_cast<int>(pred.roots.size());
    pred.bound = cycle_bound(F.degree());
    pred.attained = pred.count == pred.bound;
    return pred;
}

/// Inversion helper: a perturbation built from pure x powers whose averaged
/// function has exactly the requested odd coefficients. The x-only system is
/// diagonal, one coefficient per target degree.
inline MultiPoly design_polynomial(const Params& prm, const std::map<int, double>& target) {
    if (prm.b <= 0.0)
        throw std::invalid_argument("design_polynomial: b must be positive");
    if (prm.a == 0.0)
        throw std::invalid_argument("design_polynomial: a must be nonzero");
    MultiPoly F;
    const double scale = prm.a * prm.a + prm.b;
    for (const auto& [d, target_coeff] : target) {
        if (d < 1 || d % 2 == 0)
            throw std::invalid_argument("design_polynomial: degrees must be odd and positive");
        const double gain = -prm.a * std::pow(prm.b, (d - 1) / 2) *
                            static_cast<double>(double_factorial(d)) /
                            (static_cast<double>(double_factorial(d + 1)) * scale);
        F.add_term(d, 0, 0, target_coeff / gain);
    }
    return F;
}

}  // namespace triosc
