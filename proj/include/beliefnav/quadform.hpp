#pragma once

// Distribution of a positive-definite quadratic form Q = x^T A x, x ~ N(mu, Sigma), evaluated through
// its alternating power series in y, together with the Cauchy-type truncation bound on the tail.
//
// Canonical form: Q = sum_i lambda_i (u_i + b_i)^2 with u ~ N(0, I), where lambda are the eigenvalues of
// Sigma^{1/2} A Sigma^{1/2} = P diag(lambda) P^T and b = P^T Sigma^{-1/2} mu.
//
//   F(y) = sum_k (-1)^k c_k y^{n/2+k} / Gamma(n/2+k+1)
//   c_0  = exp(-1/2 sum b_i^2) prod (2 lambda_i)^{-1/2}
//   c_k  = (1/k) sum_{i<k} d_{k-i} c_i
//   d_k  = 1/2 sum_i (1 - k b_i^2) (2 lambda_i)^{-k}
//
// The series alternates and loses roughly 0.45 * y / (2 min lambda) decimal digits to cancellation, so the
// evaluator escalates through double-double, quad, 50- and 100-digit floating point while the rounding estimate
// exceeds the requested tolerance. Far in either tail a Chernoff bound settles the cdf without the series.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/float128.hpp>

#include "beliefnav/double_double.hpp"
#include "beliefnav/gaussian.hpp"

namespace bnav {

struct QuadFormCanonical {
    Vector lambdas;
    Vector offsets;  // b

    [[nodiscard]] int dim() const { return static_cast<int>(lambdas.size()); }
    [[nodiscard]] double offset_norm_sq() const { return offsets.squaredNorm(); }
    /// E[Q] = sum lambda_i (1 + b_i^2)
    [[nodiscard]] double mean() const {
        return (lambdas.array() * (1.0 + offsets.array().square())).sum();
    }
    /// Var[Q] = sum 2 lambda_i^2 (1 + 2 b_i^2)
    [[nodiscard]] double variance() const {
        return (2.0 * lambdas.array().square() * (1.0 + 2.0 * offsets.array().square())).sum();
    }
};

inline constexpr double kMaxEigenSpread = 1e12;
inline constexpr int kHardTermCap = 500;

namespace detail {

inline void validate_canonical(const QuadFormCanonical &q) {
    if (q.lambdas.size() == 0 || q.lambdas.size() != q.offsets.size()) {
        throw std::invalid_argument("quadratic form: lambdas/offsets size mismatch");
    }
    if (q.lambdas.minCoeff() <= 0.0) throw NumericalError("quadratic form: eigenvalues must be positive");
    if (q.lambdas.maxCoeff() / q.lambdas.minCoeff() > kMaxEigenSpread) {
        throw NumericalError("quadratic form: eigenvalue spread exceeds 1e12");
    }
    if (!q.offsets.allFinite()) throw NumericalError("quadratic form: non-finite offsets");
}

}  // namespace detail

/// Reduce x^T A x with x ~ N(mu, sigma) to its canonical (lambda, b) form.
inline QuadFormCanonical canonicalize(const Vector &mu, const Matrix &sigma, const Matrix &a) {
    if (mu.size() != sigma.rows() || sigma.rows() != a.rows()) {
        throw std::invalid_argument("canonicalize: dimension mismatch");
    }
    if (!is_positive_definite(sigma)) throw NumericalError("canonicalize: sigma is not positive definite");
    if (!is_positive_definite(a)) throw NumericalError("canonicalize: A is not positive definite");
    const Matrix root = sym_sqrt(sigma);
    const Matrix inv_root = sym_inv_sqrt(sigma);
    const SymEig e = sym_eig(symmetrize(root * a * root));
    QuadFormCanonical q{e.values, e.vectors.transpose() * (inv_root * mu)};
    detail::validate_canonical(q);
    return q;
}

struct SeriesCoefficients {
    std::vector<double> c;  // c[0..K]
    std::vector<double> d;  // d[0] unused, d[1..K]
};

/// Raw coefficients exactly as the recursion defines them (double precision, may underflow for large |b|).
inline SeriesCoefficients series_coefficients(const QuadFormCanonical &q, int max_k) {
    detail::validate_canonical(q);
    if (max_k < 0) throw std::invalid_argument("series_coefficients: K must be >= 0");
    SeriesCoefficients out;
    out.c.resize(static_cast<std::size_t>(max_k) + 1);
    out.d.assign(static_cast<std::size_t>(max_k) + 1, 0.0);
    double log_c0 = -0.5 * q.offset_norm_sq();
    for (int i = 0; i < q.dim(); ++i) log_c0 -= 0.5 * std::log(2.0 * q.lambdas[i]);
    out.c[0] = std::exp(log_c0);
    for (int k = 1; k <= max_k; ++k) {
        double dk = 0.0;
        for (int i = 0; i < q.dim(); ++i) {
            const double b2 = q.offsets[i] * q.offsets[i];
            dk += (1.0 - k * b2) * std::pow(2.0 * q.lambdas[i], -k);
        }
        out.d[k] = 0.5 * dk;
        double acc = 0.0;
        for (int i = 0; i < k; ++i) acc += out.d[k - i] * out.c[i];
        out.c[k] = acc / k;
    }
    return out;
}

// ---------------------------------------------------------------------------------------------------------
// Truncation bounds

/// log m(rho) with m(rho) = prod lambda^{-1/2} exp(-1/2 sum b^2 lambda / (lambda + rho)) prod (1 - rho/lambda)^{-1/2}
inline double log_m_rho(const QuadFormCanonical &q, double rho) {
    double out = 0.0;
    for (int j = 0; j < q.dim(); ++j) {
        const double lam = q.lambdas[j];
        const double b2 = q.offsets[j] * q.offsets[j];
        out += -0.5 * std::log(lam) - 0.5 * b2 * lam / (lam + rho) - 0.5 * std::log1p(-rho / lam);
    }
    return out;
}

namespace detail {

inline void check_rho(const QuadFormCanonical &q, double rho) {
    if (!(rho > 0.0) || !(rho < q.lambdas.minCoeff())) {
        throw std::invalid_argument("truncation bound: rho must lie in (0, min lambda)");
    }
}

// log E(N) for the cdf tail after terms 0..N.
inline double log_cdf_bound(const QuadFormCanonical &q, double rho, double y, int n_last) {
    const double a = 0.5 * q.dim();
    const double x = y / (2.0 * rho);
    return log_m_rho(q, rho) - std::lgamma(a) - std::lgamma(n_last + 2.0) + a * std::log(0.5 * y) +
           (n_last + 1.0) * std::log(x) + x;
}

// log e(N) for the pdf tail after terms 0..N.
inline double log_pdf_bound(const QuadFormCanonical &q, double rho, double y, int n_last) {
    const double a = 0.5 * q.dim();
    const double x = y / (2.0 * rho);
    return log_m_rho(q, rho) - std::lgamma(a) - std::lgamma(n_last + 1.0) + (a - 1.0) * std::log(0.5 * y) +
           (n_last + 1.0) * std::log(x) + x;
}

}  // namespace detail

/// E(N): upper bound on |F(y) - F_N(y)|, where F_N keeps terms k = 0..N. Valid for n >= 2.
inline double truncation_bound(const QuadFormCanonical &q, double rho, double y, int n_last) {
    detail::validate_canonical(q);
    detail::check_rho(q, rho);
    if (y < 0.0 || n_last < 0) throw std::invalid_argument("truncation_bound: y >= 0 and N >= 0 required");
    if (y == 0.0) return 0.0;
    return std::exp(detail::log_cdf_bound(q, rho, y, n_last));
}

/// e(N): the analogous bound for the density series.
inline double pdf_truncation_bound(const QuadFormCanonical &q, double rho, double y, int n_last) {
    detail::validate_canonical(q);
    detail::check_rho(q, rho);
    if (y <= 0.0 || n_last < 0) throw std::invalid_argument("pdf_truncation_bound: y > 0 and N >= 0 required");
    return std::exp(detail::log_pdf_bound(q, rho, y, n_last));
}

/// How rho is chosen for the bound certificate.
struct RhoPolicy {
    double fraction = 0.5;  // rho = fraction * min lambda
    bool optimize = false;  // minimise the bound over rho in (0, min lambda) at every N instead

    [[nodiscard]] double fixed_rho(const QuadFormCanonical &q) const { return fraction * q.lambdas.minCoeff(); }
};

namespace detail {

// Smallest log-bound over rho for a given N. The log bound is close to convex in rho; a coarse scan
// followed by golden-section refinement is plenty.
template <class LogBound>
double minimise_over_rho(const QuadFormCanonical &q, LogBound &&log_bound) {
    const double lmin = q.lambdas.minCoeff();
    constexpr int kScan = 24;
    double best_t = 0.5;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i < kScan; ++i) {
        const double t = static_cast<double>(i) / kScan;
        const double v = log_bound(t * lmin);
        if (v < best) {
            best = v;
            best_t = t;
        }
    }
    double lo = std::max(1e-9, best_t - 1.0 / kScan);
    double hi = std::min(1.0 - 1e-12, best_t + 1.0 / kScan);
    constexpr double g = 0.6180339887498949;
    double x1 = hi - g * (hi - lo);
    double x2 = lo + g * (hi - lo);
    double f1 = log_bound(x1 * lmin);
    double f2 = log_bound(x2 * lmin);
    for (int it = 0; it < 40; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = log_bound(x1 * lmin);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = log_bound(x2 * lmin);
        }
    }
    return std::min({best, f1, f2});
}

inline double log_bound_for(const QuadFormCanonical &q, const RhoPolicy &policy, double y, int n_last, bool pdf) {
    auto eval = [&](double rho) {
        return pdf ? log_pdf_bound(q, rho, y, n_last) : log_cdf_bound(q, rho, y, n_last);
    };
    if (!policy.optimize) return eval(policy.fixed_rho(q));
    return minimise_over_rho(q, eval);
}

}  // namespace detail

namespace detail {

struct CertifyingTerms {
    int n_last = -1;  // smallest certified N, or -1 when none up to the cap
    double log_bound = std::numeric_limits<double>::infinity();
};

// Smallest N with log bound <= log_tol. For a fixed rho the bound is explicit in N, with
// log E(N+1) - log E(N) = log(y / 2 rho) - log(N + 2) (N + 1 for the pdf), so a linear scan suffices.
// The optimised policy takes the best N over a rho grid, then steps down while the fully optimised
// bound still certifies.
inline CertifyingTerms certifying_terms(const QuadFormCanonical &q, const RhoPolicy &policy, double y,
                                        double log_tol, bool pdf, int cap) {
    auto first_for_rho = [&](double rho) {
        CertifyingTerms c;
        double lb = pdf ? log_pdf_bound(q, rho, y, 0) : log_cdf_bound(q, rho, y, 0);
        const double lx = std::log(y / (2.0 * rho));
        for (int n = 0; n <= cap; ++n) {
            if (lb <= log_tol) {
                c.n_last = n;
                c.log_bound = lb;
                return c;
            }
            lb += lx - std::log(n + (pdf ? 1.0 : 2.0));
        }
        return c;
    };
    if (!policy.optimize) return first_for_rho(policy.fixed_rho(q));

    const double lmin = q.lambdas.minCoeff();
    constexpr int kGrid = 48;
    CertifyingTerms best;
    for (int i = 1; i < kGrid; ++i) {
        const CertifyingTerms c = first_for_rho(lmin * i / kGrid);
        if (c.n_last < 0) continue;
        if (best.n_last < 0 || c.n_last < best.n_last ||
            (c.n_last == best.n_last && c.log_bound < best.log_bound)) {
            best = c;
        }
    }
    if (best.n_last < 0) return best;
    best.log_bound = std::min(best.log_bound, log_bound_for(q, policy, y, best.n_last, pdf));
    while (best.n_last > 0) {
        const double lb = log_bound_for(q, policy, y, best.n_last - 1, pdf);
        if (lb > log_tol) break;
        --best.n_last;
        best.log_bound = lb;
    }
    return best;
}

}  // namespace detail

/// Smallest N whose cdf truncation bound is <= tol under the given rho policy.
inline int terms_needed(const QuadFormCanonical &q, double y, double tol, const RhoPolicy &policy = {}) {
    detail::validate_canonical(q);
    if (!(tol > 0.0)) throw std::invalid_argument("terms_needed: tol must be positive");
    if (y < 0.0) throw std::invalid_argument("terms_needed: y must be >= 0");
    if (y == 0.0) return 0;
    if (!policy.optimize) detail::check_rho(q, policy.fixed_rho(q));
    const auto c = detail::certifying_terms(q, policy, y, std::log(tol), false, kHardTermCap);
    if (c.n_last < 0) {
        throw NumericalError("terms_needed: more than 500 terms required; input is ill-conditioned for the series");
    }
    return c.n_last;
}

// ---------------------------------------------------------------------------------------------------------
// Series evaluation

enum class StopRule {
    Dual,         // bound certificate when it can be formed, relative-term fallback otherwise
    Certificate,  // bound certificate only
    Fallback,     // |term| <= tol * |partial sum| for three consecutive terms
};

enum class Precision { Auto, Double, DoubleDouble, Quad, Digits50, Digits100 };

struct SeriesOptions {
    double tol = 1e-9;
    int max_terms = kHardTermCap;
    StopRule rule = StopRule::Dual;
    RhoPolicy rho{};
    Precision precision = Precision::Auto;
    bool tail_shortcut = true;  // cdf only: answer 0 or 1 when a Chernoff bound puts that within tol / 10
};

struct SeriesResult {
    double value = 0.0;
    int terms_used = 1;
    double bound_at_stop = 0.0;  // E(N) or e(N) at the stopping index; the fallback rule reports the bound too
    bool converged = false;
    bool certified = false;      // stop was justified by the truncation bound, not by the heuristic
    int digits = 16;             // working precision used, decimal digits
    double rounding_error = 0.0; // estimated floating point error in value
};

enum class SeriesKind { Cdf, Pdf };

namespace detail {

using Float128 = boost::multiprecision::float128;
using Float50 = boost::multiprecision::cpp_bin_float_50;
using Float100 = boost::multiprecision::cpp_bin_float_100;

template <class Real>
constexpr int digits_of() {
    return std::numeric_limits<Real>::digits10;
}

template <class Real>
double to_double(const Real &r) {
    return static_cast<double>(r);
}

// The coefficients satisfy the convolution c_k = (1/k) sum_{j=1..k} d_j c_{k-j}. With s = max y / (2 lambda_i)
// they are carried as w_k = c_k y^k / (c_0 s^k) and the true term is (-1)^k C e^L g_k w_k, where
//   w_k = (1/k) sum_j e_j w_{k-j},  e_j = d_j (y / s)^j = 1/2 sum_i (1 - j b_i^2) (y / (2 lambda_i s))^j,
//   g_k = s^k / Gamma(n/2+k+1),
// C = c_0 y^{n/2} kept in log form and L a running rescale exponent. Every e_j is at most 1 + j |b|^2 in
// size and w_k grows at most subexponentially, since the smallest lambda fixes the radius of convergence.
template <class Real>
SeriesResult evaluate_series(const QuadFormCanonical &q, double y, SeriesKind kind, const SeriesOptions &opt) {
    using std::abs;

    const int n = q.dim();
    const double a_d = 0.5 * n;
    const Real a = Real(n) / 2;
    const bool pdf = kind == SeriesKind::Pdf;
    const double eps = to_double(std::numeric_limits<Real>::epsilon());

    double log_c0 = -0.5 * q.offset_norm_sq();
    for (int i = 0; i < n; ++i) log_c0 -= 0.5 * std::log(2.0 * q.lambdas[i]);
    const double log_scale = log_c0 + a_d * std::log(y) - (pdf ? std::log(y) : 0.0);

    const bool bound_ok = n >= 2 && (opt.rho.optimize || (opt.rho.fraction > 0.0 && opt.rho.fraction < 1.0));
    const bool use_certificate =
        opt.rule == StopRule::Certificate || (opt.rule == StopRule::Dual && bound_ok);
    if (opt.rule == StopRule::Certificate && !bound_ok) {
        throw std::invalid_argument("series: certificate rule needs n >= 2 and a valid rho policy");
    }

    detail::CertifyingTerms cert;
    if (use_certificate) {
        cert = certifying_terms(q, opt.rho, y, std::log(opt.tol), pdf, std::max(1, opt.max_terms) - 1);
    }

    const Real s_max = Real(y) / (Real(2) * Real(q.lambdas.minCoeff()));
    std::vector<Real> ratio(static_cast<std::size_t>(n));  // lambda_min / lambda_i
    std::vector<Real> b2(static_cast<std::size_t>(n));
    std::vector<Real> pow_ratio(static_cast<std::size_t>(n), Real(1));
    for (int i = 0; i < n; ++i) {
        ratio[i] = Real(q.lambdas.minCoeff()) / Real(q.lambdas[i]);
        b2[i] = Real(q.offsets[i]) * Real(q.offsets[i]);
    }

    const int max_terms = std::max(1, opt.max_terms);
    std::vector<Real> w;
    std::vector<Real> e(1, Real(0));
    std::vector<double> w_abs;  // |w_k| plus its accumulated magnitude, for the rounding estimate
    std::vector<double> e_abs(1, 0.0);
    w.reserve(static_cast<std::size_t>(max_terms));
    e.reserve(static_cast<std::size_t>(max_terms));
    w.push_back(Real(1));
    w_abs.push_back(1.0);

    // g_0 = 1 / Gamma(a + 1). Every term inherits this factor, so double accuracy here costs nothing.
    Real g = Real(1) / Real(std::tgamma(a_d + 1.0));

    double rescale_log = 0.0;  // L
    Real sum = 0;
    Real comp = 0;  // Kahan compensation
    double err_acc = 0.0;  // sum over k of (k + 2) |g_k| max(|w_k|, absacc_k), rescaled like g

    const Real big = Real(1e200);
    const Real small = Real(1e-200);
    const double log_big = 200.0 * std::numbers::ln10;
    const Real tiny = Real(1e-280);

    auto weight = [&](int k) { return pdf ? (a + k) : Real(1); };
    auto add_term = [&](const Real &t) {
        const Real yk = t - comp;
        const Real s_new = sum + yk;
        comp = (s_new - sum) - yk;
        sum = s_new;
    };
    auto rescale = [&] {
        sum *= small;
        comp *= small;
        err_acc *= 1e-200;
        rescale_log += log_big;
    };

    SeriesResult out;
    out.digits = digits_of<Real>();
    int consecutive_small = 0;
    int k = 0;

    for (;; ++k) {
        if (k > 0) {
            Real ek = 0;
            for (int i = 0; i < n; ++i) {
                pow_ratio[i] = pow_ratio[i] * ratio[i];
                if (abs(pow_ratio[i]) < tiny) pow_ratio[i] = 0;  // keep clear of subnormals
                ek += (Real(1) - Real(k) * b2[i]) * pow_ratio[i];
            }
            e.push_back(ek / 2);
            e_abs.push_back(std::abs(to_double(e.back())));

            Real acc = 0;
            double acc_abs = 0.0;
            for (int j = 1; j <= k; ++j) {
                acc += e[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(k - j)];
                acc_abs += e_abs[static_cast<std::size_t>(j)] * w_abs[static_cast<std::size_t>(k - j)];
            }
            w.push_back(acc / k);
            w_abs.push_back(std::max(std::abs(to_double(w.back())), acc_abs / k));
            if (w_abs.back() > 1e200) {
                for (auto &x : w) x *= small;
                for (auto &x : w_abs) x *= 1e-200;
                rescale();
            }

            g = g * s_max / (a + k);
            if (abs(g) > big) {
                g *= small;
                rescale();
            }
        }

        const Real term = (k % 2 == 0 ? Real(1) : Real(-1)) * g * w.back() * weight(k);
        add_term(term);
        const double w_d = pdf ? (a_d + k) : 1.0;
        err_acc += (k + 2.0) * std::abs(to_double(g)) * w_abs.back() * w_d;

        const int n_last = k;
        const double abs_term = std::abs(to_double(term));
        const double abs_sum = std::abs(to_double(sum));

        consecutive_small = (abs_term <= opt.tol * abs_sum) ? consecutive_small + 1 : 0;

        bool stop = false;
        if (use_certificate) {
            if (cert.n_last >= 0 && n_last >= cert.n_last) {
                stop = true;
                out.certified = true;
            }
        } else if (consecutive_small >= 3) {
            stop = true;
        }
        if (stop || k + 1 >= max_terms) {
            out.converged = stop;
            out.terms_used = k + 1;
            if (stop && use_certificate) {
                out.bound_at_stop = std::exp(cert.log_bound);
            } else if (bound_ok) {
                out.bound_at_stop = std::exp(log_bound_for(q, opt.rho, y, n_last, pdf));
            } else {
                out.bound_at_stop = std::numeric_limits<double>::infinity();
            }
            break;
        }
    }

    const double s = to_double(sum);
    const double total_log = log_scale + rescale_log;
    out.value = (s == 0.0) ? 0.0 : std::copysign(std::exp(total_log + std::log(std::abs(s))), s);
    // Safety factor 10 covers error propagation through the recursion beyond first order.
    out.rounding_error = 10.0 * eps * err_acc * std::exp(total_log);
    if (!std::isfinite(out.rounding_error)) out.rounding_error = std::numeric_limits<double>::infinity();
    if (kind == SeriesKind::Cdf) out.value = std::clamp(out.value, 0.0, 1.0);
    return out;
}

inline SeriesResult run_tier(Precision p, const QuadFormCanonical &q, double y, SeriesKind kind,
                             const SeriesOptions &opt) {
    switch (p) {
    case Precision::DoubleDouble:
        return evaluate_series<DoubleDouble>(q, y, kind, opt);
    case Precision::Quad:
        return evaluate_series<Float128>(q, y, kind, opt);
    case Precision::Digits50:
        return evaluate_series<Float50>(q, y, kind, opt);
    case Precision::Digits100:
        return evaluate_series<Float100>(q, y, kind, opt);
    default:
        return evaluate_series<double>(q, y, kind, opt);
    }
}

// log E[exp(t Q)] for Q = sum lambda (u + b)^2, valid for 1 - 2 t lambda > 0.
inline double log_mgf(const QuadFormCanonical &q, double t) {
    double out = 0.0;
    for (int i = 0; i < q.dim(); ++i) {
        const double s = 1.0 - 2.0 * t * q.lambdas[i];
        const double b2 = q.offsets[i] * q.offsets[i];
        out += -0.5 * std::log(s) + b2 * t * q.lambdas[i] / s;
    }
    return out;
}

// Minimum over t of a convex function on (lo, hi) by golden section.
template <class F>
double convex_min(F f, double lo, double hi) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 80; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return std::min(fc, fd);
}

// Chernoff bounds on P(Q > y) and P(Q <= y), as logs.
inline std::pair<double, double> log_tail_bounds(const QuadFormCanonical &q, double y) {
    const double lmax = q.lambdas.maxCoeff();
    const double upper = convex_min([&](double t) { return log_mgf(q, t) - t * y; }, 0.0, 0.5 / lmax * (1.0 - 1e-12));
    // Lower tail in log t so the search covers many decades.
    const double lower = convex_min(
        [&](double s) {
            const double t = std::exp(s);
            return log_mgf(q, -t) + t * y;
        },
        std::log(1e-6 / lmax), std::log(1e12 / q.lambdas.minCoeff()));
    return {std::min(upper, 0.0), std::min(lower, 0.0)};
}

inline SeriesResult evaluate(const QuadFormCanonical &q, double y, SeriesKind kind, const SeriesOptions &opt) {
    validate_canonical(q);
    if (y < 0.0 || !std::isfinite(y)) throw std::invalid_argument("series: y must be finite and >= 0");
    if (!(opt.tol > 0.0)) throw std::invalid_argument("series: tol must be positive");
    if (opt.max_terms < 1) throw std::invalid_argument("series: max_terms must be >= 1");

    if (y == 0.0) {
        SeriesResult r;
        r.converged = true;
        r.certified = true;
        if (kind == SeriesKind::Pdf) {
            // Only the k = 0 term survives: c_0 y^{n/2-1} / Gamma(n/2).
            if (q.dim() == 1) {
                r.value = std::numeric_limits<double>::infinity();
            } else if (q.dim() == 2) {
                r.value = series_coefficients(q, 0).c[0];
            }
        }
        return r;
    }

    if (kind == SeriesKind::Cdf && opt.tail_shortcut) {
        const auto [log_up, log_low] = log_tail_bounds(q, y);
        const double cut = std::log(0.1 * opt.tol);
        if (log_up <= cut || log_low <= cut) {
            SeriesResult r;
            r.value = log_up <= cut ? 1.0 : 0.0;
            r.terms_used = 0;
            r.bound_at_stop = std::exp(std::min(log_up, log_low));
            r.converged = true;
            r.certified = true;
            return r;
        }
    }

    if (opt.precision != Precision::Auto) return run_tier(opt.precision, q, y, kind, opt);

    // Rough count of digits lost to cancellation; the offsets shrink the terms by exp(-|b|^2 / 2). The
    // measured rounding error decides escalation, so double is skipped only when clearly hopeless.
    const double digits_lost = 0.45 * y / (2.0 * q.lambdas.minCoeff()) - 0.217 * q.offset_norm_sq();
    const double digits_wanted = digits_lost + std::max(0.0, -std::log10(opt.tol)) + 2.0;
    const Precision tiers[] = {Precision::Double, Precision::DoubleDouble, Precision::Quad, Precision::Digits50,
                               Precision::Digits100};
    int first = 0;
    if (digits_wanted > 20.0) first = 1;
    if (digits_wanted > 30.0) first = 3;
    if (digits_wanted > 60.0) first = 4;

    SeriesResult r;
    for (int t = first; t < 5; ++t) {
        r = run_tier(tiers[t], q, y, kind, opt);
        if (r.rounding_error <= 0.25 * opt.tol) break;
    }
    return r;
}

}  // namespace detail

inline SeriesResult cdf(const QuadFormCanonical &q, double y, const SeriesOptions &opt = {}) {
    return detail::evaluate(q, y, SeriesKind::Cdf, opt);
}

inline SeriesResult cdf(const QuadFormCanonical &q, double y, double tol, int max_terms) {
    SeriesOptions opt;
    opt.tol = tol;
    opt.max_terms = max_terms;
    return cdf(q, y, opt);
}

inline SeriesResult pdf(const QuadFormCanonical &q, double y, const SeriesOptions &opt = {}) {
    return detail::evaluate(q, y, SeriesKind::Pdf, opt);
}

inline SeriesResult pdf(const QuadFormCanonical &q, double y, double tol, int max_terms) {
    SeriesOptions opt;
    opt.tol = tol;
    opt.max_terms = max_terms;
    return pdf(q, y, opt);
}

}  // namespace bnav
