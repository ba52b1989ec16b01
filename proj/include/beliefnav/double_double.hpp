#pragma once

// Unevaluated sum hi + lo of two doubles, about 31 significant digits. Arithmetic follows the usual
// error-free transformations (two-sum, two-product) and is several times faster than software
// quad precision, which matters for the cancellation-heavy series tier.

#include <cmath>
#include <limits>

namespace bnav {

class DoubleDouble {
public:
    DoubleDouble() = default;
    DoubleDouble(double x) : hi_(x) {}  // NOLINT(google-explicit-constructor)
    DoubleDouble(int x) : hi_(x) {}     // NOLINT(google-explicit-constructor)
    DoubleDouble(double hi, double lo) : hi_(hi), lo_(lo) {}

    double hi() const { return hi_; }
    double lo() const { return lo_; }
    explicit operator double() const { return hi_ + lo_; }

    friend DoubleDouble operator-(const DoubleDouble &x) { return {-x.hi_, -x.lo_}; }

    friend DoubleDouble operator+(const DoubleDouble &x, const DoubleDouble &y) {
        double s2 = 0.0, t2 = 0.0;
        double s1 = two_sum(x.hi_, y.hi_, s2);
        const double t1 = two_sum(x.lo_, y.lo_, t2);
        s2 += t1;
        s1 = quick_two_sum(s1, s2, s2);
        s2 += t2;
        s1 = quick_two_sum(s1, s2, s2);
        return {s1, s2};
    }

    friend DoubleDouble operator-(const DoubleDouble &x, const DoubleDouble &y) { return x + (-y); }

    friend DoubleDouble operator*(const DoubleDouble &x, const DoubleDouble &y) {
        const double p = x.hi_ * y.hi_;
        double e = two_prod_err(x.hi_, y.hi_, p);
        e += x.hi_ * y.lo_ + x.lo_ * y.hi_;
        double lo = 0.0;
        const double hi = quick_two_sum(p, e, lo);
        return {hi, lo};
    }

    friend DoubleDouble operator*(const DoubleDouble &x, double y) {
        const double p = x.hi_ * y;
        double e = two_prod_err(x.hi_, y, p);
        e += x.lo_ * y;
        double lo = 0.0;
        const double hi = quick_two_sum(p, e, lo);
        return {hi, lo};
    }
    friend DoubleDouble operator*(double x, const DoubleDouble &y) { return y * x; }

    friend DoubleDouble operator/(const DoubleDouble &x, const DoubleDouble &y) {
        const double q1 = x.hi_ / y.hi_;
        DoubleDouble r = x - y * DoubleDouble(q1);
        const double q2 = r.hi_ / y.hi_;
        r = r - y * DoubleDouble(q2);
        const double q3 = r.hi_ / y.hi_;
        double lo = 0.0;
        const double hi = quick_two_sum(q1, q2, lo);
        return DoubleDouble(hi, lo) + DoubleDouble(q3);
    }

    DoubleDouble &operator+=(const DoubleDouble &y) { return *this = *this + y; }
    DoubleDouble &operator-=(const DoubleDouble &y) { return *this = *this - y; }
    DoubleDouble &operator*=(const DoubleDouble &y) { return *this = *this * y; }
    DoubleDouble &operator/=(const DoubleDouble &y) { return *this = *this / y; }

    friend bool operator<(const DoubleDouble &x, const DoubleDouble &y) {
        return x.hi_ < y.hi_ || (x.hi_ == y.hi_ && x.lo_ < y.lo_);
    }
    friend bool operator>(const DoubleDouble &x, const DoubleDouble &y) { return y < x; }
    friend bool operator==(const DoubleDouble &x, const DoubleDouble &y) { return x.hi_ == y.hi_ && x.lo_ == y.lo_; }

    friend DoubleDouble abs(const DoubleDouble &x) { return x.hi_ < 0.0 ? -x : x; }

    // hi + lo in log form; enough for scaling decisions.
    friend double log(const DoubleDouble &x) { return std::log(x.hi_) + x.lo_ / x.hi_; }

private:
    static double two_sum(double a, double b, double &err) {
        const double s = a + b;
        const double bb = s - a;
        err = (a - (s - bb)) + (b - bb);
        return s;
    }
    // Rounding error of a * b = p. A library fma call is slower than Dekker's split when not inlined.
    static double two_prod_err(double a, double b, double p) {
#ifdef FP_FAST_FMA
        return std::fma(a, b, -p);
#else
        constexpr double split = 134217729.0;  // 2^27 + 1
        const double ca = split * a, cb = split * b;
        const double ah = ca - (ca - a), al = a - ah;
        const double bh = cb - (cb - b), bl = b - bh;
        return ((ah * bh - p) + ah * bl + al * bh) + al * bl;
#endif
    }
    static double quick_two_sum(double a, double b, double &err) {
        const double s = a + b;
        err = b - (s - a);
        return s;
    }

    double hi_ = 0.0;
    double lo_ = 0.0;
};

}  // namespace bnav

template <>
class std::numeric_limits<bnav::DoubleDouble> {
public:
    static constexpr bool is_specialized = true;
    static constexpr int digits = 104;
    static constexpr int digits10 = 31;
    static bnav::DoubleDouble epsilon() { return 4.93038065763132e-32; }  // 2^-104
};
