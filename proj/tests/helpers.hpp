#pragma once

#include <cmath>
#include <random>

#include "beliefnav/gaussian.hpp"

namespace testing_util {

/// Random SPD matrix with eigenvalues drawn uniformly from [lo, hi] and a random rotation.
inline bnav::Matrix random_spd(std::mt19937_64 &rng, int n, double lo, double hi) {
    std::uniform_real_distribution<double> ev(lo, hi);
    std::normal_distribution<double> g;
    bnav::Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    const Eigen::HouseholderQR<bnav::Matrix> qr(a);
    const bnav::Matrix q = qr.householderQ();
    bnav::Vector d(n);
    for (int i = 0; i < n; ++i) d[i] = ev(rng);
    return bnav::symmetrize(q * d.asDiagonal() * q.transpose());
}

inline bnav::Vector random_vector(std::mt19937_64 &rng, int n, double scale) {
    std::normal_distribution<double> g(0.0, scale);
    bnav::Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

inline double rel_diff(const bnav::Matrix &a, const bnav::Matrix &b) {
    return (a - b).norm() / std::max(1e-300, std::max(a.norm(), b.norm()));
}

}  // namespace testing_util
