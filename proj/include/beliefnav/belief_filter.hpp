#pragma once

// EKF belief propagation. The measurement update optionally folds in a Gaussian prior on the viewpoint
// from which the observed object is seen; without it the update is the standard EKF.

#include <functional>
#include <optional>
#include <stdexcept>

#include "beliefnav/gaussian.hpp"

namespace bnav {

using Belief = Gaussian;

struct MotionModel {
    std::function<Vector(const Vector &x, const Vector &u)> f;
    std::function<Matrix(const Vector &x, const Vector &u)> jacobian;
    std::function<Matrix(const Vector &x, const Vector &u)> noise;
};

struct ObservationModel {
    std::function<Vector(const Vector &x)> h;
    std::function<Matrix(const Vector &x)> jacobian;
    Matrix noise;  // Q
};

/// Gaussian over the viewpoint that maximises the chance of observing an object.
struct ObjectPrior {
    Vector mean;
    Matrix cov;
};

/// Central-difference Jacobian of g at x.
inline Matrix numerical_jacobian(const std::function<Vector(const Vector &)> &g, const Vector &x,
                                 double h = 1e-6) {
    const Vector g0 = g(x);
    Matrix out(g0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Vector xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        out.col(j) = (g(xp) - g(xm)) / (2.0 * h);
    }
    return out;
}

/// Largest absolute difference between the analytic and finite-difference Jacobians of f at (x, u).
inline double motion_jacobian_error(const MotionModel &m, const Vector &x, const Vector &u) {
    const Matrix fd = numerical_jacobian([&](const Vector &s) { return m.f(s, u); }, x);
    return (m.jacobian(x, u) - fd).cwiseAbs().maxCoeff();
}

inline double observation_jacobian_error(const ObservationModel &om, const Vector &x) {
    const Matrix fd = numerical_jacobian(om.h, x);
    return (om.jacobian(x) - fd).cwiseAbs().maxCoeff();
}

inline Belief predict(const Belief &b, const Vector &u, const MotionModel &m) {
    const Matrix f = m.jacobian(b.mean, u);
    const Matrix r = m.noise(b.mean, u);
    if (f.rows() != b.dim() || f.cols() != b.dim() || r.rows() != b.dim()) {
        throw std::invalid_argument("predict: motion model dimension mismatch");
    }
    return {m.f(b.mean, u), symmetrize(f * b.cov * f.transpose() + r)};
}

namespace detail {

inline void check_observation(const Belief &b, const Vector &z, const ObservationModel &om, const Matrix &h) {
    if (h.cols() != b.dim() || h.rows() != z.size() || om.noise.rows() != z.size()) {
        throw std::invalid_argument("update: innovation dimension mismatch");
    }
}

inline void check_prior(const Belief &b, const ObjectPrior &op) {
    if (op.mean.size() != b.dim() || op.cov.rows() != b.dim()) {
        throw std::invalid_argument("update: object prior dimension mismatch");
    }
}

}  // namespace detail

inline Belief update_standard(const Belief &bpred, const Vector &z, const ObservationModel &om) {
    const Matrix h = om.jacobian(bpred.mean);
    detail::check_observation(bpred, z, om, h);
    const Matrix s = symmetrize(h * bpred.cov * h.transpose() + om.noise);
    const Matrix k = bpred.cov * h.transpose() * spd_inverse(s);
    const Matrix ikh = Matrix::Identity(bpred.dim(), bpred.dim()) - k * h;
    // Joseph form keeps the covariance symmetric PSD.
    const Matrix cov = ikh * bpred.cov * ikh.transpose() + k * om.noise * k.transpose();
    return {bpred.mean + k * (z - om.h(bpred.mean)), symmetrize(cov)};
}

/// Posterior covariance in information form: (H^T Q^-1 H + Sigma_O^-1 + Sigma_bar^-1)^-1.
inline Matrix covariance_information_form(const Belief &bpred, const ObservationModel &om, const ObjectPrior &op) {
    detail::check_prior(bpred, op);
    const Matrix h = om.jacobian(bpred.mean);
    const Matrix info = h.transpose() * spd_inverse(om.noise) * h + spd_inverse(op.cov) + spd_inverse(bpred.cov);
    return spd_inverse(symmetrize(info));
}

/// (Sigma_O^-1 + Sigma_bar^-1)^-1 written as Sigma_bar (Sigma_bar + Sigma_O)^-1 Sigma_O.
inline Matrix fused_prior_covariance(const Belief &bpred, const ObjectPrior &op) {
    detail::check_prior(bpred, op);
    return symmetrize(bpred.cov * spd_inverse(symmetrize(bpred.cov + op.cov)) * op.cov);
}

struct GainForms {
    Matrix direct;   // Sigma_{k+1} H^T Q^-1
    Matrix reduced;  // P H^T (H P H^T + Q)^-1 with P the fused prior covariance
};

inline GainForms kalman_gain_forms(const Belief &bpred, const ObservationModel &om, const ObjectPrior &op) {
    const Matrix h = om.jacobian(bpred.mean);
    const Matrix sigma = covariance_information_form(bpred, om, op);
    const Matrix p = fused_prior_covariance(bpred, op);
    GainForms g;
    g.direct = sigma * h.transpose() * spd_inverse(om.noise);
    g.reduced = p * h.transpose() * spd_inverse(symmetrize(h * p * h.transpose() + om.noise));
    return g;
}

/// Posterior covariance in factored form (I - K H) P, which avoids inverting Sigma_bar and Sigma_O.
inline Matrix covariance_factored_form(const Belief &bpred, const ObservationModel &om, const ObjectPrior &op) {
    const Matrix h = om.jacobian(bpred.mean);
    const Matrix p = fused_prior_covariance(bpred, op);
    const Matrix k = p * h.transpose() * spd_inverse(symmetrize(h * p * h.transpose() + om.noise));
    return symmetrize((Matrix::Identity(bpred.dim(), bpred.dim()) - k * h) * p);
}

/// Measurement update that also conditions on the object viewpoint prior.
inline Belief update_with_object(const Belief &bpred, const Vector &z, const ObservationModel &om,
                                 const ObjectPrior &op) {
    const Matrix h = om.jacobian(bpred.mean);
    detail::check_observation(bpred, z, om, h);
    detail::check_prior(bpred, op);
    if (!is_positive_definite(op.cov)) {
        throw NumericalError("update_with_object: object covariance is singular; use update_standard");
    }
    const Matrix sigma = covariance_information_form(bpred, om, op);
    const Matrix k = sigma * h.transpose() * spd_inverse(om.noise);
    const Vector mean =
        bpred.mean + k * (z - om.h(bpred.mean)) + sigma * spd_inverse(op.cov) * (op.mean - bpred.mean);
    return {mean, sigma};
}

/// Dispatches on whether an object prior is present.
inline Belief update(const Belief &bpred, const Vector &z, const ObservationModel &om,
                     const std::optional<ObjectPrior> &op) {
    return op ? update_with_object(bpred, z, om, *op) : update_standard(bpred, z, om);
}

/// Negative log posterior (up to constants) with h linearised about the predicted mean.
inline double objective_j(const Vector &x, const Belief &bpred, const Vector &z, const ObservationModel &om,
                          const ObjectPrior &op) {
    const Matrix h = om.jacobian(bpred.mean);
    const Vector r = z - om.h(bpred.mean) - h * (x - bpred.mean);
    return 0.5 * (mahalanobis_sq(r, spd_inverse(om.noise)) + mahalanobis_sq(x - op.mean, spd_inverse(op.cov)) +
                  mahalanobis_sq(x - bpred.mean, spd_inverse(bpred.cov)));
}

}  // namespace bnav
