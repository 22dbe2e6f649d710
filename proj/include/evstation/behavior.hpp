#pragma once

// Multinomial-logit choice model and the log-sum-exp machinery shared with
// the pricing solver (lse, its convex conjugate, the Fenchel-Young gap).

#include <cmath>
#include <limits>

#include "evstation/common.hpp"

namespace evstation {

/// Control vector seen by drivers: prices for the two charging products, the
/// overstay penalty, and a homogeneous constant coordinate pinned to 1.
struct IncentiveVector {
    double z_flex = 0.0; // $/kWh
    double z_asap = 0.0; // $/kWh
    double y = 1.0;      // $/hour, > 0

    static constexpr int kDim = 4;

    Vector to_vector() const {
        Vector v(kDim);
        v << z_flex, z_asap, y, 1.0;
        return v;
    }

    static IncentiveVector from_vector(const Vector& v) {
        if (v.size() != kDim) throw ArgumentError("incentive vector must have 4 entries");
        return IncentiveVector{v[0], v[1], v[2]};
    }
};

/// Box bounds for the free coordinates of the incentive vector.
struct IncentiveBounds {
    double z_lo = 0.0;
    double z_hi = 1.0;
    double y_lo = 0.1;
    double y_hi = 10.0;

    bool contains(const IncentiveVector& z, double tol = 1e-9) const {
        return z.z_flex >= z_lo - tol && z.z_flex <= z_hi + tol &&
               z.z_asap >= z_lo - tol && z.z_asap <= z_hi + tol &&
               z.y >= y_lo - tol && z.y <= y_hi + tol;
    }

    IncentiveVector clamp(const IncentiveVector& z) const {
        return IncentiveVector{std::clamp(z.z_flex, z_lo, z_hi),
                               std::clamp(z.z_asap, z_lo, z_hi),
                               std::clamp(z.y, y_lo, y_hi)};
    }
};

enum class Alternative { flex = 0, asap = 1, leave = 2 };
constexpr int kNumAlternatives = 3;

/// Per-driver exogenous features entering the utilities.
struct ExogenousFeatures {
    double time_of_day = 12.0;      // hours
    double parking_duration = 1.0;  // hours
    double battery_capacity = 24.0; // kWh
    double soc_init = 0.0;          // fraction
    double soc_need = 0.0;          // fraction

    static constexpr int kDim = 5;

    Vector to_vector() const {
        Vector v(kDim);
        v << time_of_day, parking_duration, battery_capacity, soc_init, soc_need;
        return v;
    }

    void validate() const {
        if (soc_init < 0.0 || soc_init > soc_need || soc_need > 1.0)
            throw ArgumentError("features require 0 <= soc_init <= soc_need <= 1");
        if (parking_duration <= 0.0)
            throw ArgumentError("parking_duration must be positive");
    }
};

/// Stacked logit coefficients. Rows are ordered (flex, asap, leave); columns
/// match IncentiveVector. gamma weighs the exogenous features; beta0 is the
/// alternative-specific constant. Both get folded into the constant column
/// of an effective theta per session, so downstream code sees scores as a
/// plain matrix-vector product theta_eff * z.
struct DcmParams {
    Matrix theta;  // 3 x 4
    Matrix gamma;  // 3 x 5
    Vector beta0;  // 3

    void validate() const {
        if (theta.rows() != kNumAlternatives || theta.cols() != IncentiveVector::kDim)
            throw ArgumentError("theta must be 3x4");
        if (gamma.rows() != kNumAlternatives || gamma.cols() != ExogenousFeatures::kDim)
            throw ArgumentError("gamma must be 3x5");
        if (beta0.size() != kNumAlternatives)
            throw ArgumentError("beta0 must have 3 entries");
    }

    /// Effective theta for one session: the gamma^T w + beta0 term is added
    /// to the constant column, which multiplies the fixed 1 in z.
    Matrix effective_theta(const ExogenousFeatures& w) const {
        validate();
        Matrix eff = theta;
        eff.col(IncentiveVector::kDim - 1) += gamma * w.to_vector() + beta0;
        return eff;
    }
};

struct ChoiceDistribution {
    double p_flex = 0.0;
    double p_asap = 0.0;
    double p_leave = 0.0;

    Vector to_vector() const {
        Vector v(kNumAlternatives);
        v << p_flex, p_asap, p_leave;
        return v;
    }

    static ChoiceDistribution from_vector(const Vector& v) {
        if (v.size() != kNumAlternatives) throw ArgumentError("choice distribution needs 3 entries");
        return ChoiceDistribution{v[0], v[1], v[2]};
    }
};

/// ln sum exp(u), with max-subtraction so large utilities do not overflow.
inline double lse(const Vector& u) {
    if (u.size() == 0) throw ArgumentError("lse: empty vector");
    const double m = u.maxCoeff();
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) s += std::exp(u[i] - m);
    return m + std::log(s);
}

inline Vector softmax(const Vector& u) {
    if (u.size() == 0) throw ArgumentError("softmax: empty vector");
    const double m = u.maxCoeff();
    Vector e = (u.array() - m).exp();
    return e / e.sum();
}

inline bool in_simplex(const Vector& v, double tol = 1e-9) {
    if (v.size() == 0) return false;
    if (v.minCoeff() < -tol) return false;
    return std::abs(v.sum() - 1.0) <= tol;
}

/// Convex conjugate of lse: negative entropy v^T ln v on the simplex,
/// +infinity outside it (0 ln 0 taken as 0).
inline double lse_conjugate(const Vector& v, double tol = 1e-9) {
    if (!in_simplex(v, tol)) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double vi = v[i];
        if (vi > 0.0) s += vi * std::log(vi);
    }
    return s;
}

/// lse(u) + lse*(v) - u^T v. Nonnegative for v in the simplex; zero exactly
/// when v = softmax(u).
inline double fenchel_young_gap(const Vector& u, const Vector& v, double tol = 1e-9) {
    const double conj = lse_conjugate(v, tol);
    if (!std::isfinite(conj)) return conj;
    return lse(u) + conj - u.dot(v);
}

inline ChoiceDistribution choice_probabilities(const DcmParams& params,
                                               const IncentiveVector& z,
                                               const ExogenousFeatures& w) {
    const Matrix theta_eff = params.effective_theta(w);
    return ChoiceDistribution::from_vector(softmax(theta_eff * z.to_vector()));
}

/// One draw from the categorical distribution; the caller owns the generator.
inline Alternative sample_choice(const ChoiceDistribution& dist, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    if (u < dist.p_flex) return Alternative::flex;
    if (u < dist.p_flex + dist.p_asap) return Alternative::asap;
    return Alternative::leave;
}

} // namespace evstation
