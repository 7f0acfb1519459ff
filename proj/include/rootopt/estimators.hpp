#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "rootopt/dataset.hpp"
#include "rootopt/error.hpp"
#include "rootopt/nuisance.hpp"

namespace rootopt {

// Point estimate with the finite-sample variance of sqrt(K)*(tau_hat - tau)
// for K retained trial units, so std_err^2 * n_trial_kept == variance and
// std_err equals the usual sandwich standard error of the weighted estimator.
struct Estimate {
    double point = 0.0;
    double variance = 0.0;
    double std_err = 0.0;
    std::size_t n_trial_kept = 0;
    std::size_t n_target_kept = 0;
    double effective_w = 0.0;  // mean of w over target rows
    double pi_w = 0.0;
};

inline std::size_t default_min_kept(std::size_t n1) {
    std::size_t floor10 = 10;
    auto two_pct = static_cast<std::size_t>(std::ceil(0.02 * static_cast<double>(n1)));
    std::size_t m = std::max(floor10, two_pct);
    return std::min(m, n1);  // w == 1 stays feasible on small trials
}

// Per-arm IPW pseudo-outcome. prefactor is pi/(1-pi) of the (weighted)
// population; e(x,0) := 1 - e(x,1). Zero on target rows and other-arm rows.
inline double ipw_pseudo_outcome(const Dataset& d, const NuisanceEval& m, std::size_t i, int arm,
                                 double prefactor) {
    if (!d.is_trial(i) || d.treatment(i) != arm) return 0.0;
    double ell = m.selection_ratio(d.row(i));
    double e1 = m.trial_propensity(d.row(i));
    double e_arm = arm == 1 ? e1 : 1.0 - e1;
    return prefactor * d.outcome(i) / (ell * e_arm);
}

// Precomputed per-trial-row pieces of the ROOT loss. Pseudo-outcomes carry
// the unweighted pi_hat = n1/n prefactor, and the per-arm centers are the
// unweighted means over the full trial sample, so each row's squared
// deviation is a fixed cost and the loss depends on w only through which
// rows stay in.
class ObjectiveContext {
public:
    ObjectiveContext(const Dataset& d, const NuisanceEval& m, std::size_t min_kept)
        : n_(d.n()), n1_(d.n_trial()), min_kept_(min_kept) {
        trial_rows_ = d.trial_rows();
        double pi_hat = static_cast<double>(n1_) / static_cast<double>(n_);
        double prefactor = pi_hat / (1.0 - pi_hat);
        y1_.reserve(n1_);
        y0_.reserve(n1_);
        treated_.reserve(n1_);
        double c1 = 0.0, c0 = 0.0;
        for (std::size_t i : trial_rows_) {
            y1_.push_back(ipw_pseudo_outcome(d, m, i, 1, prefactor));
            y0_.push_back(ipw_pseudo_outcome(d, m, i, 0, prefactor));
            treated_.push_back(d.treatment(i) == 1);
            c1 += y1_.back();
            c0 += y0_.back();
        }
        c1 /= static_cast<double>(n1_);
        c0 /= static_cast<double>(n1_);
        center1_ = c1;
        center0_ = c0;
        badness_.reserve(n1_);
        for (std::size_t k = 0; k < n1_; ++k) {
            double d1 = y1_[k] - c1;
            double d0 = y0_[k] - c0;
            badness_.push_back(d1 * d1 + d0 * d0);
        }
    }

    ObjectiveContext(const Dataset& d, const NuisanceEval& m)
        : ObjectiveContext(d, m, default_min_kept(d.n_trial())) {}

    std::size_t n() const { return n_; }
    std::size_t n_trial() const { return n1_; }
    std::size_t min_kept() const { return min_kept_; }
    const std::vector<std::size_t>& trial_rows() const { return trial_rows_; }
    double pseudo_y1(std::size_t k) const { return y1_[k]; }
    double pseudo_y0(std::size_t k) const { return y0_[k]; }
    double contrast(std::size_t k) const { return y1_[k] - y0_[k]; }
    bool treated(std::size_t k) const { return treated_[k]; }
    double badness(std::size_t k) const { return badness_[k]; }
    double center(int arm) const { return arm == 1 ? center1_ : center0_; }

    // Finite-sample variance loss: n1/(sum_i S_i w_i)^2 *
    // sum_t sum_i S_i w_i^2 (Yhat_i(t) - Ybar(t))^2, centered at the
    // unweighted per-arm means. +infinity when w keeps fewer than min_kept
    // trial rows or empties an arm.
    double operator()(const std::vector<std::uint8_t>& w_all_rows) const {
        return eval([&](std::size_t k) { return w_all_rows[trial_rows_[k]] != 0; });
    }

    double eval_trial_mask(const std::vector<std::uint8_t>& w_trial) const {
        return eval([&](std::size_t k) { return w_trial[k] != 0; });
    }

    template <typename KeptFn>
    double eval(const KeptFn& kept) const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        std::size_t K = 0, K_treated = 0;
        double ss = 0.0;
        for (std::size_t k = 0; k < n1_; ++k) {
            if (!kept(k)) continue;
            ++K;
            if (treated_[k]) ++K_treated;
            ss += badness_[k];
        }
        if (K < min_kept_) return inf;
        if (K_treated == 0 || K_treated == K) return inf;
        return static_cast<double>(n1_) / (static_cast<double>(K) * static_cast<double>(K)) * ss;
    }

private:
    std::size_t n_, n1_, min_kept_;
    std::vector<std::size_t> trial_rows_;
    std::vector<double> y1_, y0_, badness_;
    std::vector<bool> treated_;
    double center1_ = 0.0, center0_ = 0.0;
};

using WeightFn = std::function<int(std::span<const double>)>;

inline std::vector<std::uint8_t> evaluate_weights(const Dataset& d, const WeightFn& w) {
    std::vector<std::uint8_t> out(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) out[i] = w(d.row(i)) ? 1 : 0;
    return out;
}

inline double root_objective(const Dataset& d, const NuisanceEval& m,
                             const std::vector<std::uint8_t>& w) {
    return ObjectiveContext(d, m)(w);
}

inline double root_objective(const Dataset& d, const NuisanceEval& m, const WeightFn& w) {
    return root_objective(d, m, evaluate_weights(d, w));
}

// WTATE under binary weights: weighted per-arm means normalized by
// sum_i w_i S_i, pseudo-outcomes carrying the pi_w prefactor with
// pi_w = pi_hat * (sum_i w_i S_i)/n1. At pi_hat = n1/n this is exactly
// (1/n) sum_i w_i S_i; supplying a known marginal scales it by the kept
// fraction instead.
inline Estimate wtate_ipw(const Dataset& d, const NuisanceEval& m,
                          const std::vector<std::uint8_t>& w,
                          std::size_t min_kept_override = static_cast<std::size_t>(-1)) {
    std::size_t min_kept = min_kept_override == static_cast<std::size_t>(-1)
                               ? default_min_kept(d.n_trial())
                               : min_kept_override;
    auto trial = d.trial_rows();
    std::size_t K = 0, K_treated = 0;
    for (std::size_t i : trial) {
        if (!w[i]) continue;
        ++K;
        if (d.treatment(i) == 1) ++K_treated;
    }
    if (K < min_kept)
        fail(ErrorCode::TooFewKept, "weights keep " + std::to_string(K) + " trial rows, need " +
                                        std::to_string(min_kept));
    if (K_treated == 0) fail(ErrorCode::EmptyArm, "weights prune every treated unit");
    if (K_treated == K) fail(ErrorCode::EmptyArm, "weights prune every control unit");

    double pi_w = m.pi_hat * static_cast<double>(K) / static_cast<double>(d.n_trial());
    double prefactor = pi_w / (1.0 - pi_w);
    double s1 = 0.0, s0 = 0.0;
    std::vector<double> contrasts;
    contrasts.reserve(K);
    for (std::size_t i : trial) {
        if (!w[i]) continue;
        double y1 = ipw_pseudo_outcome(d, m, i, 1, prefactor);
        double y0 = ipw_pseudo_outcome(d, m, i, 0, prefactor);
        s1 += y1;
        s0 += y0;
        contrasts.push_back(y1 - y0);
    }
    Estimate est;
    est.n_trial_kept = K;
    est.pi_w = pi_w;
    est.point = (s1 - s0) / static_cast<double>(K);
    double ss = 0.0;
    for (double c : contrasts) {
        double dlt = c - est.point;
        ss += dlt * dlt;
    }
    est.variance = ss / static_cast<double>(K);
    est.std_err = std::sqrt(est.variance / static_cast<double>(K));

    std::size_t kept_target = 0;
    for (std::size_t i = 0; i < d.n(); ++i)
        if (!d.is_trial(i) && w[i]) ++kept_target;
    est.n_target_kept = kept_target;
    est.effective_w =
        d.n_target() ? static_cast<double>(kept_target) / static_cast<double>(d.n_target()) : 0.0;
    return est;
}

inline Estimate wtate_ipw(const Dataset& d, const NuisanceEval& m, const WeightFn& w) {
    return wtate_ipw(d, m, evaluate_weights(d, w));
}

// TATE is WTATE at w == 1; pi_hat = n1/n makes the two identical by
// construction.
inline Estimate tate_ipw(const Dataset& d, const NuisanceEval& m) {
    if (d.n_treated() == 0 || d.n_control() == 0) fail(ErrorCode::EmptyArm, "trial arm empty");
    std::vector<std::uint8_t> ones(d.n(), 1);
    return wtate_ipw(d, m, ones, 0);
}

// Consistent estimator of the asymptotic variance of sqrt(n1)*(tau_hat - tau):
// (1/n1) sum_i S_i (Yhat_i(1) - Yhat_i(0) - point)^2.
inline double variance_tate(const Dataset& d, const NuisanceEval& m, double point) {
    double pi_hat = static_cast<double>(d.n_trial()) / static_cast<double>(d.n());
    double prefactor = pi_hat / (1.0 - pi_hat);
    double ss = 0.0;
    for (std::size_t i : d.trial_rows()) {
        double c =
            ipw_pseudo_outcome(d, m, i, 1, prefactor) - ipw_pseudo_outcome(d, m, i, 0, prefactor);
        ss += (c - point) * (c - point);
    }
    return ss / static_cast<double>(d.n_trial());
}

}  // namespace rootopt
