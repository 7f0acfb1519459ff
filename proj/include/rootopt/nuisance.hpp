#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rootopt/dataset.hpp"
#include "rootopt/error.hpp"
#include "rootopt/math.hpp"

namespace rootopt {

struct ClipBounds {
    double lo = 0.01;
    double hi = 0.99;
};

// Logistic model on the original covariate scale: expit(intercept + slopes.x).
struct LogisticModel {
    double intercept = 0.0;
    std::vector<double> slopes;

    double linear(std::span<const double> x) const {
        double z = intercept;
        for (std::size_t j = 0; j < slopes.size(); ++j) z += slopes[j] * x[j];
        return z;
    }
    double prob(std::span<const double> x) const { return expit(linear(x)); }
};

struct FitOptions {
    double ridge = 1e-4;   // L2 on slopes (standardized scale); intercept unpenalized
    std::size_t max_iter = 100;
    double tol = 1e-8;
};

namespace detail {

// Ridge-penalized logistic regression by IRLS on internally standardized
// features; returned coefficients are on the original scale.
inline LogisticModel fit_logistic(const std::vector<std::span<const double>>& rows,
                                  const std::vector<double>& labels, std::size_t p,
                                  const FitOptions& opt) {
    std::size_t n = rows.size();
    if (n == 0) fail(ErrorCode::EmptyData, "no rows to fit");
    for (const auto& r : rows)
        for (double v : r)
            if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite covariate in fit");

    std::vector<double> mu(p, 0.0), sd(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += rows[i][j];
        mu[j] = s / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = rows[i][j] - mu[j];
            ss += d * d;
        }
        sd[j] = std::sqrt(ss / static_cast<double>(n));
    }
    auto z = [&](std::size_t i, std::size_t j) {
        return sd[j] > 0.0 ? (rows[i][j] - mu[j]) / sd[j] : 0.0;
    };

    std::size_t dim = p + 1;
    std::vector<double> beta(dim, 0.0);
    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        std::vector<double> hess(dim * dim, 0.0), grad(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double eta = beta[0];
            for (std::size_t j = 0; j < p; ++j) eta += beta[1 + j] * z(i, j);
            double pr = expit(eta);
            double w = pr * (1.0 - pr);
            double resid = labels[i] - pr;
            grad[0] += resid;
            hess[0] += w;
            for (std::size_t j = 0; j < p; ++j) {
                double zj = z(i, j);
                grad[1 + j] += resid * zj;
                hess[(1 + j) * dim] += w * zj;
                for (std::size_t k = 0; k <= j; ++k) hess[(1 + j) * dim + (1 + k)] += w * zj * z(i, k);
            }
        }
        for (std::size_t j = 1; j < dim; ++j) {
            grad[j] -= opt.ridge * beta[j];
            hess[j * dim + j] += opt.ridge;
        }
        // mirror the lower triangle
        for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = a + 1; b < dim; ++b) hess[a * dim + b] = hess[b * dim + a];

        std::vector<double> step = cholesky_solve(hess, grad, dim);
        double max_change = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            beta[j] += step[j];
            max_change = std::max(max_change, std::abs(step[j]));
            if (!std::isfinite(beta[j]) || std::abs(beta[j]) > 1e8) {
                if (opt.ridge == 0.0)
                    fail(ErrorCode::Separation, "logistic fit diverged; data may be separable");
                fail(ErrorCode::NonFinite, "logistic fit diverged");
            }
        }
        if (max_change < opt.tol) break;
    }

    LogisticModel m;
    m.slopes.assign(p, 0.0);
    m.intercept = beta[0];
    for (std::size_t j = 0; j < p; ++j) {
        if (sd[j] > 0.0) {
            m.slopes[j] = beta[1 + j] / sd[j];
            m.intercept -= beta[1 + j] * mu[j] / sd[j];
        }
    }
    return m;
}

}  // namespace detail

enum class PropensityMode { Known, Empirical, Fitted };

struct Propensity {
    PropensityMode mode = PropensityMode::Empirical;
    double known = 0.5;         // Known / Empirical constant
    LogisticModel model;        // Fitted

    double operator()(std::span<const double> x, const ClipBounds& clip) const {
        double e = mode == PropensityMode::Fitted ? model.prob(x) : known;
        return clamp01(e, clip.lo, clip.hi);
    }
};

// Fitted selection score, marginal trial probability, and trial propensity.
// Immutable once built; evaluation is thread-safe.
struct NuisanceModels {
    LogisticModel selection;
    double pi_hat = 0.5;        // marginal P(S=1), n1/n at the fit
    Propensity propensity;
    ClipBounds clip;

    double selection_score_raw(std::span<const double> x) const { return selection.prob(x); }
    double selection_score(std::span<const double> x) const {
        return clamp01(selection.prob(x), clip.lo, clip.hi);
    }
    double selection_ratio(std::span<const double> x) const {
        double s = selection_score(x);
        return s / (1.0 - s);
    }
    double trial_propensity(std::span<const double> x) const { return propensity(x, clip); }
};

inline NuisanceModels fit_selection_model(const Dataset& d, const FitOptions& opt = {},
                                          ClipBounds clip = {}) {
    if (d.n_trial() == 0 || d.n_target() == 0)
        fail(ErrorCode::EmptyData, "selection model needs both trial and target rows");
    std::vector<std::span<const double>> rows;
    std::vector<double> labels;
    rows.reserve(d.n());
    labels.reserve(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) {
        rows.push_back(d.row(i));
        labels.push_back(d.is_trial(i) ? 1.0 : 0.0);
    }
    NuisanceModels m;
    m.selection = detail::fit_logistic(rows, labels, d.p(), opt);
    m.pi_hat = static_cast<double>(d.n_trial()) / static_cast<double>(d.n());
    m.clip = clip;
    return m;
}

inline Propensity make_known_propensity(double c) {
    if (!(c > 0.0 && c < 1.0)) fail(ErrorCode::Config, "known propensity must lie in (0,1)");
    return Propensity{PropensityMode::Known, c, {}};
}

inline Propensity fit_trial_propensity(const Dataset& d, PropensityMode mode,
                                       const FitOptions& opt = {}) {
    if (mode == PropensityMode::Empirical) {
        if (d.n_treated() == 0 || d.n_control() == 0)
            fail(ErrorCode::EmptyArm, "empirical propensity is degenerate");
        double e = static_cast<double>(d.n_treated()) / static_cast<double>(d.n_trial());
        return Propensity{PropensityMode::Empirical, e, {}};
    }
    if (mode == PropensityMode::Fitted) {
        std::vector<std::span<const double>> rows;
        std::vector<double> labels;
        for (std::size_t i = 0; i < d.n(); ++i) {
            if (!d.is_trial(i)) continue;
            rows.push_back(d.row(i));
            labels.push_back(d.treatment(i) == 1 ? 1.0 : 0.0);
        }
        Propensity pr;
        pr.mode = PropensityMode::Fitted;
        pr.model = detail::fit_logistic(rows, labels, d.p(), opt);
        return pr;
    }
    fail(ErrorCode::Config, "known propensity requires a constant");
}

// Evaluation-side view of the nuisances. Estimators depend only on this,
// so DGP ground truth can stand in for fitted models.
struct NuisanceEval {
    std::function<double(std::span<const double>)> selection_score;  // already clipped
    std::function<double(std::span<const double>)> trial_propensity; // already clipped
    double pi_hat = 0.5;

    double selection_ratio(std::span<const double> x) const {
        double s = selection_score(x);
        return s / (1.0 - s);
    }

    static NuisanceEval from(const NuisanceModels& m) {
        NuisanceEval e;
        e.selection_score = [m](std::span<const double> x) { return m.selection_score(x); };
        e.trial_propensity = [m](std::span<const double> x) { return m.trial_propensity(x); };
        e.pi_hat = m.pi_hat;
        return e;
    }
};

}  // namespace rootopt
