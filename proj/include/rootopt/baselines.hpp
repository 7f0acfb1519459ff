#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rootopt/dataset.hpp"
#include "rootopt/estimators.hpp"
#include "rootopt/math.hpp"
#include "rootopt/rng.hpp"
#include "rootopt/root.hpp"

namespace rootopt {

enum class RuleKind { Threshold, Indicator, Linear, Tree };

inline const char* rule_kind_name(RuleKind k) {
    switch (k) {
        case RuleKind::Threshold: return "threshold";
        case RuleKind::Indicator: return "indicator";
        case RuleKind::Linear: return "linear";
        case RuleKind::Tree: return "tree";
    }
    return "?";
}

// A fitted design-stage inclusion rule. Threshold rules are functions of x
// through the selection model, so evaluation takes the nuisances; the other
// kinds are self-contained.
struct WeightRule {
    RuleKind kind = RuleKind::Threshold;
    double objective = std::numeric_limits<double>::infinity();

    // threshold: w(x) = 1( l(x)/l_marginal >= lsp )
    double lsp = 0.0;
    double l_marginal = 1.0;

    // linear: w(x) = 1( beta[0] + beta[1:] . x >= 0 )
    std::vector<double> beta;

    // indicator: nearest standardized trial row's label
    std::vector<double> std_mean, std_sd;
    std::vector<std::vector<double>> centers;   // standardized trial rows
    std::vector<std::uint8_t> center_labels;

    // tree
    WeightTree tree;

    int evaluate(std::span<const double> x, const NuisanceEval* m = nullptr) const {
        switch (kind) {
            case RuleKind::Threshold: {
                double ratio = m->selection_ratio(x) / l_marginal;
                return ratio >= lsp ? 1 : 0;
            }
            case RuleKind::Linear: {
                double z = beta[0];
                for (std::size_t j = 0; j + 1 < beta.size(); ++j) z += beta[j + 1] * x[j];
                return z >= 0.0 ? 1 : 0;
            }
            case RuleKind::Indicator: {
                std::size_t best = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < centers.size(); ++c) {
                    double dist = 0.0;
                    for (std::size_t j = 0; j < x.size(); ++j) {
                        double z = std_sd[j] > 0.0 ? (x[j] - std_mean[j]) / std_sd[j] : 0.0;
                        double dd = z - centers[c][j];
                        dist += dd * dd;
                    }
                    if (dist < best_d) {
                        best_d = dist;
                        best = c;
                    }
                }
                return center_labels[best];
            }
            case RuleKind::Tree:
                return tree_predict(tree, x);
        }
        return 1;
    }

    std::vector<std::uint8_t> labels(const Dataset& d, const NuisanceEval* m = nullptr) const {
        std::vector<std::uint8_t> out(d.n());
        for (std::size_t i = 0; i < d.n(); ++i)
            out[i] = static_cast<std::uint8_t>(evaluate(d.row(i), m));
        return out;
    }
};

// ---------------------------------------------------------------------------
// selection-odds thresholding

inline WeightRule threshold_weights(const NuisanceEval& m, double lsp) {
    WeightRule r;
    r.kind = RuleKind::Threshold;
    r.lsp = lsp;
    r.l_marginal = m.pi_hat / (1.0 - m.pi_hat);
    return r;
}

inline std::vector<double> default_threshold_grid(const Dataset& d, const NuisanceEval& m,
                                                  std::size_t points = 50) {
    double lm = m.pi_hat / (1.0 - m.pi_hat);
    std::vector<double> odds;
    for (std::size_t i : d.target_rows()) odds.push_back(m.selection_ratio(d.row(i)) / lm);
    std::sort(odds.begin(), odds.end());
    std::vector<double> grid{0.0};
    for (std::size_t k = 1; k <= points; ++k)
        grid.push_back(quantile_sorted(odds, static_cast<double>(k) / static_cast<double>(points + 1)));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

// Grid minimizer of the ROOT objective; ties keep the smaller threshold
// (larger retained population).
inline WeightRule optimize_threshold(const Dataset& d, const NuisanceEval& m,
                                     const ObjectiveContext& ctx, std::vector<double> grid) {
    if (grid.empty()) fail(ErrorCode::Config, "threshold grid is empty");
    std::sort(grid.begin(), grid.end());
    WeightRule best;
    for (double lsp : grid) {
        WeightRule r = threshold_weights(m, lsp);
        r.objective = ctx(r.labels(d, &m));
        if (r.objective < best.objective) best = r;
    }
    if (!std::isfinite(best.objective)) best = threshold_weights(m, grid.front());
    return best;
}

// ---------------------------------------------------------------------------
// per-unit indicator weights

// Coordinate descent over trial-row labels starting from all-ones: sweep in
// row order, flip a label iff the global objective strictly decreases. Target
// rows inherit the nearest (standardized Euclidean) trial row's label.
inline WeightRule indicator_weights(const Dataset& d, const ObjectiveContext& ctx,
                                    std::size_t max_sweeps = 20) {
    std::size_t n1 = ctx.n_trial();
    std::vector<std::uint8_t> w_trial(n1, 1);
    double cur = ctx.eval_trial_mask(w_trial);
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        bool changed = false;
        for (std::size_t k = 0; k < n1; ++k) {
            w_trial[k] ^= 1;
            double cand = ctx.eval_trial_mask(w_trial);
            if (cand < cur) {
                cur = cand;
                changed = true;
            } else {
                w_trial[k] ^= 1;
            }
        }
        if (!changed) break;
    }

    WeightRule r;
    r.kind = RuleKind::Indicator;
    r.objective = cur;
    r.std_mean.assign(d.p(), 0.0);
    r.std_sd.assign(d.p(), 0.0);
    for (std::size_t j = 0; j < d.p(); ++j) {
        std::vector<double> col(d.n());
        for (std::size_t i = 0; i < d.n(); ++i) col[i] = d.x(i, j);
        r.std_mean[j] = mean(col);
        r.std_sd[j] = stddev_pop(col);
    }
    const auto& trial = ctx.trial_rows();
    r.centers.resize(n1);
    r.center_labels = w_trial;
    for (std::size_t k = 0; k < n1; ++k) {
        r.centers[k].resize(d.p());
        for (std::size_t j = 0; j < d.p(); ++j) {
            double v = d.x(trial[k], j);
            r.centers[k][j] = r.std_sd[j] > 0.0 ? (v - r.std_mean[j]) / r.std_sd[j] : 0.0;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// linear halfspace weights

namespace detail {

struct RunningObjective {
    double n1 = 0.0, min_kept = 0.0;
    double K = 0.0, K_treated = 0.0;
    double sum_badness = 0.0;

    void add(double badness, bool treated, int sign) {
        K += sign;
        if (treated) K_treated += sign;
        sum_badness += sign * badness;
    }

    double value() const {
        if (K < min_kept || K_treated <= 0.0 || K_treated >= K)
            return std::numeric_limits<double>::infinity();
        return n1 * sum_badness / (K * K);
    }
};

}  // namespace detail

// Random-restart coordinate search; each coordinate update is an exhaustive
// 1-d scan over the inclusion-pattern breakpoints. The all-ones halfspace is
// always a candidate, so the result never loses to no pruning.
inline WeightRule linear_weights(const Dataset& d, const ObjectiveContext& ctx,
                                 std::size_t restarts = 10, std::size_t iters = 200,
                                 std::uint64_t seed = 0) {
    std::size_t p = d.p();
    std::size_t n1 = ctx.n_trial();
    const auto& trial = ctx.trial_rows();

    auto trial_objective = [&](const std::vector<double>& beta) {
        std::vector<std::uint8_t> w(n1);
        for (std::size_t k = 0; k < n1; ++k) {
            double z = beta[0];
            for (std::size_t j = 0; j < p; ++j) z += beta[j + 1] * d.x(trial[k], j);
            w[k] = z >= 0.0 ? 1 : 0;
        }
        return ctx.eval_trial_mask(w);
    };

    std::vector<double> best_beta{1.0};
    best_beta.resize(p + 1, 0.0);
    double best_obj = trial_objective(best_beta);

    Rng rng(seed);
    for (std::size_t rs = 0; rs <= restarts; ++rs) {
        std::vector<double> beta(p + 1, 0.0);
        if (rs == 0) {
            beta[0] = 1.0;  // w == 1
        } else {
            for (auto& b : beta) b = rng.normal();
        }
        double obj = trial_objective(beta);

        std::vector<double> score(n1);
        auto recompute_scores = [&] {
            for (std::size_t k = 0; k < n1; ++k) {
                double z = beta[0];
                for (std::size_t j = 0; j < p; ++j) z += beta[j + 1] * d.x(trial[k], j);
                score[k] = z;
            }
        };
        recompute_scores();

        std::size_t since_improve = 0;
        for (std::size_t it = 0; it < iters && since_improve <= p; ++it) {
            std::size_t coord = it % (p + 1);
            // breakpoints where a trial row's inclusion flips as beta[coord] moves
            std::vector<std::pair<double, std::size_t>> brk;
            brk.reserve(n1);
            detail::RunningObjective run;
            run.n1 = static_cast<double>(n1);
            run.min_kept = static_cast<double>(ctx.min_kept());
            for (std::size_t k = 0; k < n1; ++k) {
                double z = coord == 0 ? 1.0 : d.x(trial[k], coord - 1);
                bool kept_at_minus_inf;
                if (z > 0.0) {
                    brk.emplace_back(beta[coord] - score[k] / z, k);
                    kept_at_minus_inf = false;  // turns on at the breakpoint
                } else if (z < 0.0) {
                    brk.emplace_back(beta[coord] - score[k] / z, k);
                    kept_at_minus_inf = true;   // turns off at the breakpoint
                } else {
                    kept_at_minus_inf = score[k] >= 0.0;
                }
                if (kept_at_minus_inf)
                    run.add(ctx.badness(k), ctx.treated(k), +1);
            }
            if (brk.empty()) {
                ++since_improve;
                continue;
            }
            std::sort(brk.begin(), brk.end());

            double cand_best = run.value();  // interval (-inf, first breakpoint)
            double cand_b = brk.front().first - 1.0;
            for (std::size_t a = 0; a < brk.size();) {
                std::size_t b = a;
                while (b < brk.size() && brk[b].first == brk[a].first) {
                    std::size_t k = brk[b].second;
                    double z = coord == 0 ? 1.0 : d.x(trial[k], coord - 1);
                    run.add(ctx.badness(k), ctx.treated(k), z > 0.0 ? +1 : -1);
                    ++b;
                }
                double rep = b < brk.size() ? 0.5 * (brk[a].first + brk[b].first)
                                            : brk[a].first + 1.0;
                double v = run.value();
                if (v < cand_best) {
                    cand_best = v;
                    cand_b = rep;
                }
                a = b;
            }

            double old = beta[coord];
            beta[coord] = cand_b;
            double exact = trial_objective(beta);
            if (exact < obj) {
                obj = exact;
                recompute_scores();
                since_improve = 0;
            } else {
                beta[coord] = old;
                ++since_improve;
            }
        }

        if (obj < best_obj) {
            best_obj = obj;
            best_beta = beta;
        }
    }

    WeightRule r;
    r.kind = RuleKind::Linear;
    r.beta = best_beta;
    r.objective = best_obj;
    return r;
}

// ---------------------------------------------------------------------------
// single randomized tree

inline WeightRule one_tree(const Dataset& d, const ObjectiveContext& ctx, const FeatureProbs& f,
                           RashomonConfig cfg) {
    cfg.m_keep = 1;
    RashomonSet rs = build_rashomon(d, ctx, f, cfg);
    WeightRule r;
    r.kind = RuleKind::Tree;
    r.tree = rs.trees.front();
    r.objective = r.tree.objective;
    return r;
}

// ---------------------------------------------------------------------------
// JSON

inline Json rule_to_json(const WeightRule& r) {
    Json j;
    j["kind"] = rule_kind_name(r.kind);
    j["objective"] = std::isfinite(r.objective) ? Json(r.objective) : Json(nullptr);
    switch (r.kind) {
        case RuleKind::Threshold:
            j["lsp"] = r.lsp;
            j["l_marginal"] = r.l_marginal;
            break;
        case RuleKind::Linear:
            j["beta"] = r.beta;
            break;
        case RuleKind::Indicator:
            j["std_mean"] = r.std_mean;
            j["std_sd"] = r.std_sd;
            j["centers"] = r.centers;
            j["labels"] = r.center_labels;
            break;
        case RuleKind::Tree:
            j["tree"] = tree_to_json(r.tree);
            break;
    }
    return j;
}

inline WeightRule rule_from_json(const Json& j) {
    WeightRule r;
    std::string kind = j.at("kind").get<std::string>();
    r.objective = j.at("objective").is_null() ? std::numeric_limits<double>::infinity()
                                              : j.at("objective").get<double>();
    if (kind == "threshold") {
        r.kind = RuleKind::Threshold;
        r.lsp = j.at("lsp").get<double>();
        r.l_marginal = j.at("l_marginal").get<double>();
    } else if (kind == "linear") {
        r.kind = RuleKind::Linear;
        r.beta = j.at("beta").get<std::vector<double>>();
    } else if (kind == "indicator") {
        r.kind = RuleKind::Indicator;
        r.std_mean = j.at("std_mean").get<std::vector<double>>();
        r.std_sd = j.at("std_sd").get<std::vector<double>>();
        r.centers = j.at("centers").get<std::vector<std::vector<double>>>();
        r.center_labels = j.at("labels").get<std::vector<std::uint8_t>>();
    } else if (kind == "tree") {
        r.kind = RuleKind::Tree;
        r.tree = tree_from_json(j.at("tree"));
    } else {
        fail(ErrorCode::Parse, "unknown rule kind '" + kind + "'");
    }
    return r;
}

}  // namespace rootopt
