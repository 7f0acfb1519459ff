#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rootopt/dataset.hpp"
#include "rootopt/estimators.hpp"
#include "rootopt/math.hpp"
#include "rootopt/parallel.hpp"
#include "rootopt/rng.hpp"
#include "rootopt/tree.hpp"

namespace rootopt {

enum class MidpointRule { Median, Midrange };

// Split-or-stop distribution over the p features plus a terminal "leaf"
// entry; entries sum to one.
struct FeatureProbs {
    std::vector<double> probs;  // length p+1, last entry = leaf

    std::size_t p() const { return probs.empty() ? 0 : probs.size() - 1; }
    double leaf() const { return probs.back(); }
};

struct SamplerConfig {
    double eps_explore = 0.2;
    double leaf_prob = 0.4;
    double leaf_floor = 0.05;
    double smoothing = 1e-3;       // correlation smoothing for feature probs
    std::size_t max_depth = 6;
    double gamma = 1.0;            // leaf-probability escalation per depth
    double rho = 0.5;              // rejected-feature mass multiplier
    MidpointRule midpoint = MidpointRule::Median;
};

struct RashomonConfig {
    std::size_t M = 5000;
    std::size_t m_keep = 10;
    std::uint64_t seed = 0;
    SamplerConfig sampler;
};

// Accepted-split audit trail: (parent_loss, new_loss) pairs.
struct SamplerTrace {
    std::vector<std::pair<double, double>> accepted_splits;
};

// Feature j gets mass proportional to corr(X_j, per-unit loss contribution)^2
// + smoothing over trial rows; the leaf entry is fixed at leaf_prob. The loss
// contribution is the squared centered IPW pseudo-outcome pair, so mass
// concentrates on features that separate the high-variance units the trees
// are meant to prune; squaring keeps the sampling-noise correlations of
// uninformative features from swamping the informative ones when p is large.
inline FeatureProbs init_feature_probs(const Dataset& d, const ObjectiveContext& ctx,
                                       double leaf_prob, double smoothing = 1e-3,
                                       double leaf_floor = 0.05) {
    std::size_t p = d.p();
    std::vector<double> contrast(ctx.n_trial());
    for (std::size_t k = 0; k < ctx.n_trial(); ++k) contrast[k] = ctx.badness(k);

    FeatureProbs f;
    f.probs.assign(p + 1, 0.0);
    double leaf = clamp01(leaf_prob, leaf_floor, 1.0);
    f.probs[p] = leaf;
    std::vector<double> raw(p, 0.0);
    double total = 0.0;
    std::vector<double> col(ctx.n_trial());
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = 0; k < ctx.n_trial(); ++k) col[k] = d.x(ctx.trial_rows()[k], j);
        double c = pearson_corr(col, contrast);
        raw[j] = c * c + smoothing;
        total += raw[j];
    }
    if (total > 0.0)
        for (std::size_t j = 0; j < p; ++j) f.probs[j] = (1.0 - leaf) * raw[j] / total;
    return f;
}

namespace detail {

struct SamplerState {
    const Dataset* d;
    const ObjectiveContext* ctx;
    const SamplerConfig* cfg;
    Rng rng;
    std::vector<std::uint8_t> w;   // current global weights, all rows
    double cur_loss = 0.0;
    SamplerTrace* trace = nullptr;

    double objective() const { return (*ctx)(w); }

    void set_region(const std::vector<std::size_t>& rows, std::uint8_t c) {
        for (std::size_t i : rows) w[i] = c;
    }
};

inline double split_value(const SamplerState& st, const std::vector<std::size_t>& rows,
                          std::size_t j) {
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (std::size_t i : rows) vals.push_back(st.d->x(i, j));
    return st.cfg->midpoint == MidpointRule::Median ? lower_median(std::move(vals))
                                                    : midrange(vals);
}

// Algorithm: repeatedly draw feature-or-leaf from the local probabilities.
// A leaf labels the whole region by explore/exploit on the global loss. A
// feature splits at the local midpoint, tentatively labels the children by
// the best of the four {0,1}^2 assignments, and the split sticks iff the new
// global loss does not exceed parent_loss; otherwise the feature's mass is
// reduced and the draw repeats. Regions arrive uniformly labeled.
inline std::unique_ptr<TreeNode> split_region(SamplerState& st, std::vector<std::size_t> rows,
                                              std::vector<double> f, double parent_loss,
                                              std::size_t depth) {
    const std::size_t p = f.size() - 1;
    const std::uint8_t entry_label = st.w[rows[0]];  // regions arrive uniform
    std::size_t rejections = 0;
    bool force_leaf = depth >= st.cfg->max_depth;

    for (;;) {
        double leaf_eff = std::min(1.0, f[p] * std::pow(st.cfg->gamma, static_cast<double>(depth)));
        if (force_leaf || rejections >= 3 * p) leaf_eff = 1.0;

        std::vector<double> weights(p + 1, 0.0);
        double feat_total = 0.0;
        for (std::size_t j = 0; j < p; ++j) feat_total += f[j];
        if (feat_total <= 0.0) leaf_eff = 1.0;
        for (std::size_t j = 0; j < p; ++j)
            weights[j] = feat_total > 0.0 ? (1.0 - leaf_eff) * f[j] / feat_total : 0.0;
        weights[p] = leaf_eff;
        std::size_t pick = st.rng.categorical(weights);

        if (pick == p) {
            // leaf: exploit picks the global-loss argmin; explore flips a coin
            st.set_region(rows, 0);
            double loss0 = st.objective();
            st.set_region(rows, 1);
            double loss1 = st.objective();
            int c_exploit = loss1 < loss0 ? 1 : 0;
            int c_explore = st.rng.bernoulli(0.5) ? 1 : 0;
            bool explore = st.rng.bernoulli(st.cfg->eps_explore);
            int c = explore ? c_explore : c_exploit;
            st.set_region(rows, static_cast<std::uint8_t>(c));
            st.cur_loss = c ? loss1 : loss0;
            return TreeNode::leaf(c);
        }

        std::size_t j = pick;
        double u = split_value(st, rows, j);
        std::vector<std::size_t> left, right;
        for (std::size_t i : rows) (st.d->x(i, j) <= u ? left : right).push_back(i);

        bool degenerate = left.empty() || right.empty();
        double new_loss = std::numeric_limits<double>::infinity();
        int best_cl = 0, best_cr = 0;
        if (!degenerate) {
            for (int cl = 0; cl <= 1; ++cl) {
                for (int cr = 0; cr <= 1; ++cr) {
                    st.set_region(left, static_cast<std::uint8_t>(cl));
                    st.set_region(right, static_cast<std::uint8_t>(cr));
                    double loss = st.objective();
                    if (loss < new_loss) {
                        new_loss = loss;
                        best_cl = cl;
                        best_cr = cr;
                    }
                }
            }
        }

        if (!degenerate && new_loss <= parent_loss) {
            st.set_region(left, static_cast<std::uint8_t>(best_cl));
            st.set_region(right, static_cast<std::uint8_t>(best_cr));
            st.cur_loss = new_loss;
            if (st.trace) st.trace->accepted_splits.emplace_back(parent_loss, new_loss);
            auto lnode = split_region(st, std::move(left), f, st.cur_loss, depth + 1);
            auto rnode = split_region(st, std::move(right), f, st.cur_loss, depth + 1);
            return TreeNode::internal(j, u, std::move(lnode), std::move(rnode));
        }

        // rejected: restore the region's uniform label, damp the feature
        if (!degenerate) st.set_region(rows, entry_label);
        f[j] *= st.cfg->rho;
        double z = 0.0;
        for (double v : f) z += v;
        if (z > 0.0)
            for (double& v : f) v /= z;
        ++rejections;
    }
}

}  // namespace detail

inline WeightTree sample_tree(const Dataset& d, const ObjectiveContext& ctx,
                              const FeatureProbs& f, const SamplerConfig& cfg, std::uint64_t seed,
                              SamplerTrace* trace = nullptr) {
    detail::SamplerState st;
    st.d = &d;
    st.ctx = &ctx;
    st.cfg = &cfg;
    st.rng = Rng(seed);
    st.w.assign(d.n(), 1);  // start from the full target population
    st.trace = trace;
    st.cur_loss = st.objective();

    std::vector<std::size_t> all(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) all[i] = i;
    auto root = detail::split_region(st, std::move(all), f.probs, st.cur_loss, 0);

    WeightTree t;
    t.root = std::move(root);
    t.objective = st.cur_loss;
    t.depth = tree_depth(*t.root);
    t.seed = seed;
    return t;
}

// ---------------------------------------------------------------------------
// Rashomon set

struct RashomonSet {
    std::vector<WeightTree> trees;  // sorted by objective ascending
    std::size_t m = 0;              // retained count
    std::size_t M = 0;              // total sampled
    double epsilon_explore = 0.0;
};

// Samples M trees with per-tree seeds derived from (seed, index) and keeps
// the m_keep best objectives among functionally distinct trees. Two trees
// that induce the same inclusion labels on the dataset are the same
// interpretation (one may just carry vacuous splits), so only the first is
// eligible. Deterministic for a fixed config regardless of worker count.
inline RashomonSet build_rashomon(const Dataset& d, const ObjectiveContext& ctx,
                                  const FeatureProbs& f, const RashomonConfig& cfg) {
    if (cfg.M < 1 || cfg.m_keep < 1 || cfg.M < cfg.m_keep)
        fail(ErrorCode::Config, "need M >= m_keep >= 1");
    std::vector<WeightTree> trees(cfg.M);
    parallel_for(cfg.M, [&](std::size_t i) {
        trees[i] = sample_tree(d, ctx, f, cfg.sampler, derive_seed(cfg.seed, i));
    });

    std::map<std::string, std::size_t> seen;  // per-row label vector -> first index
    std::vector<std::size_t> distinct;
    for (std::size_t i = 0; i < trees.size(); ++i) {
        auto labels = tree_labels(trees[i], d);
        std::string key(labels.begin(), labels.end());
        if (seen.emplace(std::move(key), i).second) distinct.push_back(i);
    }
    std::sort(distinct.begin(), distinct.end(), [&](std::size_t a, std::size_t b) {
        if (trees[a].objective != trees[b].objective) return trees[a].objective < trees[b].objective;
        return a < b;
    });

    RashomonSet rs;
    rs.M = cfg.M;
    rs.epsilon_explore = cfg.sampler.eps_explore;
    std::size_t keep = std::min(cfg.m_keep, distinct.size());
    rs.trees.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) rs.trees.push_back(std::move(trees[distinct[k]]));
    rs.m = keep;
    return rs;
}

// Majority vote over the retained trees; ties keep the unit (label 1).
inline int ensemble_predict(const RashomonSet& rs, std::span<const double> x) {
    std::size_t votes = 0;
    for (const auto& t : rs.trees) votes += static_cast<std::size_t>(tree_predict(t, x));
    return 2 * votes >= rs.trees.size() ? 1 : 0;
}

inline std::vector<std::uint8_t> ensemble_labels(const RashomonSet& rs, const Dataset& d) {
    std::vector<std::uint8_t> out(d.n());
    for (std::size_t i = 0; i < d.n(); ++i)
        out[i] = static_cast<std::uint8_t>(ensemble_predict(rs, d.row(i)));
    return out;
}

// ---------------------------------------------------------------------------
// characteristic tree: greedy Gini CART fit to the ensemble's labels

struct CharacteristicTree {
    WeightTree tree;
    double agreement = 0.0;  // training agreement with the ensemble labels
};

namespace detail {

inline double gini(std::size_t ones, std::size_t total) {
    if (total == 0) return 0.0;
    double p = static_cast<double>(ones) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
}

inline std::unique_ptr<TreeNode> cart_node(const Dataset& d, const std::vector<std::uint8_t>& labels,
                                           std::vector<std::size_t> rows, std::size_t depth,
                                           std::size_t max_depth) {
    std::size_t ones = 0;
    for (std::size_t i : rows) ones += labels[i];
    int majority = 2 * ones >= rows.size() ? 1 : 0;
    if (ones == 0 || ones == rows.size() || depth >= max_depth || rows.size() < 2)
        return TreeNode::leaf(majority);

    double parent_impurity = gini(ones, rows.size()) * static_cast<double>(rows.size());
    double best_score = parent_impurity;
    std::size_t best_j = 0;
    double best_thr = 0.0;
    bool found = false;

    std::vector<std::pair<double, std::uint8_t>> vals(rows.size());
    for (std::size_t j = 0; j < d.p(); ++j) {
        for (std::size_t k = 0; k < rows.size(); ++k)
            vals[k] = {d.x(rows[k], j), labels[rows[k]]};
        std::sort(vals.begin(), vals.end());
        std::size_t left_n = 0, left_ones = 0;
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            ++left_n;
            left_ones += vals[k].second;
            if (vals[k].first == vals[k + 1].first) continue;
            double score = gini(left_ones, left_n) * static_cast<double>(left_n) +
                           gini(ones - left_ones, rows.size() - left_n) *
                               static_cast<double>(rows.size() - left_n);
            if (score < best_score - 1e-12) {
                best_score = score;
                best_j = j;
                best_thr = 0.5 * (vals[k].first + vals[k + 1].first);
                found = true;
            }
        }
    }
    if (!found) return TreeNode::leaf(majority);

    std::vector<std::size_t> left, right;
    for (std::size_t i : rows) (d.x(i, best_j) <= best_thr ? left : right).push_back(i);
    return TreeNode::internal(best_j, best_thr,
                              cart_node(d, labels, std::move(left), depth + 1, max_depth),
                              cart_node(d, labels, std::move(right), depth + 1, max_depth));
}

}  // namespace detail

// Single-tree explanation fit to ensemble_predict over all rows.
inline CharacteristicTree characteristic_tree(const RashomonSet& rs, const Dataset& d,
                                              std::size_t max_depth = 3) {
    if (rs.trees.empty()) fail(ErrorCode::Config, "empty Rashomon set");
    auto labels = ensemble_labels(rs, d);
    std::vector<std::size_t> rows(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) rows[i] = i;

    CharacteristicTree out;
    out.tree.root = detail::cart_node(d, labels, std::move(rows), 0, max_depth);
    out.tree.depth = tree_depth(*out.tree.root);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < d.n(); ++i)
        if (tree_predict(out.tree, d.row(i)) == labels[i]) ++agree;
    out.agreement = static_cast<double>(agree) / static_cast<double>(d.n());
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline Json rashomon_to_json(const RashomonSet& rs) {
    Json j;
    j["m"] = rs.m;
    j["M"] = rs.M;
    j["epsilon_explore"] = rs.epsilon_explore;
    j["trees"] = Json::array();
    for (const auto& t : rs.trees) j["trees"].push_back(tree_to_json(t));
    return j;
}

inline RashomonSet rashomon_from_json(const Json& j) {
    RashomonSet rs;
    rs.m = j.at("m").get<std::size_t>();
    rs.M = j.at("M").get<std::size_t>();
    rs.epsilon_explore = j.at("epsilon_explore").get<double>();
    for (const auto& tj : j.at("trees")) rs.trees.push_back(tree_from_json(tj));
    return rs;
}

}  // namespace rootopt
