#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "rootopt/error.hpp"
#include "rootopt/math.hpp"
#include "rootopt/rng.hpp"
#include "rootopt/tree.hpp"

namespace rootopt {

// Tree optimization over binarized covariates: xb entries in {0,1}, loss
// evaluated on per-row inclusion labels.
struct BinaryTreeProblem {
    std::vector<std::uint8_t> xb;  // row-major n*p, entries 0/1
    std::size_t n = 0, p = 0;
    std::size_t q = 2;             // PRTQ leaf count
    std::function<double(const std::vector<std::uint8_t>&)> loss;  // labels over rows

    std::uint8_t x(std::size_t i, std::size_t j) const { return xb[i * p + j]; }
};

// Median-threshold binarization of a real matrix.
inline std::vector<std::uint8_t> binarize_by_median(const std::vector<double>& x, std::size_t n,
                                                    std::size_t p) {
    std::vector<std::uint8_t> out(n * p);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = x[i * p + j];
        double med = lower_median(col);
        for (std::size_t i = 0; i < n; ++i) out[i * p + j] = x[i * p + j] > med ? 1 : 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// pure random tree with Q leaves

// Grow by Q-1 uniform (leaf, feature) splits, then label every leaf
// uniformly from {0,1}. Splits use threshold 0.5 on the binary entries.
// Trees are iid across calls with independent seeds.
inline WeightTree prtq_sample(const BinaryTreeProblem& prob, std::uint64_t seed) {
    Rng rng(seed);
    auto root = TreeNode::leaf(1);
    std::vector<TreeNode*> leaves{root.get()};
    for (std::size_t step = 1; step < prob.q; ++step) {
        std::size_t pick = rng.uniform_index(leaves.size());
        std::size_t feature = rng.uniform_index(prob.p);
        TreeNode* node = leaves[pick];
        node->is_leaf = false;
        node->feature = feature;
        node->threshold = 0.5;
        node->left = TreeNode::leaf(1);
        node->right = TreeNode::leaf(1);
        leaves[pick] = node->left.get();
        leaves.push_back(node->right.get());
    }
    for (TreeNode* leaf : leaves) leaf->label = rng.bernoulli(0.5) ? 1 : 0;

    WeightTree t;
    t.root = std::move(root);
    t.depth = tree_depth(*t.root);
    t.seed = seed;
    std::vector<std::uint8_t> labels(prob.n);
    std::vector<double> xreal(prob.p);
    for (std::size_t i = 0; i < prob.n; ++i) {
        for (std::size_t j = 0; j < prob.p; ++j) xreal[j] = prob.x(i, j);
        labels[i] = static_cast<std::uint8_t>(tree_predict(t, xreal));
    }
    t.objective = prob.loss(labels);
    return t;
}

inline std::vector<std::uint8_t> binary_tree_labels(const BinaryTreeProblem& prob,
                                                    const WeightTree& t) {
    std::vector<std::uint8_t> labels(prob.n);
    std::vector<double> xreal(prob.p);
    for (std::size_t i = 0; i < prob.n; ++i) {
        for (std::size_t j = 0; j < prob.p; ++j) xreal[j] = prob.x(i, j);
        labels[i] = static_cast<std::uint8_t>(tree_predict(t, xreal));
    }
    return labels;
}

// Upper bound on P(the Q-leaf optimum is missed by K iid PRTQ samples):
//   (1 - p/(Q-1)! * (1/(2p))^Q)^K
inline double prtq_bound(std::size_t p, std::size_t q, std::size_t k) {
    double fact = 1.0;
    for (std::size_t i = 2; i < q; ++i) fact *= static_cast<double>(i);
    double hit = static_cast<double>(p) / fact * std::pow(1.0 / (2.0 * static_cast<double>(p)),
                                                          static_cast<double>(q));
    double base = clamp01(1.0 - hit, 0.0, 1.0);
    return std::pow(base, static_cast<double>(k));
}

// ---------------------------------------------------------------------------
// exhaustive oracle

struct BruteForceResult {
    WeightTree tree;
    std::vector<std::uint8_t> labels;
    std::size_t enumerated = 0;
};

namespace detail {

struct BruteForceState {
    const BinaryTreeProblem* prob;
    std::size_t budget;
    std::size_t enumerated = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_leaves = 0;
    std::string best_key;
    std::unique_ptr<TreeNode> best_tree;
    std::vector<std::uint8_t> best_labels;
    std::vector<std::uint8_t> labels;
    std::set<std::string> seen_partitions;
};

// Enumerate structurally distinct trees with <= max_q leaves; "distinct"
// means distinct induced row partitions, so reordered splits of the same
// partition are not double-counted.
inline void enumerate_trees(BruteForceState& st, std::vector<std::vector<std::size_t>>& regions,
                            std::vector<std::unique_ptr<TreeNode>*>& slots,
                            std::unique_ptr<TreeNode>& root, std::size_t max_q);

inline void evaluate_labelings(BruteForceState& st,
                               const std::vector<std::vector<std::size_t>>& regions,
                               std::vector<std::unique_ptr<TreeNode>*>& slots,
                               std::unique_ptr<TreeNode>& root) {
    // dedup by the induced partition
    std::string part;
    {
        std::vector<std::size_t> region_of(st.prob->n);
        for (std::size_t r = 0; r < regions.size(); ++r)
            for (std::size_t i : regions[r]) region_of[i] = r;
        // canonical renumber in first-appearance order
        std::vector<std::size_t> remap(regions.size(), SIZE_MAX);
        std::size_t next = 0;
        part.reserve(st.prob->n * 2);
        for (std::size_t i = 0; i < st.prob->n; ++i) {
            if (remap[region_of[i]] == SIZE_MAX) remap[region_of[i]] = next++;
            part += static_cast<char>('a' + remap[region_of[i]] % 26);
            part += static_cast<char>('0' + remap[region_of[i]] / 26);
        }
    }
    if (!st.seen_partitions.insert(part).second) return;

    std::size_t q = regions.size();
    std::size_t combos = std::size_t{1} << q;
    for (std::size_t mask = 0; mask < combos; ++mask) {
        if (++st.enumerated > st.budget)
            fail(ErrorCode::BudgetExceeded, "brute-force enumeration exceeded budget");
        for (std::size_t r = 0; r < q; ++r) {
            std::uint8_t c = (mask >> r) & 1u;
            slots[r]->get()->label = c;
            for (std::size_t i : regions[r]) st.labels[i] = c;
        }
        double loss = st.prob->loss(st.labels);
        bool better = loss < st.best_loss - 1e-15;
        if (!better && std::abs(loss - st.best_loss) <= 1e-15 && st.best_tree) {
            if (q < st.best_leaves) better = true;
            else if (q == st.best_leaves) {
                std::string key;
                structure_key(*root, key);
                better = key < st.best_key;
            }
        }
        if (better || !st.best_tree) {
            st.best_loss = loss;
            st.best_leaves = q;
            st.best_tree = root->clone();
            st.best_labels = st.labels;
            std::string key;
            structure_key(*root, key);
            st.best_key = std::move(key);
        }
    }
}

inline void enumerate_trees(BruteForceState& st, std::vector<std::vector<std::size_t>>& regions,
                            std::vector<std::unique_ptr<TreeNode>*>& slots,
                            std::unique_ptr<TreeNode>& root, std::size_t max_q) {
    evaluate_labelings(st, regions, slots, root);
    if (regions.size() >= max_q) return;

    // try splitting each current leaf on each feature that separates it
    for (std::size_t r = 0; r < regions.size(); ++r) {
        for (std::size_t j = 0; j < st.prob->p; ++j) {
            std::vector<std::size_t> left, right;
            for (std::size_t i : regions[r]) (st.prob->x(i, j) == 0 ? left : right).push_back(i);
            if (left.empty() || right.empty()) continue;

            auto saved_region = std::move(regions[r]);
            TreeNode* node = slots[r]->get();
            node->is_leaf = false;
            node->feature = j;
            node->threshold = 0.5;
            node->left = TreeNode::leaf(1);
            node->right = TreeNode::leaf(1);

            regions[r] = std::move(left);
            regions.push_back(std::move(right));
            auto* slot_r = slots[r];
            slots[r] = &node->left;
            slots.push_back(&node->right);

            enumerate_trees(st, regions, slots, root, max_q);

            slots[r] = slot_r;
            slots.pop_back();
            regions[r] = std::move(saved_region);
            regions.pop_back();
            node->is_leaf = true;
            node->left.reset();
            node->right.reset();
        }
    }
}

}  // namespace detail

// Loss-minimizing tree over all structurally distinct trees with <= max_q
// leaves. Ties prefer fewer leaves, then the lexicographically smallest
// structure.
inline BruteForceResult brute_force_optimal(const BinaryTreeProblem& prob, std::size_t max_q,
                                            std::size_t budget = 1'000'000) {
    detail::BruteForceState st;
    st.prob = &prob;
    st.budget = budget;
    st.labels.assign(prob.n, 1);

    auto root = TreeNode::leaf(1);
    std::vector<std::vector<std::size_t>> regions(1);
    for (std::size_t i = 0; i < prob.n; ++i) regions[0].push_back(i);
    std::vector<std::unique_ptr<TreeNode>*> slots{&root};
    detail::enumerate_trees(st, regions, slots, root, max_q);

    BruteForceResult out;
    out.tree.root = std::move(st.best_tree);
    out.tree.objective = st.best_loss;
    out.tree.depth = tree_depth(*out.tree.root);
    out.labels = std::move(st.best_labels);
    out.enumerated = st.enumerated;
    return out;
}

}  // namespace rootopt
