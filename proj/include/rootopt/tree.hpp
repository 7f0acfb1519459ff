#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rootopt/dataset.hpp"
#include "rootopt/error.hpp"

namespace rootopt {

using Json = nlohmann::ordered_json;

// Binary decision tree mapping covariates to a {0,1} inclusion label.
// Routing: go left iff x[feature] <= threshold.
struct TreeNode {
    bool is_leaf = true;
    int label = 1;
    std::size_t feature = 0;
    double threshold = 0.0;
    std::unique_ptr<TreeNode> left, right;

    static std::unique_ptr<TreeNode> leaf(int label) {
        auto n = std::make_unique<TreeNode>();
        n->is_leaf = true;
        n->label = label;
        return n;
    }

    static std::unique_ptr<TreeNode> internal(std::size_t feature, double threshold,
                                              std::unique_ptr<TreeNode> l,
                                              std::unique_ptr<TreeNode> r) {
        auto n = std::make_unique<TreeNode>();
        n->is_leaf = false;
        n->feature = feature;
        n->threshold = threshold;
        n->left = std::move(l);
        n->right = std::move(r);
        return n;
    }

    std::unique_ptr<TreeNode> clone() const {
        auto n = std::make_unique<TreeNode>();
        n->is_leaf = is_leaf;
        n->label = label;
        n->feature = feature;
        n->threshold = threshold;
        if (left) n->left = left->clone();
        if (right) n->right = right->clone();
        return n;
    }
};

struct WeightTree {
    std::unique_ptr<TreeNode> root;
    double objective = std::numeric_limits<double>::infinity();
    std::size_t depth = 0;
    std::uint64_t seed = 0;

    WeightTree() = default;
    WeightTree(std::unique_ptr<TreeNode> r, double obj, std::size_t dep, std::uint64_t sd)
        : root(std::move(r)), objective(obj), depth(dep), seed(sd) {}
    WeightTree(const WeightTree& other)
        : root(other.root ? other.root->clone() : nullptr),
          objective(other.objective),
          depth(other.depth),
          seed(other.seed) {}
    WeightTree& operator=(const WeightTree& other) {
        if (this != &other) {
            root = other.root ? other.root->clone() : nullptr;
            objective = other.objective;
            depth = other.depth;
            seed = other.seed;
        }
        return *this;
    }
    WeightTree(WeightTree&&) = default;
    WeightTree& operator=(WeightTree&&) = default;
};

inline int tree_predict(const TreeNode& node, std::span<const double> x) {
    const TreeNode* cur = &node;
    while (!cur->is_leaf) cur = x[cur->feature] <= cur->threshold ? cur->left.get() : cur->right.get();
    return cur->label;
}

inline int tree_predict(const WeightTree& t, std::span<const double> x) {
    return tree_predict(*t.root, x);
}

inline std::vector<std::uint8_t> tree_labels(const WeightTree& t, const Dataset& d) {
    std::vector<std::uint8_t> out(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) out[i] = static_cast<std::uint8_t>(tree_predict(t, d.row(i)));
    return out;
}

inline std::size_t tree_depth(const TreeNode& node) {
    if (node.is_leaf) return 0;
    return 1 + std::max(tree_depth(*node.left), tree_depth(*node.right));
}

inline std::size_t tree_leaf_count(const TreeNode& node) {
    if (node.is_leaf) return 1;
    return tree_leaf_count(*node.left) + tree_leaf_count(*node.right);
}

// Canonical structure key used for deduplication in Rashomon sets.
inline void structure_key(const TreeNode& node, std::string& out) {
    if (node.is_leaf) {
        out += node.label ? "L1" : "L0";
        return;
    }
    out += '(';
    out += std::to_string(node.feature);
    out += '@';
    out += detail::format_double(node.threshold);
    structure_key(*node.left, out);
    out += '|';
    structure_key(*node.right, out);
    out += ')';
}

inline std::string structure_key(const WeightTree& t) {
    std::string out;
    structure_key(*t.root, out);
    return out;
}

// ---------------------------------------------------------------------------
// JSON: {"feature":..,"threshold":..,"left":..,"right":..} | {"leaf":0|1}

inline Json node_to_json(const TreeNode& node) {
    Json j;
    if (node.is_leaf) {
        j["leaf"] = node.label;
    } else {
        j["feature"] = node.feature;
        j["threshold"] = node.threshold;
        j["left"] = node_to_json(*node.left);
        j["right"] = node_to_json(*node.right);
    }
    return j;
}

inline std::unique_ptr<TreeNode> node_from_json(const Json& j) {
    if (j.contains("leaf")) return TreeNode::leaf(j.at("leaf").get<int>());
    return TreeNode::internal(j.at("feature").get<std::size_t>(), j.at("threshold").get<double>(),
                              node_from_json(j.at("left")), node_from_json(j.at("right")));
}

inline Json tree_to_json(const WeightTree& t) {
    Json j;
    j["objective"] = std::isfinite(t.objective) ? Json(t.objective) : Json(nullptr);
    j["seed"] = t.seed;
    j["root"] = node_to_json(*t.root);
    return j;
}

inline WeightTree tree_from_json(const Json& j) {
    WeightTree t;
    t.objective = j.at("objective").is_null() ? std::numeric_limits<double>::infinity()
                                              : j.at("objective").get<double>();
    t.seed = j.value("seed", std::uint64_t{0});
    t.root = node_from_json(j.at("root"));
    t.depth = tree_depth(*t.root);
    return t;
}

// ---------------------------------------------------------------------------
// Plain-text rendering. Parses back bit-exactly (thresholds use shortest
// round-trip formatting).
//
//   if x0 <= 2.5:  # age
//       w = 1
//   else:
//       w = 0

namespace detail {

inline void render_node(const TreeNode& node, const std::vector<std::string>& names,
                        std::size_t indent, std::string& out) {
    std::string pad(indent * 4, ' ');
    if (node.is_leaf) {
        out += pad + "w = " + std::to_string(node.label) + "\n";
        return;
    }
    out += pad + "if x" + std::to_string(node.feature) + " <= " + format_double(node.threshold) + ":";
    if (node.feature < names.size() && !names[node.feature].empty())
        out += "  # " + names[node.feature];
    out += "\n";
    render_node(*node.left, names, indent + 1, out);
    out += pad + "else:\n";
    render_node(*node.right, names, indent + 1, out);
}

struct TextCursor {
    std::vector<std::string> lines;
    std::size_t pos = 0;
};

inline std::unique_ptr<TreeNode> parse_node(TextCursor& c, std::size_t indent) {
    if (c.pos >= c.lines.size()) fail(ErrorCode::Parse, "unexpected end of tree text");
    std::string line = c.lines[c.pos];
    std::size_t spaces = line.find_first_not_of(' ');
    if (spaces == std::string::npos || spaces != indent * 4)
        fail(ErrorCode::Parse, "bad indentation in tree text: '" + line + "'");
    std::string body = line.substr(spaces);
    ++c.pos;
    if (body.rfind("w = ", 0) == 0) {
        int label = body[4] == '1' ? 1 : 0;
        return TreeNode::leaf(label);
    }
    if (body.rfind("if x", 0) != 0) fail(ErrorCode::Parse, "expected 'if x' or 'w =': '" + body + "'");
    std::size_t le = body.find(" <= ");
    std::size_t colon = body.find(':', le);
    if (le == std::string::npos || colon == std::string::npos)
        fail(ErrorCode::Parse, "malformed split line: '" + body + "'");
    std::size_t feature = std::stoul(body.substr(4, le - 4));
    double threshold = parse_double(body.substr(le + 4, colon - le - 4), c.pos);
    auto left = parse_node(c, indent + 1);
    if (c.pos >= c.lines.size() || c.lines[c.pos] != std::string(indent * 4, ' ') + "else:")
        fail(ErrorCode::Parse, "expected 'else:' branch");
    ++c.pos;
    auto right = parse_node(c, indent + 1);
    return TreeNode::internal(feature, threshold, std::move(left), std::move(right));
}

}  // namespace detail

inline std::string render_tree(const WeightTree& t, const std::vector<std::string>& names = {}) {
    if (t.root->is_leaf) return "w = " + std::to_string(t.root->label) + " (everywhere)\n";
    std::string out;
    detail::render_node(*t.root, names, 0, out);
    return out;
}

inline WeightTree parse_tree_text(const std::string& text) {
    WeightTree t;
    if (text.rfind("w = ", 0) == 0 && text.find("(everywhere)") != std::string::npos) {
        t.root = TreeNode::leaf(text[4] == '1' ? 1 : 0);
        t.depth = 0;
        return t;
    }
    detail::TextCursor c;
    std::string line;
    for (char ch : text) {
        if (ch == '\n') {
            std::size_t hash = line.find("  # ");
            if (hash != std::string::npos) line = line.substr(0, hash);
            if (!line.empty()) c.lines.push_back(line);
            line.clear();
        } else {
            line += ch;
        }
    }
    if (!line.empty()) c.lines.push_back(line);
    t.root = detail::parse_node(c, 0);
    t.depth = tree_depth(*t.root);
    return t;
}

}  // namespace rootopt
