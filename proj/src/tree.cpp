#include <algorithm>
#include <numeric>

#include "homeauth/error.hpp"
#include "homeauth/models.hpp"
#include "tree_builder.hpp"

namespace homeauth {

using nlohmann::json;

std::size_t DecisionTree::depth() const {
    if (nodes_.empty()) return 0;
    std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
    std::size_t best = 0;
    while (!stack.empty()) {
        auto [n, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        const Node& node = nodes_[static_cast<std::size_t>(n)];
        if (node.feature >= 0) {
            stack.push_back({node.left, d + 1});
            stack.push_back({node.right, d + 1});
        }
    }
    return best;
}

std::span<const double> DecisionTree::evaluate(std::span<const double> x) const {
    std::size_t n = 0;
    while (nodes_[n].feature >= 0) {
        const Node& node = nodes_[n];
        n = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                 : node.right);
    }
    return {leaves_.data() + nodes_[n].leaf * leaf_width_, leaf_width_};
}

std::int32_t DecisionTree::add_leaf(std::span<const double> values) {
    if (values.size() != leaf_width_) throw InternalError("leaf width mismatch");
    Node node;
    node.leaf = static_cast<std::uint32_t>(leaf_count());
    leaves_.insert(leaves_.end(), values.begin(), values.end());
    nodes_.push_back(node);
    return static_cast<std::int32_t>(nodes_.size() - 1);
}

std::int32_t DecisionTree::add_split(std::int32_t feature, double threshold) {
    Node node;
    node.feature = feature;
    node.threshold = threshold;
    nodes_.push_back(node);
    return static_cast<std::int32_t>(nodes_.size() - 1);
}

void DecisionTree::set_children(std::int32_t node, std::int32_t left, std::int32_t right) {
    nodes_.at(static_cast<std::size_t>(node)).left = left;
    nodes_.at(static_cast<std::size_t>(node)).right = right;
}

json DecisionTree::to_json() const {
    // Iterative post-order build so deep forest trees cannot blow the stack.
    std::vector<json> built(nodes_.size());
    std::vector<std::pair<std::size_t, bool>> stack{{0, false}};
    while (!stack.empty()) {
        auto [n, expanded] = stack.back();
        stack.pop_back();
        const Node& node = nodes_[n];
        if (node.feature < 0) {
            auto leaf = std::span<const double>(leaves_.data() + node.leaf * leaf_width_, leaf_width_);
            if (leaf_width_ == 1) built[n] = json{{"value", leaf[0]}};
            else built[n] = json{{"leaf", std::vector<double>(leaf.begin(), leaf.end())}};
        } else if (!expanded) {
            stack.push_back({n, true});
            stack.push_back({static_cast<std::size_t>(node.left), false});
            stack.push_back({static_cast<std::size_t>(node.right), false});
        } else {
            built[n] = json{{"feature", node.feature},
                            {"threshold", node.threshold},
                            {"left", std::move(built[static_cast<std::size_t>(node.left)])},
                            {"right", std::move(built[static_cast<std::size_t>(node.right)])}};
        }
    }
    return std::move(built[0]);
}

DecisionTree DecisionTree::from_json(const json& j, std::size_t leaf_width) {
    DecisionTree t(leaf_width);
    // Pre-order: node, then left subtree, then right subtree.
    std::function<std::int32_t(const json&)> build = [&](const json& n) -> std::int32_t {
        if (!n.is_object()) throw SchemaError("tree node: expected object");
        if (auto v = n.find("value"); v != n.end()) {
            if (leaf_width != 1) throw SchemaError("tree node: scalar leaf in a multi-class tree");
            const double value = v->get<double>();
            return t.add_leaf(std::span<const double>(&value, 1));
        }
        if (auto l = n.find("leaf"); l != n.end()) {
            auto values = l->get<std::vector<double>>();
            if (values.size() != leaf_width) throw SchemaError("tree node: leaf width mismatch");
            return t.add_leaf(values);
        }
        const auto feature = n.at("feature").get<std::int32_t>();
        if (feature < 0) throw SchemaError("tree node: negative feature index");
        const std::int32_t id = t.add_split(feature, n.at("threshold").get<double>());
        const std::int32_t left = build(n.at("left"));
        const std::int32_t right = build(n.at("right"));
        t.set_children(id, left, right);
        return id;
    };
    try {
        build(j);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("tree node: ") + e.what());
    }
    return t;
}

namespace detail {

namespace {

struct ClassGrower {
    std::span<const double> x;
    std::size_t cols;
    std::span<const std::size_t> y;
    std::size_t classes;
    std::size_t max_features;
    Rng& rng;
    DecisionTree tree;

    double at(std::size_t row, std::size_t f) const { return x[row * cols + f]; }

    std::int32_t leaf(const std::vector<double>& counts, std::size_t n) {
        std::vector<double> dist(classes);
        for (std::size_t k = 0; k < classes; ++k) dist[k] = counts[k] / static_cast<double>(n);
        return tree.add_leaf(dist);
    }

    std::int32_t grow(std::vector<std::size_t>& samples) {
        const std::size_t n = samples.size();
        std::vector<double> counts(classes, 0.0);
        for (auto s : samples) counts[y[s]] += 1.0;
        const auto nonzero = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; });
        if (nonzero <= 1 || n < 2) return leaf(counts, n);

        // Lazily shuffled feature order; keep drawing until enough
        // non-constant features are found or all are exhausted.
        std::vector<std::size_t> perm(cols);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::vector<std::size_t> chosen;
        for (std::size_t i = 0; i < cols && chosen.size() < max_features; ++i) {
            std::swap(perm[i], perm[i + rng.below(cols - i)]);
            const std::size_t f = perm[i];
            double lo = at(samples[0], f), hi = lo;
            for (auto s : samples) {
                lo = std::min(lo, at(s, f));
                hi = std::max(hi, at(s, f));
            }
            if (lo < hi) chosen.push_back(f);
        }
        if (chosen.empty()) return leaf(counts, n);
        std::sort(chosen.begin(), chosen.end());

        double best_proxy = -1.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        std::vector<std::pair<double, std::size_t>> column(n);
        std::vector<double> left(classes);
        for (auto f : chosen) {
            for (std::size_t i = 0; i < n; ++i) column[i] = {at(samples[i], f), y[samples[i]]};
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            std::fill(left.begin(), left.end(), 0.0);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left[column[i].second] += 1.0;
                if (!(column[i].first < column[i + 1].first)) continue;
                const double nl = static_cast<double>(i + 1);
                const double nr = static_cast<double>(n - i - 1);
                double sl = 0.0, sr = 0.0;
                for (std::size_t k = 0; k < classes; ++k) {
                    sl += left[k] * left[k];
                    const double r = counts[k] - left[k];
                    sr += r * r;
                }
                // Maximizing this minimizes the weighted child Gini impurity.
                const double proxy = sl / nl + sr / nr;
                if (proxy > best_proxy) {
                    best_proxy = proxy;
                    best_feature = f;
                    best_threshold = midpoint(column[i].first, column[i + 1].first);
                }
            }
        }

        std::vector<std::size_t> lhs, rhs;
        for (auto s : samples) (at(s, best_feature) <= best_threshold ? lhs : rhs).push_back(s);
        samples.clear();
        samples.shrink_to_fit();
        const std::int32_t id = tree.add_split(static_cast<std::int32_t>(best_feature), best_threshold);
        const std::int32_t l = grow(lhs);
        const std::int32_t r = grow(rhs);
        tree.set_children(id, l, r);
        return id;
    }
};

}  // namespace

DecisionTree grow_classification_tree(std::span<const double> x, std::size_t cols, std::span<const std::size_t> y,
                                      std::size_t classes, std::vector<std::size_t> samples,
                                      std::size_t max_features, Rng& rng) {
    ClassGrower g{x, cols, y, classes, std::max<std::size_t>(1, max_features), rng, DecisionTree(classes)};
    g.grow(samples);
    return std::move(g.tree);
}

PresortedColumns::PresortedColumns(std::span<const double> x, std::size_t rows, std::size_t cols)
    : rows_(rows), order_(rows * cols) {
    for (std::size_t f = 0; f < cols; ++f) {
        auto* o = order_.data() + f * rows;
        std::iota(o, o + rows, std::uint32_t{0});
        std::stable_sort(o, o + rows, [&](std::uint32_t a, std::uint32_t b) { return x[a * cols + f] < x[b * cols + f]; });
    }
}

namespace {

struct RegressionGrower {
    std::span<const double> x;
    std::size_t rows;
    std::size_t cols;
    const PresortedColumns& sorted;
    std::span<const double> target;
    int max_depth;
    const LeafValueFn& leaf_value;
    DecisionTree tree{1};
    std::vector<std::uint8_t> in_node;

    std::int32_t leaf(std::span<const std::size_t> samples) {
        const double v = leaf_value(samples);
        return tree.add_leaf(std::span<const double>(&v, 1));
    }

    std::int32_t grow(std::vector<std::size_t>& samples, int depth) {
        const std::size_t n = samples.size();
        if (depth >= max_depth || n < 2) return leaf(samples);
        double lo = target[samples[0]], hi = lo, total = 0.0;
        for (auto s : samples) {
            lo = std::min(lo, target[s]);
            hi = std::max(hi, target[s]);
            total += target[s];
        }
        if (!(lo < hi)) return leaf(samples);

        for (auto s : samples) in_node[s] = 1;
        double best_gain = -1.0;
        std::int64_t best_feature = -1;
        double best_threshold = 0.0;
        const double dn = static_cast<double>(n);
        for (std::size_t f = 0; f < cols; ++f) {
            const auto order = sorted.order(f);
            double sum_left = 0.0;
            std::size_t count_left = 0;
            double prev_value = 0.0;
            bool have_prev = false;
            for (auto row : order) {
                if (!in_node[row]) continue;
                const double v = x[row * cols + f];
                if (have_prev && prev_value < v) {
                    const double nl = static_cast<double>(count_left);
                    const double sr = total - sum_left;
                    // Reduction in squared error, up to the constant total^2/n.
                    const double gain = sum_left * sum_left / nl + sr * sr / (dn - nl);
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = static_cast<std::int64_t>(f);
                        best_threshold = midpoint(prev_value, v);
                    }
                }
                sum_left += target[row];
                ++count_left;
                prev_value = v;
                have_prev = true;
            }
        }
        for (auto s : samples) in_node[s] = 0;
        if (best_feature < 0) return leaf(samples);

        const auto f = static_cast<std::size_t>(best_feature);
        std::vector<std::size_t> lhs, rhs;
        for (auto s : samples) (x[s * cols + f] <= best_threshold ? lhs : rhs).push_back(s);
        const std::int32_t id = tree.add_split(static_cast<std::int32_t>(f), best_threshold);
        const std::int32_t l = grow(lhs, depth + 1);
        const std::int32_t r = grow(rhs, depth + 1);
        tree.set_children(id, l, r);
        return id;
    }
};

}  // namespace

DecisionTree grow_regression_tree(std::span<const double> x, std::size_t rows, std::size_t cols,
                                  const PresortedColumns& sorted, std::span<const double> target, int max_depth,
                                  const LeafValueFn& leaf_value) {
    RegressionGrower g{x, rows, cols, sorted, target, max_depth, leaf_value, DecisionTree(1), std::vector<std::uint8_t>(rows, 0)};
    std::vector<std::size_t> all(rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    g.grow(all, 0);
    return std::move(g.tree);
}

}  // namespace detail
}  // namespace homeauth
