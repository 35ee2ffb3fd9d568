#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "homeauth/models.hpp"
#include "homeauth/rng.hpp"

namespace homeauth::detail {

/// Split threshold between two consecutive distinct sorted values.
inline double midpoint(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

/// Gini CART grown until pure. `samples` are row indices and may repeat
/// (bootstrap). Each split considers up to `max_features` non-constant
/// features drawn without replacement.
DecisionTree grow_classification_tree(std::span<const double> x, std::size_t cols, std::span<const std::size_t> y,
                                      std::size_t classes, std::vector<std::size_t> samples,
                                      std::size_t max_features, Rng& rng);

/// Row indices sorted by each feature, computed once per training set.
class PresortedColumns {
public:
    PresortedColumns(std::span<const double> x, std::size_t rows, std::size_t cols);
    std::span<const std::uint32_t> order(std::size_t feature) const {
        return {order_.data() + feature * rows_, rows_};
    }

private:
    std::size_t rows_;
    std::vector<std::uint32_t> order_;
};

using LeafValueFn = std::function<double(std::span<const std::size_t> samples)>;

/// Squared-error regression tree of depth <= max_depth on `target`; leaf
/// values come from `leaf_value` over the samples reaching the leaf.
DecisionTree grow_regression_tree(std::span<const double> x, std::size_t rows, std::size_t cols,
                                  const PresortedColumns& sorted, std::span<const double> target, int max_depth,
                                  const LeafValueFn& leaf_value);

}  // namespace homeauth::detail
