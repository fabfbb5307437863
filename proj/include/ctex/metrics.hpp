#pragma once

#include <Eigen/Core>
#include <vector>

#include "ctex/image.hpp"

namespace ctex {

// Row = true class, column = predicted class.
struct ConfusionMatrix {
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts;

    int n_classes() const { return static_cast<int>(counts.rows()); }
    long total() const { return counts.sum(); }
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int n_classes);

// trace / total.
double accuracy(const ConfusionMatrix& cm);

// Unweighted mean of per-class F1 = 2tp/(2tp + fp + fn); a class with
// precision + recall = 0 contributes 0.
double macro_f1(const ConfusionMatrix& cm);

// Cell-block rendering of the matrix (dark blue = 0 to yellow = max count),
// suitable for the PPM writer.
Image confusion_heatmap(const ConfusionMatrix& cm, int cell_px = 24);

}  // namespace ctex
