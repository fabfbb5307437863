#include "ctex/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ctex {

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int n_classes) {
    if (preds.size() != labels.size()) {
        throw std::invalid_argument("confusion: " + std::to_string(preds.size()) +
                                    " predictions vs " + std::to_string(labels.size()) +
                                    " labels");
    }
    if (n_classes < 1) throw std::invalid_argument("confusion: n_classes must be >= 1");
    ConfusionMatrix cm;
    cm.counts.setZero(n_classes, n_classes);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int t = labels[i], p = preds[i];
        if (t < 0 || t >= n_classes || p < 0 || p >= n_classes) {
            throw std::out_of_range("confusion: class id out of range at sample " +
                                    std::to_string(i));
        }
        ++cm.counts(t, p);
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const long total = cm.total();
    if (total == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
    return static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
}

double macro_f1(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::invalid_argument("macro_f1: empty confusion matrix");
    const int n = cm.n_classes();
    double sum = 0.0;
    for (int c = 0; c < n; ++c) {
        const double tp = static_cast<double>(cm.counts(c, c));
        const double fn = static_cast<double>(cm.counts.row(c).sum()) - tp;
        const double fp = static_cast<double>(cm.counts.col(c).sum()) - tp;
        const double denom = 2.0 * tp + fp + fn;
        sum += (denom > 0.0) ? (2.0 * tp / denom) : 0.0;
    }
    return sum / static_cast<double>(n);
}

Image confusion_heatmap(const ConfusionMatrix& cm, int cell_px) {
    const int n = cm.n_classes();
    if (n < 1 || cell_px < 1) throw std::invalid_argument("confusion_heatmap: bad arguments");
    const double max_count = std::max<long>(1, cm.counts.maxCoeff());
    Image img(n * cell_px, n * cell_px, 3);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double t = static_cast<double>(cm.counts(r, c)) / max_count;
            const double red = t;
            const double green = t;
            const double blue = 0.4 * (1.0 - t);
            for (int y = r * cell_px; y < (r + 1) * cell_px; ++y) {
                for (int x = c * cell_px; x < (c + 1) * cell_px; ++x) {
                    img.at(y, x, 0) = red;
                    img.at(y, x, 1) = green;
                    img.at(y, x, 2) = blue;
                }
            }
        }
    }
    return img;
}

}  // namespace ctex
