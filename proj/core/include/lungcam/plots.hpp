#pragma once

#include <string>
#include <vector>

#include "lungcam/png_writer.hpp"
#include "lungcam/stats.hpp"

namespace lungcam {

/// ROC curve on unit axes with the chance diagonal.
Canvas plot_roc(const std::vector<RocPoint>& curve, int size = 320);

struct BoxGroup {
    std::string name;
    std::vector<double> values;
};

/// One box per group: quartile box, median bar, whiskers to min/max, and
/// every observation as a dot.
Canvas plot_boxes(const std::vector<BoxGroup>& groups, int width = 320, int height = 320);

/// Scatter of (x, y) with fill colour by cluster and marker shape by label
/// index (0 disc, 1 square, 2 cross, cycling).
Canvas plot_scatter(const std::vector<double>& xy, const std::vector<int>& cluster, const std::vector<int>& marker,
                    int size = 400);

/// Polyline of y over x = 1..n with the selected point highlighted.
Canvas plot_curve(const std::vector<double>& y, int highlight, int width = 320, int height = 240);

}  // namespace lungcam
