#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "odectrl/types.hpp"

namespace odectrl {

// Rows are samples, labels take values in {0, 1}. Classes are balanced by
// construction for all generated sets (within one sample for odd counts).
struct LabeledDataset {
  MatrixXd features;       // m x n
  Eigen::VectorXi labels;  // m
  Eigen::Index size() const { return features.rows(); }
  Eigen::Index width() const { return features.cols(); }
};

// Synthetic 2-D benchmark sets:
//   donut1d - two thin concentric rings (radius ~0.5 vs ~1.0); the data
//             support is one-dimensional and no line separates the classes
//   donut2d - class 0 uniform on the disk r <= 0.5, class 1 uniform on the
//             annulus 0.7 <= r <= 1.0
//   squares - uniform on [-1,1]^2, label 1 iff x1 * x2 > 0
//   spiral  - two interleaved Archimedean arms r = 0.1 + 0.35 theta / pi,
//             theta in [0, 3 pi], arm offset pi, noise sigma = 0.03
// Samples alternate classes, so any prefix is balanced. Same name, count and
// seed always reproduce the same bytes.
LabeledDataset generate(std::string_view name, int count, std::uint64_t seed);

// Reads IDX-format image/label files, keeps only the two requested digits
// (mapped to labels 0 and 1), scales pixels to [0, 1], shuffles with the
// seed, and returns disjoint train/test splits of the requested sizes.
std::pair<LabeledDataset, LabeledDataset> load_idx(
    const std::string& images_path, const std::string& labels_path,
    int digit_zero, int digit_one, int train_count, int test_count,
    std::uint64_t seed);

// CSV with header x1,...,xn,label; features are written with 17 significant
// digits so a write/read round trip is exact.
void save_csv(const std::string& path, const LabeledDataset& data);
LabeledDataset load_csv(const std::string& path);

}  // namespace odectrl
