#include "odectrl/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "odectrl/rng.hpp"

namespace odectrl {

namespace {

constexpr double kPi = 3.14159265358979323846;

LabeledDataset make_empty(int count) {
  if (count < 1) throw std::invalid_argument("generate: count must be positive");
  LabeledDataset d;
  d.features.resize(count, 2);
  d.labels.resize(count);
  return d;
}

void place_polar(LabeledDataset& d, int i, double r, double theta) {
  d.features(i, 0) = r * std::cos(theta);
  d.features(i, 1) = r * std::sin(theta);
}

LabeledDataset make_donut1d(int count, Rng& rng) {
  LabeledDataset d = make_empty(count);
  for (int i = 0; i < count; ++i) {
    const int label = i % 2;
    const double r = label == 0 ? rng.uniform(0.45, 0.55) : rng.uniform(0.95, 1.05);
    place_polar(d, i, r, rng.uniform(0.0, 2.0 * kPi));
    d.labels(i) = label;
  }
  return d;
}

LabeledDataset make_donut2d(int count, Rng& rng) {
  LabeledDataset d = make_empty(count);
  for (int i = 0; i < count; ++i) {
    const int label = i % 2;
    // Area-uniform radius: disk r in [0, 0.5], annulus r in [0.7, 1.0].
    const double u = rng.uniform();
    const double r = label == 0 ? 0.5 * std::sqrt(u)
                                : std::sqrt(0.49 + u * (1.0 - 0.49));
    place_polar(d, i, r, rng.uniform(0.0, 2.0 * kPi));
    d.labels(i) = label;
  }
  return d;
}

LabeledDataset make_squares(int count, Rng& rng) {
  LabeledDataset d = make_empty(count);
  for (int i = 0; i < count; ++i) {
    const int target = i % 2;
    // Rejection keeps the conditional law uniform on the target quadrant pair.
    double x = 0, y = 0;
    int label = -1;
    while (label != target) {
      x = rng.uniform(-1.0, 1.0);
      y = rng.uniform(-1.0, 1.0);
      label = (x * y > 0.0) ? 1 : 0;
    }
    d.features(i, 0) = x;
    d.features(i, 1) = y;
    d.labels(i) = label;
  }
  return d;
}

LabeledDataset make_spiral(int count, Rng& rng) {
  LabeledDataset d = make_empty(count);
  constexpr double kNoise = 0.03;
  for (int i = 0; i < count; ++i) {
    const int label = i % 2;
    const double theta = rng.uniform(0.0, 3.0 * kPi);
    const double r = 0.1 + 0.35 * theta / kPi;
    const double phi = theta + label * kPi;
    d.features(i, 0) = r * std::cos(phi) + kNoise * rng.normal();
    d.features(i, 1) = r * std::sin(phi) + kNoise * rng.normal();
    d.labels(i) = label;
  }
  return d;
}

}  // namespace

LabeledDataset generate(std::string_view name, int count, std::uint64_t seed) {
  Rng rng(seed);
  if (name == "donut1d") return make_donut1d(count, rng);
  if (name == "donut2d") return make_donut2d(count, rng);
  if (name == "squares") return make_squares(count, rng);
  if (name == "spiral") return make_spiral(count, rng);
  throw std::invalid_argument("generate: unknown dataset '" + std::string(name) +
                              "'; supported: donut1d, donut2d, squares, spiral");
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw std::runtime_error("load_idx: truncated header in " + path);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> load_idx(
    const std::string& images_path, const std::string& labels_path,
    int digit_zero, int digit_one, int train_count, int test_count,
    std::uint64_t seed) {
  if (train_count < 1 || test_count < 0)
    throw std::invalid_argument("load_idx: split sizes must be positive");
  if (digit_zero == digit_one)
    throw std::invalid_argument("load_idx: the two digits must differ");
  if (digit_zero < 0 || digit_zero > 255 || digit_one < 0 || digit_one > 255)
    throw std::invalid_argument("load_idx: digits must lie in 0..255");

  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw std::runtime_error("load_idx: cannot open " + images_path);
  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw std::runtime_error("load_idx: cannot open " + labels_path);

  if (read_be_u32(images, images_path) != 2051u)
    throw std::runtime_error("load_idx: " + images_path + " is not an IDX image file");
  const std::uint32_t image_count = read_be_u32(images, images_path);
  const std::uint32_t rows = read_be_u32(images, images_path);
  const std::uint32_t cols = read_be_u32(images, images_path);

  if (read_be_u32(labels, labels_path) != 2049u)
    throw std::runtime_error("load_idx: " + labels_path + " is not an IDX label file");
  const std::uint32_t label_count = read_be_u32(labels, labels_path);
  if (label_count != image_count)
    throw std::runtime_error("load_idx: image/label counts disagree (" +
                             std::to_string(image_count) + " vs " +
                             std::to_string(label_count) + ")");

  const std::size_t pixels = std::size_t(rows) * cols;
  std::vector<unsigned char> image_bytes(std::size_t(image_count) * pixels);
  images.read(reinterpret_cast<char*>(image_bytes.data()),
              static_cast<std::streamsize>(image_bytes.size()));
  if (!images) throw std::runtime_error("load_idx: truncated pixel data in " + images_path);
  std::vector<unsigned char> label_bytes(label_count);
  labels.read(reinterpret_cast<char*>(label_bytes.data()),
              static_cast<std::streamsize>(label_bytes.size()));
  if (!labels) throw std::runtime_error("load_idx: truncated label data in " + labels_path);

  std::vector<std::uint32_t> kept;
  for (std::uint32_t i = 0; i < image_count; ++i)
    if (label_bytes[i] == digit_zero || label_bytes[i] == digit_one)
      kept.push_back(i);

  const std::size_t need = std::size_t(train_count) + std::size_t(test_count);
  if (kept.size() < need)
    throw std::runtime_error("load_idx: only " + std::to_string(kept.size()) +
                             " samples carry digits " + std::to_string(digit_zero) +
                             "/" + std::to_string(digit_one) + ", need " +
                             std::to_string(need));

  // Fisher-Yates with our own index draws, so the split is reproducible
  // across standard libraries.
  Rng rng(seed);
  for (std::size_t i = kept.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.bits() % (i + 1));
    std::swap(kept[i], kept[j]);
  }

  auto take = [&](std::size_t offset, int count) {
    LabeledDataset d;
    d.features.resize(count, static_cast<Eigen::Index>(pixels));
    d.labels.resize(count);
    for (int s = 0; s < count; ++s) {
      const std::uint32_t idx = kept[offset + s];
      const unsigned char* px = image_bytes.data() + std::size_t(idx) * pixels;
      for (std::size_t k = 0; k < pixels; ++k)
        d.features(s, static_cast<Eigen::Index>(k)) = px[k] / 255.0;
      d.labels(s) = label_bytes[idx] == digit_one ? 1 : 0;
    }
    return d;
  };
  return {take(0, train_count), take(std::size_t(train_count), test_count)};
}

// ---------------------------------------------------------------------------
// CSV

void save_csv(const std::string& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path + " for writing");
  const Eigen::Index n = data.width();
  if (data.labels.size() != data.size())
    throw std::invalid_argument("save_csv: one label per sample required");
  for (Eigen::Index j = 0; j < n; ++j) out << 'x' << (j + 1) << ',';
  out << "label\n";
  char buf[40];
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      out << buf << ',';
    }
    out << data.labels(i) << '\n';
  }
  if (!out) throw std::runtime_error("save_csv: write to " + path + " failed");
}

LabeledDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_csv: " + path + " is empty");
  if (line.rfind("x1,", 0) != 0)
    throw std::runtime_error("load_csv: " + path + " is missing the x1,...,label header");

  Eigen::Index n = -1;
  {
    std::size_t fields = 1;
    for (char ch : line)
      if (ch == ',') ++fields;
    n = static_cast<Eigen::Index>(fields) - 1;
    if (n < 1) throw std::runtime_error("load_csv: header of " + path + " has no feature columns");
  }

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    Eigen::Index col = 0;
    for (; std::getline(row, field, ','); ++col) {
      if (col > n)
        throw std::runtime_error("load_csv: " + path + ":" + std::to_string(line_no) +
                                 " has too many fields");
      if (col < n) {
        // strtod rather than stod: stod raises out_of_range for subnormal
        // magnitudes, which are legitimate values in a written file.
        const char* begin = field.c_str();
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end != begin + field.size() || field.empty() || !std::isfinite(v))
          throw std::runtime_error("load_csv: " + path + ":" + std::to_string(line_no) +
                                   " field " + std::to_string(col + 1) + " is not a finite number");
        values.push_back(v);
      } else {
        if (field != "0" && field != "1")
          throw std::runtime_error("load_csv: " + path + ":" + std::to_string(line_no) +
                                   " label must be 0 or 1, got '" + field + "'");
        labels.push_back(field == "1" ? 1 : 0);
      }
    }
    if (col != n + 1)
      throw std::runtime_error("load_csv: " + path + ":" + std::to_string(line_no) +
                               " has " + std::to_string(col) + " fields, expected " +
                               std::to_string(n + 1));
  }
  if (labels.empty())
    throw std::runtime_error("load_csv: " + path + " contains a header but no samples");

  LabeledDataset d;
  const Eigen::Index m = static_cast<Eigen::Index>(labels.size());
  d.features.resize(m, n);
  d.labels.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d.features(i, j) = values[i * n + j];
    d.labels(i) = labels[i];
  }
  return d;
}

}  // namespace odectrl
