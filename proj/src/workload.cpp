#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "xbar/inference.hpp"
#include "xbar/io.hpp"

#ifndef XBAR_DATA_DIR
#define XBAR_DATA_DIR "data"
#endif

namespace xbar {

namespace {

constexpr std::uint64_t kSplitSeed = 20240611;
constexpr double kTestFraction = 0.2;

// Fisher-Yates on raw engine output, so the order does not depend on how a
// standard library implements its distributions.
std::vector<int> permutation(int n, std::uint64_t seed) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng() % static_cast<std::uint64_t>(i + 1)]);
  return idx;
}

void split(Workload& w, const Eigen::MatrixXi& x, const Eigen::VectorXi& y) {
  const int n = static_cast<int>(x.rows());
  const auto order = permutation(n, kSplitSeed);
  const int n_test = static_cast<int>(std::lround(n * kTestFraction));
  const int n_train = n - n_test;
  w.train.features.resize(n_train, x.cols());
  w.train.labels.resize(n_train);
  w.test.features.resize(n_test, x.cols());
  w.test.labels.resize(n_test);
  for (int k = 0; k < n; ++k) {
    Dataset& d = k < n_train ? w.train : w.test;
    const int r = k < n_train ? k : k - n_train;
    d.features.row(r) = x.row(order[k]);
    d.labels[r] = y[order[k]];
  }
}

Workload load_digits(int input_bits, const std::string& data_dir) {
  const std::string path = data_dir + "/digits8x8.csv";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (io::split(io::trim(line), ',').size() != 65)
    throw std::runtime_error(path + ": expected label plus 64 pixel columns");
  std::vector<std::vector<int>> rows;
  while (std::getline(in, line)) {
    if (io::trim(line).empty()) continue;
    const auto f = io::split(io::trim(line), ',');
    if (f.size() != 65) throw std::runtime_error(path + ": malformed row");
    std::vector<int> r(65);
    for (int k = 0; k < 65; ++k) r[k] = static_cast<int>(io::parse_int(f[k]));
    rows.push_back(std::move(r));
  }
  const int n = static_cast<int>(rows.size());
  const int top = (1 << input_bits) - 1;
  Eigen::MatrixXi x(n, 64);
  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = rows[i][0];
    for (int k = 0; k < 64; ++k) {
      const int pixel = rows[i][k + 1];
      if (pixel < 0 || pixel > 16) throw std::runtime_error(path + ": pixel outside 0..16");
      // Pixel intensities run 0..16.
      x(i, k) = std::min(top, static_cast<int>(std::lround(pixel * top / 16.0)));
    }
  }
  Workload w;
  w.name = "digits8x8";
  w.input_bits = input_bits;
  w.n_features = 64;
  w.n_classes = 10;
  split(w, x, y);
  return w;
}

// Sparse class prototypes with dropout and spurious activations; deep enough
// networks see activations whose density shrinks layer by layer.
Workload make_synthetic_deep(int input_bits) {
  constexpr int kFeatures = 32, kClasses = 4, kSamples = 2000;
  constexpr double kDensity = 0.25, kDrop = 0.15, kSpurious = 0.08;
  const int top = (1 << input_bits) - 1;
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.15 * top);

  Eigen::MatrixXd proto = Eigen::MatrixXd::Zero(kClasses, kFeatures);
  for (int c = 0; c < kClasses; ++c)
    for (int k = 0; k < kFeatures; ++k)
      if (unit(rng) < kDensity) proto(c, k) = top * (0.5 + 0.5 * unit(rng));

  Eigen::MatrixXi x(kSamples, kFeatures);
  Eigen::VectorXi y(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    const int c = i % kClasses;
    y[i] = c;
    for (int k = 0; k < kFeatures; ++k) {
      double v = proto(c, k);
      if (v > 0.0) {
        v = unit(rng) < kDrop ? 0.0 : v + noise(rng);
      } else if (unit(rng) < kSpurious) {
        v = top * 0.7 * unit(rng);
      }
      x(i, k) = std::clamp(static_cast<int>(std::lround(v)), 0, top);
    }
  }
  Workload w;
  w.name = "synthetic-deep";
  w.input_bits = input_bits;
  w.n_features = kFeatures;
  w.n_classes = kClasses;
  split(w, x, y);
  return w;
}

}  // namespace

std::string default_data_dir() { return XBAR_DATA_DIR; }

Workload load_workload(const std::string& name, int input_bits, const std::string& data_dir) {
  if (input_bits < 1 || input_bits > 8) throw std::invalid_argument("input bits must lie in [1, 8]");
  if (name == "digits8x8") return load_digits(input_bits, data_dir);
  if (name == "synthetic-deep") return make_synthetic_deep(input_bits);
  throw std::invalid_argument("unknown workload '" + name + "'");
}

std::vector<int> default_hidden_layers(const std::string& workload) {
  if (workload == "synthetic-deep") return {32, 32, 32, 32};
  return {32};
}

}  // namespace xbar
