#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "xbar/inference.hpp"

namespace xbar {

namespace {

struct FloatLayer {
  Eigen::MatrixXd w;  // inputs x outputs
  Eigen::VectorXd b;
};

struct AdamState {
  Eigen::MatrixXd mw, vw;
  Eigen::VectorXd mb, vb;
};

Eigen::MatrixXd scaled(const Eigen::MatrixXi& features, int input_bits) {
  return features.cast<double>() / static_cast<double>((1 << input_bits) - 1);
}

// Pre-activations of every layer; hidden ones get ReLU on the way forward.
std::vector<Eigen::MatrixXd> forward(const std::vector<FloatLayer>& layers, const Eigen::MatrixXd& x) {
  std::vector<Eigen::MatrixXd> z;
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd pre = (a * layers[l].w).rowwise() + layers[l].b.transpose();
    if (l + 1 < layers.size()) a = pre.cwiseMax(0.0);
    z.push_back(std::move(pre));
  }
  return z;
}

int argmax(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::Index k;
  v.maxCoeff(&k);
  return static_cast<int>(k);
}

double float_accuracy(const std::vector<FloatLayer>& layers, const Dataset& d, int input_bits) {
  const Eigen::MatrixXd logits = forward(layers, scaled(d.features, input_bits)).back();
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    correct += argmax(logits.row(i).transpose()) == d.labels[i];
  return d.labels.size() ? static_cast<double>(correct) / d.labels.size() : 0.0;
}

std::vector<FloatLayer> train_float(const Workload& wl, const std::vector<int>& dims,
                                    const TrainOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::vector<FloatLayer> layers;
  std::vector<AdamState> adam;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / dims[l]));
    FloatLayer f;
    f.w = Eigen::MatrixXd::NullaryExpr(dims[l], dims[l + 1], [&] { return init(rng); });
    f.b = Eigen::VectorXd::Zero(dims[l + 1]);
    adam.push_back({Eigen::MatrixXd::Zero(dims[l], dims[l + 1]), Eigen::MatrixXd::Zero(dims[l], dims[l + 1]),
                    Eigen::VectorXd::Zero(dims[l + 1]), Eigen::VectorXd::Zero(dims[l + 1])});
    layers.push_back(std::move(f));
  }

  const Eigen::MatrixXd x = scaled(wl.train.features, wl.input_bits);
  const int n = static_cast<int>(x.rows());
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % static_cast<std::uint64_t>(i + 1)]);
    for (int start = 0; start < n; start += opt.batch_size) {
      const int bsz = std::min(opt.batch_size, n - start);
      Eigen::MatrixXd xb(bsz, x.cols());
      Eigen::MatrixXd yb = Eigen::MatrixXd::Zero(bsz, wl.n_classes);
      for (int r = 0; r < bsz; ++r) {
        xb.row(r) = x.row(order[start + r]);
        yb(r, wl.train.labels[order[start + r]]) = 1.0;
      }
      const auto z = forward(layers, xb);
      // Softmax cross-entropy gradient.
      Eigen::MatrixXd p = z.back();
      for (int r = 0; r < bsz; ++r) {
        p.row(r).array() -= p.row(r).maxCoeff();
        p.row(r) = p.row(r).array().exp().matrix();
        p.row(r) /= p.row(r).sum();
      }
      Eigen::MatrixXd dz = (p - yb) / bsz;
      ++step;
      const double c1 = 1.0 - std::pow(beta1, step), c2 = 1.0 - std::pow(beta2, step);
      for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
        const Eigen::MatrixXd a_prev = l == 0 ? xb : Eigen::MatrixXd(z[l - 1].cwiseMax(0.0));
        const Eigen::MatrixXd gw = a_prev.transpose() * dz;
        const Eigen::VectorXd gb = dz.colwise().sum().transpose();
        if (l > 0) {
          Eigen::MatrixXd da = dz * layers[l].w.transpose();
          dz = da.cwiseProduct((z[l - 1].array() > 0.0).cast<double>().matrix());
        }
        auto& s = adam[l];
        s.mw = beta1 * s.mw + (1 - beta1) * gw;
        s.vw = beta2 * s.vw + (1 - beta2) * gw.cwiseAbs2();
        s.mb = beta1 * s.mb + (1 - beta1) * gb;
        s.vb = beta2 * s.vb + (1 - beta2) * gb.cwiseAbs2();
        layers[l].w.array() -=
            opt.learning_rate * (s.mw.array() / c1) / ((s.vw.array() / c2).sqrt() + eps);
        layers[l].b.array() -=
            opt.learning_rate * (s.mb.array() / c1) / ((s.vb.array() / c2).sqrt() + eps);
      }
    }
  }
  return layers;
}

int requantize(std::int64_t acc, double m, int top) {
  if (acc <= 0) return 0;
  return static_cast<int>(std::min<long long>(top, std::llround(static_cast<double>(acc) * m)));
}

}  // namespace

QuantizedNetwork train_reference(const Workload& wl, const TrainOptions& opt) {
  if (opt.weight_bits < 2 || opt.weight_bits > 16)
    throw std::invalid_argument("weight bits must lie in [2, 16]");
  if (opt.epochs < 1 || opt.batch_size < 1 || !(opt.learning_rate > 0))
    throw std::invalid_argument("bad training hyper-parameters");
  std::vector<int> dims{wl.n_features};
  for (int h : opt.hidden.empty() ? default_hidden_layers(wl.name) : opt.hidden) {
    if (h < 1) throw std::invalid_argument("hidden layer widths must be >= 1");
    dims.push_back(h);
  }
  dims.push_back(wl.n_classes);

  const auto layers = train_float(wl, dims, opt);
  QuantizedNetwork net;
  net.weight_bits = opt.weight_bits;
  net.input_bits = wl.input_bits;
  net.float_test_accuracy = float_accuracy(layers, wl.test, wl.input_bits);

  // Symmetric per-layer weight scale; activation scales calibrated on the
  // training set by propagating the already-quantized codes.
  const int qmax = (1 << (opt.weight_bits - 1)) - 1;
  const int top = (1 << wl.input_bits) - 1;
  double s_in = 1.0 / top;
  Eigen::MatrixXi codes = wl.train.features;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const double max_abs = layers[l].w.cwiseAbs().maxCoeff();
    const double s_w = max_abs > 0.0 ? max_abs / qmax : 1.0;
    QuantizedLayer q;
    q.weights = (layers[l].w / s_w).array().round().cwiseMax(-qmax).cwiseMin(qmax).cast<int>().matrix();
    q.bias = (layers[l].b / (s_w * s_in)).array().round().cast<std::int64_t>().matrix();
    if (l + 1 < layers.size()) {
      const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> acc =
          (codes.cast<std::int64_t>() * q.weights.cast<std::int64_t>()).rowwise() + q.bias.transpose();
      std::vector<double> positive;
      for (Eigen::Index k = 0; k < acc.size(); ++k)
        if (acc.data()[k] > 0) positive.push_back(static_cast<double>(acc.data()[k]));
      double s_out = s_w * s_in;
      if (!positive.empty()) {
        std::sort(positive.begin(), positive.end());
        const auto idx = static_cast<std::size_t>(opt.calibration_quantile * (positive.size() - 1));
        s_out = positive[idx] * s_w * s_in / top;
      }
      q.requant = s_w * s_in / s_out;
      codes = acc.unaryExpr([&](std::int64_t a) { return requantize(a, q.requant, top); });
      s_in = s_out;
    }
    net.layers.push_back(std::move(q));
  }
  net.quantized_test_accuracy = accuracy(software_predict(net, wl.test.features), wl.test.labels);
  return net;
}

int classify(const QuantizedNetwork& net, const Eigen::VectorXi& features, const LayerMvm& mvm) {
  const int top = (1 << net.input_bits) - 1;
  Eigen::VectorXi x = features;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    const IntVector acc = mvm(static_cast<int>(l), x) + layer.bias;
    if (l + 1 == net.layers.size()) {
      Eigen::Index k;
      acc.maxCoeff(&k);
      return static_cast<int>(k);
    }
    x = acc.unaryExpr([&](std::int64_t a) { return requantize(a, layer.requant, top); });
  }
  throw std::logic_error("network has no layers");
}

std::vector<int> software_predict(const QuantizedNetwork& net, const Eigen::MatrixXi& features) {
  const LayerMvm mvm = [&net](int l, const Eigen::VectorXi& x) {
    return integer_mvm(net.layers[l].weights, x);
  };
  std::vector<int> out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    out[i] = classify(net, features.row(i).transpose(), mvm);
  return out;
}

double accuracy(const std::vector<int>& predictions, const Eigen::VectorXi& labels) {
  if (predictions.empty()) return 0.0;
  int correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace xbar
