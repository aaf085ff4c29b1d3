#include "nnrep/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nnrep/error.hpp"

namespace nnrep {

namespace {

struct Adam {
  Matrix mw, vw;
  Vector mb, vb;

  explicit Adam(const LayerParams& p)
      : mw(Matrix::Zero(p.weights.rows(), p.weights.cols())),
        vw(Matrix::Zero(p.weights.rows(), p.weights.cols())),
        mb(Vector::Zero(p.bias.size())),
        vb(Vector::Zero(p.bias.size())) {}

  void step(LayerParams& p, const Matrix& gw, const Vector& gb, double lr, int t) {
    constexpr double b1 = 0.9;
    constexpr double b2 = 0.999;
    constexpr double eps = 1e-8;
    mw = b1 * mw + (1 - b1) * gw;
    vw = b2 * vw + (1 - b2) * gw.cwiseProduct(gw);
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb.cwiseProduct(gb);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    p.weights.array() -= lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
    p.bias.array() -= lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
  }
};

}  // namespace

Network fit_policy(const Dataset& ds, const TrainOptions& opts) {
  ds.validate();
  if (ds.empty()) throw PreconditionError("cannot train on an empty dataset");
  if (opts.batch == 0 || opts.epochs == 0) throw PreconditionError("batch and epochs must be positive");
  const auto n = static_cast<Eigen::Index>(ds.size());
  const auto din = static_cast<Eigen::Index>(ds.input_dim());
  const auto dout = static_cast<Eigen::Index>(ds.target_dim());

  // Column-major sample matrices.
  Matrix X(din, n);
  Matrix T(dout, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X.col(i) = ds.inputs[static_cast<std::size_t>(i)];
    T.col(i) = ds.targets[static_cast<std::size_t>(i)];
  }
  auto stats = [](const Matrix& M, Vector& mu, Vector& sd) {
    mu = M.rowwise().mean();
    sd = ((M.colwise() - mu).array().square().rowwise().mean()).sqrt().matrix();
    for (Eigen::Index i = 0; i < sd.size(); ++i) sd(i) = sd(i) > 1e-12 ? sd(i) : 1.0;
  };
  Vector mx, sx, mt, st;
  stats(X, mx, sx);
  stats(T, mt, st);
  const Matrix Xs = (X.colwise() - mx).array().colwise() / sx.array();
  const Matrix Ts = (T.colwise() - mt).array().colwise() / st.array();

  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> widths{static_cast<std::size_t>(din)};
  widths.insert(widths.end(), opts.hidden.begin(), opts.hidden.end());
  widths.push_back(static_cast<std::size_t>(dout));
  std::vector<LayerParams> layers;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const auto in = static_cast<Eigen::Index>(widths[k]);
    const auto out = static_cast<Eigen::Index>(widths[k + 1]);
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    LayerParams p;
    p.weights = Matrix::NullaryExpr(out, in, [&] { return init(rng); });
    p.bias = Vector::Constant(out, 0.01);
    layers.push_back(std::move(p));
  }
  std::vector<Adam> adam;
  for (const auto& p : layers) adam.emplace_back(p);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  int t = 0;
  const std::size_t nl = layers.size();
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += opts.batch) {
      const std::size_t end = std::min(order.size(), start + opts.batch);
      const auto bs = static_cast<Eigen::Index>(end - start);
      Matrix xb(din, bs);
      Matrix tb(dout, bs);
      for (Eigen::Index k = 0; k < bs; ++k) {
        xb.col(k) = Xs.col(order[start + static_cast<std::size_t>(k)]);
        tb.col(k) = Ts.col(order[start + static_cast<std::size_t>(k)]);
      }
      std::vector<Matrix> acts{xb};
      std::vector<Matrix> pres;
      for (std::size_t k = 0; k < nl; ++k) {
        Matrix z = (layers[k].weights * acts.back()).colwise() + layers[k].bias;
        pres.push_back(z);
        acts.push_back(k + 1 < nl ? Matrix(z.cwiseMax(0.0)) : z);
      }
      Matrix g = 2.0 * (acts.back() - tb) / static_cast<double>(bs);
      ++t;
      for (std::size_t k = nl; k-- > 0;) {
        const Matrix gw = g * acts[k].transpose();
        const Vector gb = g.rowwise().sum();
        if (k > 0) {
          g = layers[k].weights.transpose() * g;
          g = g.cwiseProduct((pres[k - 1].array() > 0.0).cast<double>().matrix());
        }
        adam[k].step(layers[k], gw, gb, opts.learning_rate, t);
      }
    }
  }

  // Fold the standardization into the first and last layers.
  LayerParams& first = layers.front();
  const Matrix w1 = first.weights * sx.cwiseInverse().asDiagonal();
  first.bias -= w1 * mx;
  first.weights = w1;
  LayerParams& last = layers.back();
  last.weights = st.asDiagonal() * last.weights;
  last.bias = st.cwiseProduct(last.bias) + mt;
  return Network(static_cast<std::size_t>(din), std::move(layers));
}

double mean_squared_error(const Network& net, const Dataset& ds) {
  if (ds.empty()) throw PreconditionError("empty dataset");
  double acc = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) acc += (net.forward(ds.inputs[i]) - ds.targets[i]).squaredNorm();
  return acc / static_cast<double>(ds.size());
}

}  // namespace nnrep
