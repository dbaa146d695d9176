#include "advrl/core/network.hpp"

#include <cmath>
#include <string>

#include "advrl/errors.hpp"

namespace advrl {
namespace {

// Effective parameters of any layer. Dense layers are referenced in place;
// noisy layers materialize mu + sigma * noise once per call.
class LayerParams {
 public:
  explicit LayerParams(const Layer& layer) {
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      w_ = &dense->weights;
      b_ = &dense->biases;
      activation_ = dense->activation;
    } else {
      const auto& noisy = std::get<NoisyDenseLayer>(layer);
      auto [w, b] = effective_parameters(noisy);
      w_own_ = std::move(w);
      b_own_ = std::move(b);
      w_ = &w_own_;
      b_ = &b_own_;
      activation_ = noisy.activation;
    }
  }
  LayerParams(const LayerParams&) = delete;
  LayerParams& operator=(const LayerParams&) = delete;

  const Matrix& weights() const { return *w_; }
  const Vector& biases() const { return *b_; }
  Activation activation() const { return activation_; }

 private:
  Matrix w_own_;
  Vector b_own_;
  const Matrix* w_ = nullptr;
  const Vector* b_ = nullptr;
  Activation activation_ = Activation::identity;
};

std::size_t layer_in(const Layer& l) {
  return std::visit([](const auto& x) { return x.in_dim(); }, l);
}
std::size_t layer_out(const Layer& l) {
  return std::visit([](const auto& x) { return x.out_dim(); }, l);
}

void check_finite(const Matrix& m, const char* where) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite value in ") + where);
}

}  // namespace

std::string_view to_string(Activation a) {
  return a == Activation::relu ? "relu" : "identity";
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw InvalidInput("unknown activation tag: " + std::string(s));
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidInput("network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      if (static_cast<std::size_t>(d->biases.size()) != d->out_dim())
        throw InvalidInput("dense layer bias length does not match weight rows");
    } else {
      const auto& n = std::get<NoisyDenseLayer>(l);
      if (n.sigma_weights.rows() != n.mu_weights.rows() ||
          n.sigma_weights.cols() != n.mu_weights.cols() ||
          n.mu_biases.size() != n.mu_weights.rows() || n.sigma_biases.size() != n.mu_weights.rows())
        throw InvalidInput("noisy layer mu/sigma shapes disagree");
    }
    if (layer_in(l) == 0 || layer_out(l) == 0) throw InvalidInput("layer with zero width");
    if (i > 0 && layer_in(l) != layer_out(layers_[i - 1]))
      throw InvalidInput("layer " + std::to_string(i) + " input width does not chain");
  }
}

std::size_t Network::input_dim() const { return layers_.empty() ? 0 : layer_in(layers_.front()); }

std::size_t Network::output_dim() const { return layers_.empty() ? 0 : layer_out(layers_.back()); }

bool Network::has_noisy_layers() const {
  for (const auto& l : layers_)
    if (std::holds_alternative<NoisyDenseLayer>(l)) return true;
  return false;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    std::size_t per = layer_out(l) * layer_in(l) + layer_out(l);
    n += std::holds_alternative<NoisyDenseLayer>(l) ? 2 * per : per;
  }
  return n;
}

Network make_network(const NetworkShape& shape, RngStream& rng) {
  if (shape.input_dim == 0 || shape.output_dim == 0) throw InvalidInput("network dims must be positive");
  std::vector<std::size_t> dims{shape.input_dim};
  dims.insert(dims.end(), shape.hidden.begin(), shape.hidden.end());
  dims.push_back(shape.output_dim);

  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(dims[i]);
    const auto out = static_cast<Eigen::Index>(dims[i + 1]);
    const Activation act = (i + 2 == dims.size()) ? Activation::identity : Activation::relu;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));

    Matrix w(out, in);
    Vector b(out);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) w(r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < out; ++r) b(r) = rng.uniform(-bound, bound);

    if (shape.noisy) {
      NoisyDenseLayer layer;
      layer.mu_weights = std::move(w);
      layer.mu_biases = std::move(b);
      layer.sigma_weights = Matrix::Constant(out, in, shape.sigma_scale * bound);
      layer.sigma_biases = Vector::Constant(out, shape.sigma_scale * bound);
      layer.activation = act;
      layers.emplace_back(std::move(layer));
    } else {
      layers.emplace_back(DenseLayer{std::move(w), std::move(b), act});
    }
  }
  return Network(std::move(layers));
}

std::pair<Matrix, Vector> effective_parameters(const NoisyDenseLayer& layer) {
  if (!layer.noise) throw ProtocolError("noisy layer used before a noise sample was drawn");
  const auto& n = *layer.noise;
  Matrix w = layer.mu_weights + layer.sigma_weights.cwiseProduct(n.weights);
  Vector b = layer.mu_biases + layer.sigma_biases.cwiseProduct(n.biases);
  return {std::move(w), std::move(b)};
}

GradientSet GradientSet::zeros_like(const Network& net) {
  GradientSet g;
  for (const auto& l : net.layers()) {
    const auto out = static_cast<Eigen::Index>(layer_out(l));
    const auto in = static_cast<Eigen::Index>(layer_in(l));
    LayerGradient lg{Matrix::Zero(out, in), Vector::Zero(out), Matrix(), Vector()};
    if (std::holds_alternative<NoisyDenseLayer>(l)) {
      lg.sigma_weights = Matrix::Zero(out, in);
      lg.sigma_biases = Vector::Zero(out);
    }
    g.layers.push_back(std::move(lg));
  }
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (other.layers.size() != layers.size()) throw InvalidInput("gradient sets differ in layer count");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
        a.sigma_weights.size() != b.sigma_weights.size())
      throw InvalidInput("gradient shapes differ");
    a.weights += b.weights;
    a.biases += b.biases;
    if (a.sigma_weights.size() > 0) {
      a.sigma_weights += b.sigma_weights;
      a.sigma_biases += b.sigma_biases;
    }
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double s) {
  for (auto& l : layers) {
    l.weights *= s;
    l.biases *= s;
    l.sigma_weights *= s;
    l.sigma_biases *= s;
  }
  return *this;
}

bool GradientSet::all_finite() const {
  for (const auto& l : layers)
    if (!l.weights.allFinite() || !l.biases.allFinite() || !l.sigma_weights.allFinite() ||
        !l.sigma_biases.allFinite())
      return false;
  return true;
}

double GradientSet::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers)
    s += l.weights.squaredNorm() + l.biases.squaredNorm() + l.sigma_weights.squaredNorm() +
         l.sigma_biases.squaredNorm();
  return s;
}

bool GradientSet::matches(const Network& net) const {
  if (layers.size() != net.layer_count()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = net.layers()[i];
    const auto& g = layers[i];
    if (static_cast<std::size_t>(g.weights.rows()) != layer_out(l) ||
        static_cast<std::size_t>(g.weights.cols()) != layer_in(l) ||
        static_cast<std::size_t>(g.biases.size()) != layer_out(l))
      return false;
    const bool noisy = std::holds_alternative<NoisyDenseLayer>(l);
    if (noisy != (g.sigma_weights.size() > 0)) return false;
    if (noisy && (g.sigma_weights.rows() != g.weights.rows() || g.sigma_weights.cols() != g.weights.cols() ||
                  g.sigma_biases.size() != g.biases.size()))
      return false;
  }
  return true;
}

Matrix forward_batch(const Network& net, const Matrix& xs) {
  if (static_cast<std::size_t>(xs.cols()) != net.input_dim())
    throw InvalidInput("input width " + std::to_string(xs.cols()) + " != network input " +
                       std::to_string(net.input_dim()));
  Matrix h = xs;
  for (const auto& layer : net.layers()) {
    LayerParams p(layer);
    Matrix z = h * p.weights().transpose();
    z.rowwise() += p.biases().transpose();
    if (p.activation() == Activation::relu) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

Vector forward(const Network& net, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != net.input_dim())
    throw InvalidInput("input length " + std::to_string(x.size()) + " != network input " +
                       std::to_string(net.input_dim()));
  Vector h = x;
  for (const auto& layer : net.layers()) {
    LayerParams p(layer);
    Vector z = p.weights() * h + p.biases();
    if (p.activation() == Activation::relu) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

Matrix forward_cached(const Network& net, const Matrix& xs, std::vector<Matrix>& layer_inputs,
                      std::vector<Matrix>& pre_activations) {
  if (static_cast<std::size_t>(xs.cols()) != net.input_dim())
    throw InvalidInput("input width does not match network input");
  layer_inputs.clear();
  pre_activations.clear();
  Matrix h = xs;
  for (const auto& layer : net.layers()) {
    LayerParams p(layer);
    Matrix z = h * p.weights().transpose();
    z.rowwise() += p.biases().transpose();
    layer_inputs.push_back(std::move(h));
    h = p.activation() == Activation::relu ? Matrix(z.cwiseMax(0.0)) : z;
    pre_activations.push_back(std::move(z));
  }
  return h;
}

GradientSet backward(const Network& net, const std::vector<Matrix>& layer_inputs,
                     const std::vector<Matrix>& pre_activations, const Matrix& upstream,
                     Matrix* input_grads) {
  const std::size_t n = net.layer_count();
  if (layer_inputs.size() != n || pre_activations.size() != n)
    throw InvalidInput("backward: cache does not match network");
  if (static_cast<std::size_t>(upstream.cols()) != net.output_dim() ||
      upstream.rows() != layer_inputs.front().rows())
    throw InvalidInput("backward: upstream gradient has wrong shape");

  GradientSet g;
  g.layers.resize(n);
  Matrix delta = upstream;
  for (std::size_t k = n; k-- > 0;) {
    const Layer& layer = net.layers()[k];
    LayerParams p(layer);
    if (p.activation() == Activation::relu)
      delta = delta.cwiseProduct((pre_activations[k].array() > 0.0).cast<double>().matrix());

    LayerGradient& lg = g.layers[k];
    lg.weights = delta.transpose() * layer_inputs[k];
    lg.biases = delta.colwise().sum().transpose();
    if (const auto* noisy = std::get_if<NoisyDenseLayer>(&layer)) {
      lg.sigma_weights = lg.weights.cwiseProduct(noisy->noise->weights);
      lg.sigma_biases = lg.biases.cwiseProduct(noisy->noise->biases);
    }
    if (k > 0 || input_grads != nullptr) delta = delta * p.weights();
  }
  if (!g.all_finite()) throw NumericError("non-finite parameter gradient");
  if (input_grads != nullptr) {
    check_finite(delta, "input gradient");
    *input_grads = std::move(delta);
  }
  return g;
}

GradientSet param_gradients(const Network& net, const Vector& x, std::size_t action, double target) {
  if (action >= net.output_dim()) throw InvalidInput("action index out of range");
  if (!std::isfinite(target)) throw InvalidInput("non-finite regression target");
  std::vector<Matrix> inputs, pre;
  Matrix xs = x.transpose();
  Matrix q = forward_cached(net, xs, inputs, pre);
  check_finite(q, "forward pass");
  Matrix upstream = Matrix::Zero(1, q.cols());
  upstream(0, static_cast<Eigen::Index>(action)) = -2.0 * (target - q(0, static_cast<Eigen::Index>(action)));
  return backward(net, inputs, pre, upstream);
}

OutputLoss select_output(std::size_t action) {
  return [action](const Vector& q, Vector& dq) {
    if (action >= static_cast<std::size_t>(q.size())) throw InvalidInput("selected output out of range");
    dq = Vector::Zero(q.size());
    dq(static_cast<Eigen::Index>(action)) = 1.0;
    return q(static_cast<Eigen::Index>(action));
  };
}

Vector input_gradient(const Network& net, const Vector& x, const OutputLoss& loss) {
  if (static_cast<std::size_t>(x.size()) != net.input_dim())
    throw InvalidInput("input length does not match network input");
  std::vector<Matrix> inputs, pre;
  Matrix xs = x.transpose();
  Matrix q = forward_cached(net, xs, inputs, pre);
  Vector dq;
  loss(q.row(0).transpose(), dq);
  if (static_cast<std::size_t>(dq.size()) != net.output_dim())
    throw InvalidInput("loss gradient length does not match network output");
  Matrix upstream = dq.transpose();
  Matrix dx;
  backward(net, inputs, pre, upstream, &dx);
  return dx.row(0).transpose();
}

Network mean_network(const Network& net) {
  std::vector<Layer> layers;
  for (const auto& l : net.layers()) {
    if (const auto* n = std::get_if<NoisyDenseLayer>(&l))
      layers.emplace_back(DenseLayer{n->mu_weights, n->mu_biases, n->activation});
    else
      layers.push_back(l);
  }
  return Network(std::move(layers));
}

}  // namespace advrl
