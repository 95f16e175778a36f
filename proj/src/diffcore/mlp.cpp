#include "meher/diffcore/mlp.hpp"

#include <cmath>
#include <string>

#include "meher/errors.hpp"

namespace meher::diff {

std::size_t MlpParams::input_width() const {
  if (layers.empty()) throw ConfigError("MLP has no layers");
  return layers.front().weight.rows();
}

std::size_t MlpParams::output_width() const {
  if (layers.empty()) throw ConfigError("MLP has no layers");
  return layers.back().weight.cols();
}

void MlpParams::validate() const {
  if (layers.empty()) throw ConfigError("MLP has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.weight.rank() != 2) throw ConfigError("layer weight must be 2-D");
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols()) {
      throw ConfigError("layer " + std::to_string(i) + " bias shape " + layer.bias.shape_string() +
                        " does not match weight " + layer.weight.shape_string());
    }
    if (i > 0 && layers[i - 1].weight.cols() != layer.weight.rows()) {
      throw ConfigError("layer " + std::to_string(i) + " input width " +
                        std::to_string(layer.weight.rows()) + " does not chain with previous output " +
                        std::to_string(layers[i - 1].weight.cols()));
    }
  }
}

Tensor orthogonal_matrix(std::size_t rows, std::size_t cols, double gain, std::mt19937_64& rng) {
  // Gram-Schmidt on the columns of a tall Gaussian matrix, transposed back
  // when the requested matrix is wide.
  const bool wide = cols > rows;
  const std::size_t tall = wide ? cols : rows;
  const std::size_t narrow = wide ? rows : cols;
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> q(tall * narrow);  // column-major: column c at [c * tall]
  for (double& x : q) x = normal(rng);
  for (std::size_t c = 0; c < narrow; ++c) {
    double* col = q.data() + c * tall;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t prev = 0; prev < c; ++prev) {
        const double* pcol = q.data() + prev * tall;
        double dot = 0.0;
        for (std::size_t i = 0; i < tall; ++i) dot += col[i] * pcol[i];
        for (std::size_t i = 0; i < tall; ++i) col[i] -= dot * pcol[i];
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < tall; ++i) norm += col[i] * col[i];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < tall; ++i) col[i] /= norm;
  }

  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t c = 0; c < narrow; ++c) {
    for (std::size_t i = 0; i < tall; ++i) {
      const double v = gain * q[c * tall + i];
      if (wide) {
        out.at(c, i) = v;
      } else {
        out.at(i, c) = v;
      }
    }
  }
  return out;
}

MlpParams make_mlp(std::span<const std::size_t> widths, double hidden_gain, double output_gain,
                   std::mt19937_64& rng) {
  if (widths.size() < 2) throw ConfigError("MLP needs at least input and output widths");
  MlpParams params;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] == 0 || widths[i + 1] == 0) throw ConfigError("MLP layer width must be positive");
    const bool last = i + 2 == widths.size();
    DenseLayer layer;
    layer.weight = orthogonal_matrix(widths[i], widths[i + 1], last ? output_gain : hidden_gain, rng);
    layer.bias = Tensor::matrix(1, widths[i + 1]);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

void dense_forward(const DenseLayer& layer, const Tensor& x, Tensor& y, bool activate) {
  const std::size_t n = x.rows(), k = x.cols(), m = layer.weight.cols();
  y = Tensor::matrix(n, m);
  const double* w = layer.weight.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* yrow = y.data().data() + i * m;
    const double* xrow = x.data().data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = xrow[p];
      const double* wrow = w + p * m;
      for (std::size_t j = 0; j < m; ++j) yrow[j] += xv * wrow[j];
    }
    for (std::size_t j = 0; j < m; ++j) {
      yrow[j] += layer.bias[j];
      if (activate) yrow[j] = std::tanh(yrow[j]);
    }
  }
}

}  // namespace

Tensor mlp_forward(const MlpParams& params, const Tensor& input) {
  if (params.layers.empty()) throw ConfigError("MLP has no layers");
  if (input.cols() != params.input_width()) {
    throw ConfigError("MLP input width " + std::to_string(input.cols()) + " does not match layer width " +
                      std::to_string(params.input_width()));
  }
  Tensor x = input.rank() == 2 ? input : Tensor({1, input.size()}, std::vector<double>(input.data().begin(), input.data().end()));
  Tensor y;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const bool hidden = i + 1 < params.layers.size();
    dense_forward(params.layers[i], x, y, hidden && params.hidden_activation == Activation::kTanh);
    x = std::move(y);
  }
  return x;
}

MlpVars bind_parameters(Tape& tape, const MlpParams& params) {
  params.validate();
  MlpVars vars;
  vars.hidden_activation = params.hidden_activation;
  for (const auto& layer : params.layers) {
    vars.weights.push_back(tape.parameter(layer.weight));
    vars.biases.push_back(tape.parameter(layer.bias));
  }
  return vars;
}

Var mlp_forward(const MlpVars& vars, Var input) {
  if (vars.weights.empty()) throw ConfigError("MLP has no layers");
  if (input.value().cols() != vars.weights.front().value().rows()) {
    throw ConfigError("MLP input width " + std::to_string(input.value().cols()) +
                      " does not match layer width " +
                      std::to_string(vars.weights.front().value().rows()));
  }
  Var x = input;
  for (std::size_t i = 0; i < vars.weights.size(); ++i) {
    x = add_row(matmul(x, vars.weights[i]), vars.biases[i]);
    if (i + 1 < vars.weights.size() && vars.hidden_activation == Activation::kTanh) x = tanh(x);
  }
  return x;
}

}  // namespace meher::diff
