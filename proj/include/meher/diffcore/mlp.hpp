#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "meher/diffcore/tape.hpp"
#include "meher/diffcore/tensor.hpp"

namespace meher::diff {

enum class Activation { kTanh, kIdentity };

struct DenseLayer {
  Tensor weight;  // [in, out]
  Tensor bias;    // [1, out]

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Fully connected network. Hidden layers use `hidden_activation`; the output
/// layer is always linear.
struct MlpParams {
  std::vector<DenseLayer> layers;
  Activation hidden_activation = Activation::kTanh;

  std::size_t input_width() const;
  std::size_t output_width() const;
  /// Throws ConfigError unless consecutive layer widths chain.
  void validate() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Builds a net with the given layer widths (input first, output last).
/// Weights get orthogonal initialization scaled by `hidden_gain` on hidden
/// layers and `output_gain` on the last layer; biases start at zero.
MlpParams make_mlp(std::span<const std::size_t> widths, double hidden_gain, double output_gain,
                   std::mt19937_64& rng);

/// Matrix with orthonormal rows or columns (whichever is shorter) times `gain`.
Tensor orthogonal_matrix(std::size_t rows, std::size_t cols, double gain, std::mt19937_64& rng);

/// Forward pass without recording. `input` is [batch, in] or a single row.
Tensor mlp_forward(const MlpParams& params, const Tensor& input);

/// Parameters of one net placed on a tape as gradient-carrying leaves.
struct MlpVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
  Activation hidden_activation = Activation::kTanh;
};

MlpVars bind_parameters(Tape& tape, const MlpParams& params);

/// Recorded forward pass; uses exactly the arithmetic of the tape-free pass.
Var mlp_forward(const MlpVars& vars, Var input);

}  // namespace meher::diff
