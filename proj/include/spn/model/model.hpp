// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spn/autodiff/tensor.hpp"
#include "spn/nn/layers.hpp"
#include "spn/nn/params.hpp"

namespace spn::ad {
class Tape;
}

namespace spn::model {

using ad::Tensor;

struct ModelConfig {
  std::size_t input_channels = 2;
  std::vector<std::size_t> block_layers{2, 2, 3, 3, 3};
  std::vector<std::size_t> block_channels{8, 16, 32, 32, 32};
  std::size_t hidden = 32;
  std::size_t snippet_width = 243;
  std::size_t num_classes = 3;
  // Initial policy logit bias; negative values start the agent patient.
  double policy_bias_init = 0.0;

  /// 12 leads and 9 classes by default, widths 64..512 and 256 LSTM cells.
  static ModelConfig paper_scale(std::size_t channels = 12, std::size_t classes = 9);

  std::size_t conv_layers() const;
  /// Length of the flattened CNN output S_t.
  std::size_t feature_size() const;
  /// Throws ShapeError when the snippet width is not divisible by 3^blocks,
  /// ValidationError for other inconsistent settings.
  void validate() const;
};

/// Parameters and running statistics of the whole network, in a fixed order.
class SpnModel {
 public:
  SpnModel(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  struct ConvIndex {
    std::size_t weight, bias, gamma, beta, running_mean, running_var;
  };
  struct Layout {
    std::vector<std::vector<ConvIndex>> blocks;
    std::size_t w_ih, w_hh, lstm_bias;
    std::size_t policy_weight, policy_bias;
    std::size_t disc_weight, disc_bias;
  };
  const Layout& layout() const { return layout_; }

 private:
  ModelConfig config_;
  nn::ParamStore params_;
  Layout layout_;
};

struct BackboneState {
  Tensor s;  // [B, F] spatial encoding of the current snippet
  Tensor h;  // [B, hidden]
  Tensor c;  // [B, hidden]
};

BackboneState initial_state(const ModelConfig& config, std::size_t batch);

/// One forward session: parameters bound to an optional tape and a fixed
/// batch-norm mode. Train-mode running statistics accumulate in the session
/// and reach the model only through commit_buffers.
class Forward {
 public:
  Forward(const SpnModel& model, ad::Tape* tape, nn::BatchNormMode mode);
  /// Uses caller-supplied tensors in parameter-store order, e.g. leaves of a
  /// gradient check. Shapes must match the model's parameters.
  Forward(const SpnModel& model, std::vector<Tensor> bound, nn::BatchNormMode mode);

  const SpnModel& model() const { return *model_; }
  ad::Tape* tape() const { return tape_; }
  nn::BatchNormMode mode() const { return mode_; }
  /// Bound tensors in parameter-store order (taped leaves for trainables).
  const std::vector<Tensor>& bound() const { return bound_; }

  /// [B, M, W] -> [B, F]: conv, batch norm and relu per layer, pool per block.
  Tensor cnn(const Tensor& snippets);
  BackboneState backbone_step(const Tensor& snippets, const BackboneState& prev);
  /// LSTM step on precomputed CNN features s [B, F].
  BackboneState recurrent_step(const Tensor& s, const BackboneState& prev) const;
  /// sigmoid(linear(H)) -> [B, 1].
  Tensor policy_prob(const Tensor& h) const;
  /// softmax(linear(H)) -> [B, K].
  Tensor class_probs(const Tensor& h) const;

  void commit_buffers(SpnModel& model) const;

 private:
  const SpnModel* model_;
  ad::Tape* tape_;
  nn::BatchNormMode mode_;
  std::vector<Tensor> bound_;
};

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);

}  // namespace spn::model
