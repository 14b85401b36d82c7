// SPDX-License-Identifier: Apache-2.0
#include "spn/model/model.hpp"

#include <cmath>

#include "spn/autodiff/ops.hpp"
#include "spn/autodiff/tape.hpp"
#include "spn/util/errors.hpp"
#include "spn/util/rng.hpp"

namespace spn::model {

ModelConfig ModelConfig::paper_scale(std::size_t channels, std::size_t classes) {
  ModelConfig c;
  c.input_channels = channels;
  c.block_channels = {64, 128, 256, 512, 512};
  c.hidden = 256;
  c.num_classes = classes;
  return c;
}

std::size_t ModelConfig::conv_layers() const {
  std::size_t n = 0;
  for (std::size_t l : block_layers) n += l;
  return n;
}

std::size_t ModelConfig::feature_size() const {
  std::size_t w = snippet_width;
  for (std::size_t b = 0; b < block_layers.size(); ++b) w /= nn::kPoolKernel;
  return block_channels.back() * w;
}

void ModelConfig::validate() const {
  if (input_channels == 0 || hidden == 0) throw ValidationError("model: channels and hidden size must be positive");
  if (num_classes < 2) throw ValidationError("model: need at least 2 classes");
  if (block_layers.empty() || block_layers.size() != block_channels.size()) {
    throw ValidationError("model: block_layers and block_channels must be non-empty and the same length");
  }
  for (std::size_t i = 0; i < block_layers.size(); ++i) {
    if (block_layers[i] == 0 || block_channels[i] == 0) throw ValidationError("model: empty block");
  }
  std::size_t divisor = 1;
  for (std::size_t b = 0; b < block_layers.size(); ++b) divisor *= nn::kPoolKernel;
  if (snippet_width == 0 || snippet_width % divisor != 0) {
    throw ShapeError("model: snippet width " + std::to_string(snippet_width) + " is not divisible by 3^" +
                     std::to_string(block_layers.size()) + " = " + std::to_string(divisor));
  }
  if (!std::isfinite(policy_bias_init)) throw ValidationError("model: policy_bias_init must be finite");
}

namespace {

Tensor uniform_tensor(Rng& rng, ad::Shape shape, double bound) {
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

SpnModel::SpnModel(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  Rng rng(Rng::derive(init_seed, "init"));
  std::size_t in = config_.input_channels;
  for (std::size_t b = 0; b < config_.block_layers.size(); ++b) {
    const std::size_t out = config_.block_channels[b];
    std::vector<ConvIndex> block;
    for (std::size_t l = 0; l < config_.block_layers[b]; ++l) {
      const std::string p = "block" + std::to_string(b) + ".layer" + std::to_string(l) + ".";
      const double he = std::sqrt(6.0 / static_cast<double>(in * nn::kConvKernel));
      ConvIndex idx{};
      idx.weight = params_.add(p + "conv.weight", uniform_tensor(rng, {out, in, nn::kConvKernel}, he));
      idx.bias = params_.add(p + "conv.bias", Tensor::zeros({out}));
      idx.gamma = params_.add(p + "bn.gamma", Tensor::full({out}, 1.0));
      idx.beta = params_.add(p + "bn.beta", Tensor::zeros({out}));
      idx.running_mean = params_.add(p + "bn.running_mean", Tensor::zeros({out}), false);
      idx.running_var = params_.add(p + "bn.running_var", Tensor::full({out}, 1.0), false);
      block.push_back(idx);
      in = out;
    }
    layout_.blocks.push_back(std::move(block));
  }
  const std::size_t f = config_.feature_size();
  const std::size_t h = config_.hidden;
  const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(h));
  layout_.w_ih = params_.add("lstm.w_ih", uniform_tensor(rng, {4 * h, f}, lstm_bound));
  layout_.w_hh = params_.add("lstm.w_hh", uniform_tensor(rng, {4 * h, h}, lstm_bound));
  std::vector<double> bias(4 * h, 0.0);
  for (std::size_t j = h; j < 2 * h; ++j) bias[j] = 1.0;  // forget gate
  layout_.lstm_bias = params_.add("lstm.bias", Tensor({4 * h}, std::move(bias)));
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(h));
  layout_.policy_weight = params_.add("policy.weight", uniform_tensor(rng, {h, 1}, head_bound));
  layout_.policy_bias = params_.add("policy.bias", Tensor({1}, {config_.policy_bias_init}));
  layout_.disc_weight = params_.add("disc.weight", uniform_tensor(rng, {h, config_.num_classes}, head_bound));
  layout_.disc_bias = params_.add("disc.bias", Tensor::zeros({config_.num_classes}));
}

BackboneState initial_state(const ModelConfig& config, std::size_t batch) {
  return {Tensor::zeros({batch, config.feature_size()}), Tensor::zeros({batch, config.hidden}),
          Tensor::zeros({batch, config.hidden})};
}

Forward::Forward(const SpnModel& model, ad::Tape* tape, nn::BatchNormMode mode)
    : model_(&model), tape_(tape), mode_(mode), bound_(model.params().bind(tape)) {}

Forward::Forward(const SpnModel& model, std::vector<Tensor> bound, nn::BatchNormMode mode)
    : model_(&model), tape_(nullptr), mode_(mode), bound_(std::move(bound)) {
  const auto& entries = model.params().entries();
  if (bound_.size() != entries.size()) throw ShapeError("Forward: bound tensor count does not match the model");
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (bound_[i].shape() != entries[i].value.shape()) {
      throw ShapeError("Forward: bound tensor " + entries[i].name + " has shape " + ad::shape_str(bound_[i].shape()) +
                       ", expected " + ad::shape_str(entries[i].value.shape()));
    }
    if (tape_ == nullptr && bound_[i].requires_grad()) tape_ = bound_[i].tape();
  }
}

Tensor Forward::cnn(const Tensor& snippets) {
  const ModelConfig& cfg = model_->config();
  if (snippets.rank() != 3 || snippets.dim(1) != cfg.input_channels || snippets.dim(2) != cfg.snippet_width) {
    throw ShapeError("cnn: expected [B, " + std::to_string(cfg.input_channels) + ", " +
                     std::to_string(cfg.snippet_width) + "], got " + ad::shape_str(snippets.shape()));
  }
  Tensor x = snippets;
  for (const auto& block : model_->layout().blocks) {
    for (const SpnModel::ConvIndex& idx : block) {
      x = nn::conv1d(x, bound_[idx.weight], bound_[idx.bias]);
      x = nn::batchnorm1d(x, bound_[idx.gamma], bound_[idx.beta], bound_[idx.running_mean], bound_[idx.running_var],
                          mode_);
      x = ad::relu(x);
    }
    x = nn::maxpool1d(x);
  }
  return ad::reshape(x, {x.dim(0), cfg.feature_size()});
}

BackboneState Forward::backbone_step(const Tensor& snippets, const BackboneState& prev) {
  return recurrent_step(cnn(snippets), prev);
}

BackboneState Forward::recurrent_step(const Tensor& s, const BackboneState& prev) const {
  const SpnModel::Layout& lay = model_->layout();
  nn::LstmState next = nn::lstm_cell(s, {prev.h, prev.c}, {bound_[lay.w_ih], bound_[lay.w_hh], bound_[lay.lstm_bias]});
  return {s, next.h, next.c};
}

Tensor Forward::policy_prob(const Tensor& h) const {
  const SpnModel::Layout& lay = model_->layout();
  return ad::sigmoid(nn::linear(h, bound_[lay.policy_weight], bound_[lay.policy_bias]));
}

Tensor Forward::class_probs(const Tensor& h) const {
  const SpnModel::Layout& lay = model_->layout();
  return ad::softmax_rows(nn::linear(h, bound_[lay.disc_weight], bound_[lay.disc_bias]));
}

void Forward::commit_buffers(SpnModel& model) const {
  if (&model != model_) throw UsageError("commit_buffers: session belongs to a different model");
  auto& entries = model.params().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].trainable) entries[i].value = bound_[i].detached();
  }
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw UsageError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace spn::model
