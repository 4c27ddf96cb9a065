#pragma once

// Small dense networks trained with MSE and Adam. Three layouts are used:
//   m1: token ids -> 64-d embedding, masked mean pool -> dense(relu) -> dense(linear)
//   m2: text embedding -> dense(relu) -> dense(linear) over the tag vocabulary
//   m3: text embedding -> dense(relu) -> dense(linear) back into embedding space
// Everything runs in double precision with explicit forward/backward passes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "curator/binary_io.hpp"
#include "curator/corpus.hpp"
#include "curator/embedding.hpp"
#include "curator/errors.hpp"
#include "curator/random.hpp"
#include "curator/text.hpp"

namespace curator {

enum class Variant : std::uint8_t { m1_selfcontained = 1, m2_embed_to_tags = 2, m3_embed_to_embed = 3 };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::m1_selfcontained: return "m1";
    case Variant::m2_embed_to_tags: return "m2";
    case Variant::m3_embed_to_embed: return "m3";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "m1") return Variant::m1_selfcontained;
  if (s == "m2") return Variant::m2_embed_to_tags;
  if (s == "m3") return Variant::m3_embed_to_embed;
  return std::nullopt;
}

constexpr bool takes_tokens(Variant v) noexcept { return v == Variant::m1_selfcontained; }

enum class Activation : std::uint8_t { linear = 0, relu = 1 };

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::linear;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline constexpr std::size_t kDefaultHiddenWidth = 256;
inline constexpr std::size_t kTokenEmbeddingDim = 64;

struct ModelSpec {
  Variant variant = Variant::m2_embed_to_tags;
  /// m1: size of the token id space; m2/m3: input embedding dimension.
  std::size_t input_dim = 0;
  /// m1 only: width of the learned token embeddings.
  std::size_t embed_dim = 0;
  std::vector<LayerSpec> layers;

  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

  static ModelSpec m1(std::size_t token_space, std::size_t output_dim, std::size_t embed_dim = kTokenEmbeddingDim,
                      std::size_t hidden = kDefaultHiddenWidth) {
    return {Variant::m1_selfcontained, token_space, embed_dim,
            {{embed_dim, hidden, Activation::relu}, {hidden, output_dim, Activation::linear}}};
  }
  static ModelSpec m2(std::size_t input_dim, std::size_t output_dim, std::size_t hidden = kDefaultHiddenWidth) {
    return {Variant::m2_embed_to_tags, input_dim, 0,
            {{input_dim, hidden, Activation::relu}, {hidden, output_dim, Activation::linear}}};
  }
  static ModelSpec m3(std::size_t input_dim, std::size_t output_dim, std::size_t hidden = kDefaultHiddenWidth) {
    return {Variant::m3_embed_to_embed, input_dim, 0,
            {{input_dim, hidden, Activation::relu}, {hidden, output_dim, Activation::linear}}};
  }

  void validate() const {
    if (layers.empty()) throw DimensionError("model has no dense layers");
    if (input_dim == 0) throw DimensionError("model input dimension is zero");
    const std::size_t first_in = takes_tokens(variant) ? embed_dim : input_dim;
    if (first_in == 0 || layers.front().in_dim != first_in) throw DimensionError("first dense layer does not match input");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].out_dim == 0) throw DimensionError("dense layer with zero width");
      if (l > 0 && layers[l].in_dim != layers[l - 1].out_dim) throw DimensionError("adjacent dense layers disagree");
    }
  }
};

using ModelInput = std::variant<TokenSequence, EmbeddingVector>;

/// Parameters live in one flat buffer in declaration order: token table
/// (m1 only, row-major [input_dim x embed_dim]), then for each layer the
/// weights (row-major [in x out]) followed by the bias.
class Model {
 public:
  Model() = default;

  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t offset = 0;
    if (takes_tokens(spec_.variant)) offset = spec_.input_dim * spec_.embed_dim;
    for (const auto& l : spec_.layers) {
      weight_offsets_.push_back(offset);
      offset += l.in_dim * l.out_dim;
      bias_offsets_.push_back(offset);
      offset += l.out_dim;
    }
    params_.assign(offset, 0.0);
  }

  /// Uniform(+-1/sqrt(in)) dense weights, zero biases, uniform(+-0.05) token table.
  static Model initialized(ModelSpec spec, std::uint64_t seed) {
    Model m(std::move(spec));
    Rng rng(seed);
    for (double& x : m.table()) x = uniform(rng, -0.05, 0.05);
    for (std::size_t l = 0; l < m.spec_.layers.size(); ++l) {
      const double limit = 1.0 / std::sqrt(static_cast<double>(m.spec_.layers[l].in_dim));
      for (double& w : m.weights(l)) w = uniform(rng, -limit, limit);
    }
    return m;
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<double> table() { return {params_.data(), table_size()}; }
  std::span<const double> table() const { return {params_.data(), table_size()}; }
  std::span<double> weights(std::size_t l) { return {params_.data() + weight_offsets_[l], weight_size(l)}; }
  std::span<const double> weights(std::size_t l) const { return {params_.data() + weight_offsets_[l], weight_size(l)}; }
  std::span<double> bias(std::size_t l) { return {params_.data() + bias_offsets_[l], spec_.layers[l].out_dim}; }
  std::span<const double> bias(std::size_t l) const { return {params_.data() + bias_offsets_[l], spec_.layers[l].out_dim}; }

  std::size_t table_offset() const noexcept { return 0; }
  std::size_t weight_offset(std::size_t l) const { return weight_offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const { return bias_offsets_[l]; }

 private:
  std::size_t table_size() const { return takes_tokens(spec_.variant) ? spec_.input_dim * spec_.embed_dim : 0; }
  std::size_t weight_size(std::size_t l) const { return spec_.layers[l].in_dim * spec_.layers[l].out_dim; }

  ModelSpec spec_;
  std::vector<double> params_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<std::size_t> bias_offsets_;
};

namespace detail {

/// Activations kept from a forward pass for the backward pass.
struct Trace {
  std::vector<std::vector<double>> inputs;  // inputs[l] feeds layer l; inputs.back() is the output
  std::vector<std::int32_t> pooled_ids;     // m1: non-padding ids that were averaged
};

inline void check_input(const Model& model, const ModelInput& input) {
  const auto& spec = model.spec();
  if (takes_tokens(spec.variant)) {
    const auto* seq = std::get_if<TokenSequence>(&input);
    if (!seq) throw DimensionError("model " + std::string(variant_name(spec.variant)) + " expects a token sequence");
    for (auto id : seq->ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= spec.input_dim) {
        throw DimensionError("token id " + std::to_string(id) + " outside the model's token space");
      }
    }
  } else {
    const auto* v = std::get_if<EmbeddingVector>(&input);
    if (!v) throw DimensionError("model " + std::string(variant_name(spec.variant)) + " expects an embedding vector");
    if (v->size() != spec.input_dim) {
      throw DimensionError("input dimension " + std::to_string(v->size()) + " != model input " +
                           std::to_string(spec.input_dim));
    }
  }
}

inline void dense_forward(std::span<const double> x, std::span<const double> w, std::span<const double> b,
                          std::vector<double>& out) {
  const std::size_t n_out = b.size();
  out.assign(b.begin(), b.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = w.data() + i * n_out;
    for (std::size_t j = 0; j < n_out; ++j) out[j] += xi * row[j];
  }
}

inline Trace run_forward(const Model& model, const ModelInput& input) {
  check_input(model, input);
  const auto& spec = model.spec();
  Trace t;
  t.inputs.reserve(spec.layers.size() + 1);
  if (takes_tokens(spec.variant)) {
    const auto& seq = std::get<TokenSequence>(input);
    std::vector<double> pooled(spec.embed_dim, 0.0);
    const auto table = model.table();
    for (auto id : seq.ids) {
      if (id == kPaddingId) continue;
      t.pooled_ids.push_back(id);
      const double* row = table.data() + static_cast<std::size_t>(id) * spec.embed_dim;
      for (std::size_t k = 0; k < spec.embed_dim; ++k) pooled[k] += row[k];
    }
    if (!t.pooled_ids.empty()) {
      const double inv = 1.0 / static_cast<double>(t.pooled_ids.size());
      for (double& x : pooled) x *= inv;
    }
    t.inputs.push_back(std::move(pooled));
  } else {
    t.inputs.push_back(std::get<EmbeddingVector>(input));
  }
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    std::vector<double> out;
    dense_forward(t.inputs[l], model.weights(l), model.bias(l), out);
    if (spec.layers[l].activation == Activation::relu) {
      for (double& x : out) x = std::max(0.0, x);
    }
    t.inputs.push_back(std::move(out));
  }
  return t;
}

}  // namespace detail

inline std::vector<double> forward(const Model& model, const ModelInput& input) {
  auto t = detail::run_forward(model, input);
  return std::move(t.inputs.back());
}

inline double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw DimensionError("mse_loss: length " + std::to_string(pred.size()) + " vs " + std::to_string(target.size()));
  }
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

/// Adds scale * d(mse_loss)/d(param) into `grads` (same layout as the
/// model's parameters) and returns the sample's loss.
inline double accumulate_gradients(const Model& model, const ModelInput& input, std::span<const double> target,
                                   double scale, std::span<double> grads) {
  const auto& spec = model.spec();
  if (target.size() != spec.output_dim()) throw DimensionError("target dimension does not match model output");
  if (grads.size() != model.parameter_count()) throw DimensionError("gradient buffer has the wrong size");
  auto t = detail::run_forward(model, input);
  const auto& out = t.inputs.back();
  const double loss = mse_loss(out, target);

  // dL/d(out) for the mean of squared errors.
  std::vector<double> delta(out.size());
  const double k = 2.0 / static_cast<double>(out.size());
  for (std::size_t j = 0; j < out.size(); ++j) delta[j] = k * (out[j] - target[j]);

  for (std::size_t l = spec.layers.size(); l-- > 0;) {
    const auto& layer = spec.layers[l];
    if (layer.activation == Activation::relu) {
      const auto& a = t.inputs[l + 1];
      for (std::size_t j = 0; j < layer.out_dim; ++j) {
        if (a[j] <= 0.0) delta[j] = 0.0;
      }
    }
    const auto& x = t.inputs[l];
    double* gw = grads.data() + model.weight_offset(l);
    double* gb = grads.data() + model.bias_offset(l);
    for (std::size_t j = 0; j < layer.out_dim; ++j) gb[j] += scale * delta[j];
    for (std::size_t i = 0; i < layer.in_dim; ++i) {
      const double xi = scale * x[i];
      if (xi == 0.0) continue;
      double* row = gw + i * layer.out_dim;
      for (std::size_t j = 0; j < layer.out_dim; ++j) row[j] += xi * delta[j];
    }
    const bool need_input_grad = l > 0 || takes_tokens(spec.variant);
    if (need_input_grad) {
      std::vector<double> prev(layer.in_dim, 0.0);
      const auto w = model.weights(l);
      for (std::size_t i = 0; i < layer.in_dim; ++i) {
        const double* row = w.data() + i * layer.out_dim;
        double s = 0.0;
        for (std::size_t j = 0; j < layer.out_dim; ++j) s += row[j] * delta[j];
        prev[i] = s;
      }
      delta = std::move(prev);
    }
  }

  if (takes_tokens(spec.variant) && !t.pooled_ids.empty()) {
    const double inv = scale / static_cast<double>(t.pooled_ids.size());
    for (auto id : t.pooled_ids) {
      double* row = grads.data() + model.table_offset() + static_cast<std::size_t>(id) * spec.embed_dim;
      for (std::size_t kk = 0; kk < spec.embed_dim; ++kk) row[kk] += inv * delta[kk];
    }
  }
  return loss;
}

/// Exact gradient of mse_loss(forward(model, input), target) for every parameter.
inline std::vector<double> backward(const Model& model, const ModelInput& input, std::span<const double> target) {
  std::vector<double> grads(model.parameter_count(), 0.0);
  accumulate_gradients(model, input, target, 1.0, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t timestep = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and state sizes differ");
  }
  ++state.timestep;
  const double t = static_cast<double>(state.timestep);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (little-endian): "CURMODEL", u8 version, u8 variant, u64 input_dim,
// u64 embed_dim, u32 layer count, per layer {u64 in, u64 out, u8 activation},
// u64 parameter count, f64 parameters in declaration order.

inline constexpr std::string_view kCheckpointMagic = "CURMODEL";
inline constexpr std::uint8_t kCheckpointVersion = 1;

inline void save_checkpoint(std::ostream& out, const Model& model) {
  const auto& spec = model.spec();
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  io::write_le<std::uint8_t>(out, kCheckpointVersion);
  io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(spec.variant));
  io::write_le<std::uint64_t>(out, spec.input_dim);
  io::write_le<std::uint64_t>(out, spec.embed_dim);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.layers.size()));
  for (const auto& l : spec.layers) {
    io::write_le<std::uint64_t>(out, l.in_dim);
    io::write_le<std::uint64_t>(out, l.out_dim);
    io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation));
  }
  io::write_le<std::uint64_t>(out, model.parameter_count());
  for (double p : model.parameters()) io::write_le<double>(out, p);
}

inline Model load_checkpoint(std::istream& in) {
  io::expect_magic(in, kCheckpointMagic);
  if (io::read_le<std::uint8_t>(in) != kCheckpointVersion) throw ParseError("unsupported checkpoint version");
  ModelSpec spec;
  const auto variant = io::read_le<std::uint8_t>(in);
  if (variant < 1 || variant > 3) throw ParseError("checkpoint has unknown variant tag");
  spec.variant = static_cast<Variant>(variant);
  spec.input_dim = io::read_le<std::uint64_t>(in);
  spec.embed_dim = io::read_le<std::uint64_t>(in);
  const auto n_layers = io::read_le<std::uint32_t>(in);
  if (n_layers == 0 || n_layers > 64) throw ParseError("checkpoint layer count out of range");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    l.in_dim = io::read_le<std::uint64_t>(in);
    l.out_dim = io::read_le<std::uint64_t>(in);
    const auto act = io::read_le<std::uint8_t>(in);
    if (act > 1) throw ParseError("checkpoint has unknown activation");
    l.activation = static_cast<Activation>(act);
    spec.layers.push_back(l);
  }
  Model model(std::move(spec));
  if (io::read_le<std::uint64_t>(in) != model.parameter_count()) throw ParseError("checkpoint parameter count mismatch");
  for (double& p : model.parameters()) p = io::read_le<double>(in);
  return model;
}

inline void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint " + tmp);
    save_checkpoint(out, model);
    if (!out) throw Error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

// ---------------------------------------------------------------------------
// Training

struct Example {
  ModelInput input;
  std::vector<double> target;
};

struct TrainingConfig {
  std::size_t epochs = 2048;
  std::size_t batch_size = 16;
  AdamConfig adam;
  std::uint64_t seed = 42;
};

struct EpochLoss {
  double train_mse = 0.0;
  double validation_mse = 0.0;
};

struct TrainingHistory {
  std::vector<EpochLoss> epochs;

  std::size_t size() const noexcept { return epochs.size(); }
  /// 0-based epoch with the lowest validation MSE (first one on ties).
  std::size_t best_epoch() const {
    std::size_t best = 0;
    for (std::size_t e = 1; e < epochs.size(); ++e) {
      if (epochs[e].validation_mse < epochs[best].validation_mse) best = e;
    }
    return best;
  }

  void write_csv(std::ostream& out) const {
    out << "epoch,train_mse,validation_mse\n";
    out.precision(17);
    for (std::size_t e = 0; e < epochs.size(); ++e) {
      out << (e + 1) << ',' << epochs[e].train_mse << ',' << epochs[e].validation_mse << '\n';
    }
  }
};

struct TrainOptions {
  std::optional<std::filesystem::path> best_checkpoint;
  std::optional<std::filesystem::path> final_checkpoint;
  std::function<void(std::size_t epoch, const EpochLoss&)> on_epoch;
};

struct TrainingResult {
  TrainingHistory history;
  Model best_model;  // parameters at the best validation epoch
};

inline double mean_loss(const Model& model, const std::vector<Example>& data, const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (auto i : idx) s += mse_loss(forward(model, data[i].input), data[i].target);
  return idx.empty() ? 0.0 : s / static_cast<double>(idx.size());
}

/// Mini-batch Adam on the train indices, reshuffled every epoch from the
/// config seed. Both losses are measured after each epoch. The model ends
/// at its final parameters.
inline TrainingResult train(Model& model, const std::vector<Example>& data, const DatasetSplit& split,
                            const TrainingConfig& config, const TrainOptions& options = {}) {
  if (split.train.empty() || split.validation.empty()) throw ConfigError("train: empty train or validation split");
  if (config.epochs == 0 || config.batch_size == 0) throw ConfigError("train: epochs and batch_size must be >= 1");
  for (const auto& part : {std::cref(split.train), std::cref(split.validation)}) {
    for (auto i : part.get()) {
      if (i >= data.size()) throw ConfigError("train: split index out of range");
      detail::check_input(model, data[i].input);
      if (data[i].target.size() != model.spec().output_dim()) {
        throw DimensionError("train: target dimension does not match model output");
      }
    }
  }

  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamState state(model.parameter_count());
  std::vector<double> grads(model.parameter_count());
  std::vector<std::size_t> order = split.train;

  TrainingResult result{{}, model};
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::fill(grads.begin(), grads.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        accumulate_gradients(model, data[order[b]].input, data[order[b]].target, scale, grads);
      }
      adam_step(model.parameters(), grads, state, config.adam);
    }
    const EpochLoss loss{mean_loss(model, data, split.train), mean_loss(model, data, split.validation)};
    result.history.epochs.push_back(loss);
    if (loss.validation_mse < best) {
      best = loss.validation_mse;
      result.best_model = model;
      if (options.best_checkpoint) save_checkpoint(*options.best_checkpoint, model);
    }
    if (options.on_epoch) options.on_epoch(epoch + 1, loss);
  }
  if (options.final_checkpoint) save_checkpoint(*options.final_checkpoint, model);
  return result;
}

// ---------------------------------------------------------------------------
// Prompt encoding and tag prediction

/// What a variant needs to turn prompt text into model input.
struct PromptEncoder {
  const Vocabulary1D* tokens = nullptr;  // m1
  CachedEmbedder* embedder = nullptr;    // m2, m3

  ModelInput encode(Variant v, const std::string& prompt_text) const {
    if (takes_tokens(v)) {
      if (!tokens) throw ConfigError("m1 needs a fitted token vocabulary");
      return vectorize(prompt_text, *tokens);
    }
    if (!embedder) throw ConfigError(std::string(variant_name(v)) + " needs an embedding provider");
    return embedder->embed_text(prompt_text);
  }
};

/// Linear outputs clamped below at zero.
inline TagProbabilityVector predict_tags(const Model& model, const ModelInput& input) {
  if (model.spec().variant == Variant::m3_embed_to_embed) {
    throw WrongVariantError("predict_tags: m3 outputs embeddings, not tag probabilities");
  }
  auto out = forward(model, input);
  for (double& x : out) x = std::max(0.0, x);
  return {std::move(out)};
}

inline TagProbabilityVector predict_tags(const Model& model, const std::string& prompt_text, const PromptEncoder& enc) {
  if (model.spec().variant == Variant::m3_embed_to_embed) {
    throw WrongVariantError("predict_tags: m3 outputs embeddings, not tag probabilities");
  }
  return predict_tags(model, enc.encode(model.spec().variant, prompt_text));
}

}  // namespace curator
