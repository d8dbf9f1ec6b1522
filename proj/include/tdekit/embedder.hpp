#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tdekit/audio.hpp"
#include "tdekit/common.hpp"
#include "tdekit/embedding.hpp"

namespace tde {

/// Architecture of the embedding network: a stack of strided residual
/// convolution blocks over the 128x128x2 spectrogram, global average
/// pooling, a linear projection to embed_dim, and l2 normalization.
/// There are no normalization layers; the input planes get a fixed
/// per-channel transform instead (log1p on magnitude, angle / pi on phase).
struct ArchConfig {
  int input_channels = 2;
  int input_bins = 128;
  int input_frames = 128;
  std::vector<int> channels = {8, 16, 32, 32};  // output channels per block
  std::vector<int> strides = {4, 2, 2, 2};
  int convs_per_block = 1;  // 1: conv + skip; 2: conv-relu-conv + skip
  int embed_dim = 32;

  /// Small configuration trainable on a desktop CPU.
  static ArchConfig desk();
  /// Nine-layer residual network with d = 128 (not trainable at desk scale).
  static ArchConfig paper_scale();
  /// Two-block d = 8 network used by gradient-check tests.
  static ArchConfig tiny();

  void validate() const;
  std::string serialize() const;
  std::uint64_t digest() const;
  bool operator==(const ArchConfig&) const = default;
};

/// One named parameter array with its shape.
struct ParamBlock {
  std::string name;
  std::vector<int> shape;
  std::vector<double> v;

  std::size_t count() const { return v.size(); }
};

/// Flat parameter store; block order is fixed by the architecture so that
/// optimizers can iterate positionally.
struct ModelParams {
  ArchConfig arch;
  std::vector<ParamBlock> blocks;

  std::size_t total_params() const;
  const ParamBlock* find(const std::string& name) const;
  void validate() const;
};

/// Gradient arrays aligned index-for-index with ModelParams::blocks.
using Grads = std::vector<std::vector<double>>;

Grads zeros_like(const ModelParams& params);
void grads_add_scaled(Grads& acc, const Grads& g, double scale);

/// He-style fan-in scaled Gaussian initialization; biases start at zero.
ModelParams init_model(const ArchConfig& arch, std::uint64_t seed);

/// Reverse-mode state captured by forward.
struct Tape;

struct ForwardResult {
  EmbeddingSequence embeddings;
  std::shared_ptr<Tape> tape;
};

/// Runs the network on a batch of analysis windows (all the same length,
/// at least 256 samples). Set window_step when the batch came from a
/// sliding window so delay arithmetic downstream has the hop available.
ForwardResult forward(const ModelParams& params, const std::vector<MonoClip>& windows,
                      int window_step = 0);
/// Same, starting from precomputed spectrogram features.
ForwardResult forward(const ModelParams& params, const std::vector<Spectrogram>& features,
                      double rate, int window_step = 0);

/// Embeddings only; skips tape capture.
EmbeddingSequence embed(const ModelParams& params, const std::vector<Spectrogram>& features,
                        double rate, int window_step = 0);

/// Exact gradients of sum_t grad_embeddings(t) . h(t) with respect to every
/// parameter; grad_embeddings has one row per window in the tape.
Grads backward(const Tape& tape, const Eigen::MatrixXd& grad_embeddings);

/// extract_windows followed by forward; records step and rate.
EmbeddingSequence embed_sequence(const ModelParams& params, const MonoClip& channel, int window,
                                 int step);

/// Versioned little-endian binary checkpoint; round trips are bit-exact.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);
/// Load that refuses checkpoints whose architecture digest differs.
ModelParams load_checkpoint(const std::string& path, const ArchConfig& expected);

}  // namespace tde
