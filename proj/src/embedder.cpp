#include "tdekit/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "io_util.hpp"

namespace tde {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

// ---------------------------------------------------------------------------
// Architecture
// ---------------------------------------------------------------------------

ArchConfig ArchConfig::desk() { return ArchConfig{}; }

ArchConfig ArchConfig::paper_scale() {
  ArchConfig a;
  a.channels = {64, 128, 256, 512};
  a.strides = {2, 2, 2, 2};
  a.convs_per_block = 2;
  a.embed_dim = 128;
  return a;
}

ArchConfig ArchConfig::tiny() {
  ArchConfig a;
  a.channels = {4, 8};
  a.strides = {4, 4};
  a.convs_per_block = 1;
  a.embed_dim = 8;
  return a;
}

void ArchConfig::validate() const {
  require(input_channels >= 1 && input_bins >= 4 && input_frames >= 4, "ArchConfig: bad input shape");
  require(!channels.empty(), "ArchConfig: at least one block required");
  require(channels.size() == strides.size(), "ArchConfig: channels/strides length mismatch");
  for (std::size_t i = 0; i < channels.size(); ++i)
    require(channels[i] >= 1 && strides[i] >= 1, "ArchConfig: channels and strides must be positive");
  require(convs_per_block == 1 || convs_per_block == 2, "ArchConfig: convs_per_block must be 1 or 2");
  require(embed_dim >= 2, "ArchConfig: embed_dim must be at least 2");
}

std::string ArchConfig::serialize() const {
  std::ostringstream os;
  os << "in=" << input_channels << "x" << input_bins << "x" << input_frames << ";ch=";
  for (std::size_t i = 0; i < channels.size(); ++i) os << (i ? "," : "") << channels[i];
  os << ";st=";
  for (std::size_t i = 0; i < strides.size(); ++i) os << (i ? "," : "") << strides[i];
  os << ";convs=" << convs_per_block << ";d=" << embed_dim;
  return os.str();
}

std::uint64_t ArchConfig::digest() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : serialize()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Parameter layout
// ---------------------------------------------------------------------------

namespace {

struct BlockIndex {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1, sw = -1, sb = -1;
  int cin = 0, cout = 0, stride = 1;
  bool has_skip_conv = false;
};

struct LayoutMap {
  std::vector<BlockIndex> blocks;
  int head_w = -1, head_b = -1;
};

std::string block_name(std::size_t i, const char* leaf) {
  std::ostringstream os;
  os << "block" << i << "." << leaf;
  return os.str();
}

LayoutMap make_layout(const ArchConfig& a, std::vector<ParamBlock>* out_blocks) {
  LayoutMap map;
  int idx = 0;
  auto push = [&](const std::string& name, std::vector<int> shape) {
    if (out_blocks) {
      std::size_t n = 1;
      for (int d : shape) n *= static_cast<std::size_t>(d);
      out_blocks->push_back({name, std::move(shape), std::vector<double>(n, 0.0)});
    }
    return idx++;
  };

  int cin = a.input_channels;
  for (std::size_t i = 0; i < a.channels.size(); ++i) {
    BlockIndex b;
    b.cin = cin;
    b.cout = a.channels[i];
    b.stride = a.strides[i];
    if (a.convs_per_block == 1) {
      b.w1 = push(block_name(i, "conv.w"), {b.cout, b.cin, 3, 3});
      b.b1 = push(block_name(i, "conv.b"), {b.cout});
    } else {
      b.w1 = push(block_name(i, "conv1.w"), {b.cout, b.cin, 3, 3});
      b.b1 = push(block_name(i, "conv1.b"), {b.cout});
      b.w2 = push(block_name(i, "conv2.w"), {b.cout, b.cout, 3, 3});
      b.b2 = push(block_name(i, "conv2.b"), {b.cout});
    }
    b.has_skip_conv = (b.stride != 1 || b.cin != b.cout);
    if (b.has_skip_conv) {
      b.sw = push(block_name(i, "skip.w"), {b.cout, b.cin, 1, 1});
      b.sb = push(block_name(i, "skip.b"), {b.cout});
    }
    map.blocks.push_back(b);
    cin = b.cout;
  }
  map.head_w = push("head.w", {a.embed_dim, cin});
  map.head_b = push("head.b", {a.embed_dim});
  return map;
}

}  // namespace

std::size_t ModelParams::total_params() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.count();
  return n;
}

const ParamBlock* ModelParams::find(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}

void ModelParams::validate() const {
  arch.validate();
  std::vector<ParamBlock> expected;
  make_layout(arch, &expected);
  require(expected.size() == blocks.size(), "ModelParams: block count does not match architecture");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    require(blocks[i].name == expected[i].name && blocks[i].shape == expected[i].shape &&
                blocks[i].v.size() == expected[i].v.size(),
            "ModelParams: block '" + blocks[i].name + "' does not match architecture layout");
    for (double x : blocks[i].v)
      require(std::isfinite(x), "ModelParams: non-finite value in '" + blocks[i].name + "'");
  }
}

Grads zeros_like(const ModelParams& params) {
  Grads g(params.blocks.size());
  for (std::size_t i = 0; i < params.blocks.size(); ++i) g[i].assign(params.blocks[i].count(), 0.0);
  return g;
}

void grads_add_scaled(Grads& acc, const Grads& g, double scale) {
  require(acc.size() == g.size(), "grads_add_scaled: shape mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) {
    require(acc[i].size() == g[i].size(), "grads_add_scaled: shape mismatch");
    for (std::size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += scale * g[i][j];
  }
}

ModelParams init_model(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  make_layout(arch, &p.blocks);
  Rng rng(hash_combine(seed, 0x696e6974ULL));
  for (auto& b : p.blocks) {
    if (b.name.size() >= 2 && b.name.compare(b.name.size() - 2, 2, ".b") == 0) continue;  // biases stay zero
    // fan_in = product of all shape dims except the leading output count
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < b.shape.size(); ++d) fan_in *= static_cast<std::size_t>(b.shape[d]);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& x : b.v) x = stddev * rng.normal();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Tensors and convolution
// ---------------------------------------------------------------------------

namespace {

struct Ten {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Ten() = default;
  Ten(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}
  std::size_t size() const { return v.size(); }
  double at(int ci, int y, int x) const {
    return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
  }
};

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

int conv_out_dim(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// Patch matrix: rows index (ci, ky, kx), columns index output positions.
Eigen::MatrixXd im2col(const Ten& in, int k, int stride, int pad, int ho, int wo) {
  Eigen::MatrixXd cols(static_cast<Eigen::Index>(in.c) * k * k, static_cast<Eigen::Index>(ho) * wo);
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      const Eigen::Index col = static_cast<Eigen::Index>(y) * wo + x;
      Eigen::Index row = 0;
      for (int ci = 0; ci < in.c; ++ci)
        for (int ky = 0; ky < k; ++ky) {
          const int sy = y * stride + ky - pad;
          for (int kx = 0; kx < k; ++kx, ++row) {
            const int sx = x * stride + kx - pad;
            cols(row, col) = (sy >= 0 && sy < in.h && sx >= 0 && sx < in.w) ? in.at(ci, sy, sx) : 0.0;
          }
        }
    }
  return cols;
}

void col2im_add(const Eigen::MatrixXd& dcols, Ten& din, int k, int stride, int pad, int ho, int wo) {
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      const Eigen::Index col = static_cast<Eigen::Index>(y) * wo + x;
      Eigen::Index row = 0;
      for (int ci = 0; ci < din.c; ++ci)
        for (int ky = 0; ky < k; ++ky) {
          const int sy = y * stride + ky - pad;
          for (int kx = 0; kx < k; ++kx, ++row) {
            const int sx = x * stride + kx - pad;
            if (sy >= 0 && sy < din.h && sx >= 0 && sx < din.w)
              din.v[(static_cast<std::size_t>(ci) * din.h + sy) * din.w + sx] += dcols(row, col);
          }
        }
    }
}

Ten conv_forward(const Ten& in, const ParamBlock& w, const ParamBlock& b, int k, int stride, int pad) {
  const int cout = w.shape[0];
  const int ho = conv_out_dim(in.h, k, stride, pad);
  const int wo = conv_out_dim(in.w, k, stride, pad);
  const Eigen::MatrixXd cols = im2col(in, k, stride, pad, ho, wo);
  RowMajorMap wm(w.v.data(), cout, static_cast<Eigen::Index>(in.c) * k * k);

  Ten out(cout, ho, wo);
  RowMajorMutMap om(out.v.data(), cout, static_cast<Eigen::Index>(ho) * wo);
  om.noalias() = wm * cols;
  for (int co = 0; co < cout; ++co) om.row(co).array() += b.v[co];
  return out;
}

// Accumulates dW/db for one conv and returns the gradient w.r.t. its input.
Ten conv_backward(const Ten& in, const ParamBlock& w, const Ten& dout, int k, int stride, int pad,
                  std::vector<double>& dw, std::vector<double>& db) {
  const int cout = w.shape[0];
  const int ho = dout.h, wo = dout.w;
  const Eigen::MatrixXd cols = im2col(in, k, stride, pad, ho, wo);
  RowMajorMap dom(dout.v.data(), cout, static_cast<Eigen::Index>(ho) * wo);

  RowMajorMutMap dwm(dw.data(), cout, static_cast<Eigen::Index>(in.c) * k * k);
  dwm.noalias() += dom * cols.transpose();
  for (int co = 0; co < cout; ++co) db[co] += dom.row(co).sum();

  RowMajorMap wm(w.v.data(), cout, static_cast<Eigen::Index>(in.c) * k * k);
  const Eigen::MatrixXd dcols = wm.transpose() * dom;
  Ten din(in.c, in.h, in.w);
  col2im_add(dcols, din, k, stride, pad, ho, wo);
  return din;
}

Ten relu(const Ten& t) {
  Ten out = t;
  for (auto& x : out.v) x = std::max(x, 0.0);
  return out;
}

void check_finite(const Ten& t, const std::string& layer) {
  for (double x : t.v)
    if (!std::isfinite(x)) fail("forward: non-finite activation in " + layer);
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace {

struct WindowTape {
  Ten input;               // transformed spectrogram planes
  std::vector<Ten> sums;   // per block, pre-activation of (main + skip)
  std::vector<Ten> pre1;   // per block, pre-activation of conv1 (2-conv blocks)
  Eigen::VectorXd pooled;  // global-average-pool output
  Eigen::VectorXd z;       // pre-normalization projection
  double znorm = 0;
  Eigen::VectorXd h;       // final unit embedding
};

Ten input_from_spectrogram(const ArchConfig& a, const Spectrogram& spec) {
  Ten in(a.input_channels, a.input_bins, a.input_frames);
  const std::size_t plane = static_cast<std::size_t>(a.input_bins) * a.input_frames;
  for (std::size_t i = 0; i < plane; ++i) {
    in.v[i] = std::log1p(spec.values[i]);            // magnitude plane
    in.v[plane + i] = spec.values[plane + i] / kPi;  // phase plane
  }
  return in;
}

// Runs the network on one window; fills `wt` when non-null.
Eigen::VectorXd run_window(const ModelParams& p, const LayoutMap& map, const Spectrogram& spec,
                           WindowTape* wt) {
  const ArchConfig& a = p.arch;
  Ten cur = input_from_spectrogram(a, spec);
  if (wt) wt->input = cur;

  for (std::size_t i = 0; i < map.blocks.size(); ++i) {
    const BlockIndex& bi = map.blocks[i];
    Ten main;
    if (a.convs_per_block == 1) {
      main = conv_forward(cur, p.blocks[bi.w1], p.blocks[bi.b1], 3, bi.stride, 1);
    } else {
      Ten pre1 = conv_forward(cur, p.blocks[bi.w1], p.blocks[bi.b1], 3, bi.stride, 1);
      Ten act1 = relu(pre1);
      main = conv_forward(act1, p.blocks[bi.w2], p.blocks[bi.b2], 3, 1, 1);
      if (wt) wt->pre1.push_back(std::move(pre1));
    }
    if (bi.has_skip_conv) {
      const Ten skip = conv_forward(cur, p.blocks[bi.sw], p.blocks[bi.sb], 1, bi.stride, 0);
      for (std::size_t j = 0; j < main.size(); ++j) main.v[j] += skip.v[j];
    } else {
      for (std::size_t j = 0; j < main.size(); ++j) main.v[j] += cur.v[j];
    }
    check_finite(main, block_name(i, "conv"));
    if (wt) wt->sums.push_back(main);
    cur = relu(main);
  }

  // Global average pool.
  const int clast = cur.c;
  Eigen::VectorXd pooled(clast);
  const double inv = 1.0 / (static_cast<double>(cur.h) * cur.w);
  for (int c = 0; c < clast; ++c) {
    double acc = 0.0;
    const double* plane = cur.v.data() + static_cast<std::size_t>(c) * cur.h * cur.w;
    for (int j = 0; j < cur.h * cur.w; ++j) acc += plane[j];
    pooled[c] = acc * inv;
  }

  const ParamBlock& hw = p.blocks[map.head_w];
  const ParamBlock& hb = p.blocks[map.head_b];
  RowMajorMap wm(hw.v.data(), a.embed_dim, clast);
  Eigen::VectorXd z = wm * pooled;
  for (int d = 0; d < a.embed_dim; ++d) z[d] += hb.v[d];
  for (int d = 0; d < a.embed_dim; ++d)
    require(std::isfinite(z[d]), "forward: non-finite activation in head");

  const double znorm = z.norm();
  require(znorm > 1e-30, "forward: degenerate zero-norm embedding in l2norm (silent input?)");
  Eigen::VectorXd h = z / znorm;

  if (wt) {
    wt->pooled = std::move(pooled);
    wt->z = std::move(z);
    wt->znorm = znorm;
    wt->h = h;
  }
  return h;
}

}  // namespace

struct Tape {
  ModelParams params;  // snapshot taken at forward time
  LayoutMap map;
  std::vector<WindowTape> windows;
};

namespace {

constexpr std::size_t kWindowChunk = 16;

EmbeddingSequence run_batch(const ModelParams& params, const std::vector<Spectrogram>& features,
                            double rate, int window_step, std::shared_ptr<Tape>* tape_out) {
  params.validate();
  require(params.arch.input_channels == Spectrogram::kComponents &&
              params.arch.input_bins == Spectrogram::kBins &&
              params.arch.input_frames == Spectrogram::kFrames,
          "forward: architecture input shape does not match the spectrogram layout");
  const std::size_t n = features.size();
  require(n > 0, "forward: empty window batch");

  LayoutMap map = make_layout(params.arch, nullptr);
  std::shared_ptr<Tape> tape;
  if (tape_out) {
    tape = std::make_shared<Tape>();
    tape->params = params;
    tape->map = map;
    tape->windows.resize(n);
  }

  EmbeddingSequence seq;
  seq.vectors.resize(static_cast<Eigen::Index>(n), params.arch.embed_dim);
  seq.window_step = window_step;
  seq.rate = rate;

  const std::size_t n_chunks = (n + kWindowChunk - 1) / kWindowChunk;
  parallel_chunks(n_chunks, [&](std::size_t chunk) {
    const std::size_t begin = chunk * kWindowChunk;
    const std::size_t end = std::min(n, begin + kWindowChunk);
    for (std::size_t i = begin; i < end; ++i) {
      WindowTape* wt = tape ? &tape->windows[i] : nullptr;
      seq.vectors.row(static_cast<Eigen::Index>(i)) =
          run_window(params, map, features[i], wt).transpose();
    }
  });

  if (tape_out) *tape_out = std::move(tape);
  return seq;
}

}  // namespace

ForwardResult forward(const ModelParams& params, const std::vector<Spectrogram>& features,
                      double rate, int window_step) {
  ForwardResult r;
  std::shared_ptr<Tape> tape;
  r.embeddings = run_batch(params, features, rate, window_step, &tape);
  r.tape = std::move(tape);
  return r;
}

ForwardResult forward(const ModelParams& params, const std::vector<MonoClip>& windows,
                      int window_step) {
  require(!windows.empty(), "forward: empty window batch");
  const std::size_t len = windows[0].size();
  const double rate = windows[0].rate;
  for (const auto& w : windows)
    require(w.size() == len && w.rate == rate, "forward: windows must share length and rate");
  std::vector<Spectrogram> feats(windows.size());
  const std::size_t n_chunks = (windows.size() + kWindowChunk - 1) / kWindowChunk;
  parallel_chunks(n_chunks, [&](std::size_t chunk) {
    const std::size_t begin = chunk * kWindowChunk;
    const std::size_t end = std::min(windows.size(), begin + kWindowChunk);
    for (std::size_t i = begin; i < end; ++i) feats[i] = stft_features(windows[i]);
  });
  return forward(params, feats, rate, window_step);
}

EmbeddingSequence embed(const ModelParams& params, const std::vector<Spectrogram>& features,
                        double rate, int window_step) {
  return run_batch(params, features, rate, window_step, nullptr);
}

namespace {

void backward_window(const Tape& tape, const WindowTape& wt, const Eigen::VectorXd& dh,
                     Grads& g) {
  const ModelParams& p = tape.params;
  const LayoutMap& map = tape.map;
  const ArchConfig& a = p.arch;

  // l2 normalization: dz = (dh - (dh . h) h) / |z|
  const Eigen::VectorXd dz = (dh - dh.dot(wt.h) * wt.h) / wt.znorm;

  // Projection head.
  const int clast = static_cast<int>(wt.pooled.size());
  {
    RowMajorMutMap dwm(g[map.head_w].data(), a.embed_dim, clast);
    dwm.noalias() += dz * wt.pooled.transpose();
    for (int d = 0; d < a.embed_dim; ++d) g[map.head_b][d] += dz[d];
  }
  const ParamBlock& hw = p.blocks[map.head_w];
  RowMajorMap wm(hw.v.data(), a.embed_dim, clast);
  const Eigen::VectorXd dpool = wm.transpose() * dz;

  // Global average pool.
  const Ten& last_sum = wt.sums.back();
  Ten dcur(last_sum.c, last_sum.h, last_sum.w);
  const double inv = 1.0 / (static_cast<double>(last_sum.h) * last_sum.w);
  for (int c = 0; c < dcur.c; ++c) {
    double* plane = dcur.v.data() + static_cast<std::size_t>(c) * dcur.h * dcur.w;
    const double val = dpool[c] * inv;
    for (int j = 0; j < dcur.h * dcur.w; ++j) plane[j] = val;
  }

  for (std::size_t bi = map.blocks.size(); bi-- > 0;) {
    const BlockIndex& b = map.blocks[bi];
    const Ten input = bi == 0 ? wt.input : relu(wt.sums[bi - 1]);
    const Ten& sum = wt.sums[bi];

    // Through the output ReLU.
    Ten dsum = dcur;
    for (std::size_t j = 0; j < dsum.size(); ++j)
      if (sum.v[j] <= 0.0) dsum.v[j] = 0.0;

    Ten din_main;
    if (a.convs_per_block == 1) {
      din_main = conv_backward(input, p.blocks[b.w1], dsum, 3, b.stride, 1, g[b.w1], g[b.b1]);
    } else {
      const Ten& pre1 = wt.pre1[bi];
      const Ten act1 = relu(pre1);
      Ten da1 = conv_backward(act1, p.blocks[b.w2], dsum, 3, 1, 1, g[b.w2], g[b.b2]);
      for (std::size_t j = 0; j < da1.size(); ++j)
        if (pre1.v[j] <= 0.0) da1.v[j] = 0.0;
      din_main = conv_backward(input, p.blocks[b.w1], da1, 3, b.stride, 1, g[b.w1], g[b.b1]);
    }

    if (b.has_skip_conv) {
      Ten din_skip = conv_backward(input, p.blocks[b.sw], dsum, 1, b.stride, 0, g[b.sw], g[b.sb]);
      for (std::size_t j = 0; j < din_main.size(); ++j) din_main.v[j] += din_skip.v[j];
    } else {
      for (std::size_t j = 0; j < din_main.size(); ++j) din_main.v[j] += dsum.v[j];
    }
    dcur = std::move(din_main);
  }
}

}  // namespace

Grads backward(const Tape& tape, const Eigen::MatrixXd& grad_embeddings) {
  const std::size_t n = tape.windows.size();
  require(static_cast<std::size_t>(grad_embeddings.rows()) == n &&
              grad_embeddings.cols() == tape.params.arch.embed_dim,
          "backward: gradient shape does not match the tape");

  const std::size_t n_chunks = (n + kWindowChunk - 1) / kWindowChunk;
  std::vector<Grads> partial(n_chunks);
  parallel_chunks(n_chunks, [&](std::size_t chunk) {
    Grads g = zeros_like(tape.params);
    const std::size_t begin = chunk * kWindowChunk;
    const std::size_t end = std::min(n, begin + kWindowChunk);
    for (std::size_t i = begin; i < end; ++i)
      backward_window(tape, tape.windows[i],
                      grad_embeddings.row(static_cast<Eigen::Index>(i)).transpose(), g);
    partial[chunk] = std::move(g);
  });

  // Reduce in chunk order for bit-deterministic sums.
  Grads total = zeros_like(tape.params);
  for (auto& g : partial) grads_add_scaled(total, g, 1.0);
  return total;
}

EmbeddingSequence embed_sequence(const ModelParams& params, const MonoClip& channel, int window,
                                 int step) {
  require(window_count(channel.size(), window, step) >= 1,
          "embed_sequence: clip too short for one window");
  const auto windows = extract_windows(channel, window, step);
  std::vector<Spectrogram> feats(windows.size());
  const std::size_t n_chunks = (windows.size() + kWindowChunk - 1) / kWindowChunk;
  parallel_chunks(n_chunks, [&](std::size_t chunk) {
    const std::size_t begin = chunk * kWindowChunk;
    const std::size_t end = std::min(windows.size(), begin + kWindowChunk);
    for (std::size_t i = begin; i < end; ++i) feats[i] = stft_features(windows[i]);
  });
  return embed(params, feats, channel.rate, step);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'T', 'D', 'E', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  using detail::write_le;
  params.validate();
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "save_checkpoint: cannot open '" + path + "'");

  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint64_t>(out, params.arch.digest());

  const ArchConfig& a = params.arch;
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.input_channels));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.input_bins));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.input_frames));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.convs_per_block));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.embed_dim));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.channels.size()));
  for (std::size_t i = 0; i < a.channels.size(); ++i) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.channels[i]));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.strides[i]));
  }

  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.blocks.size()));
  for (const auto& b : params.blocks) {
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(b.shape.size()));
    for (int d : b.shape) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double x : b.v) write_le<double>(out, x);
  }
  require(out.good(), "save_checkpoint: write failed for '" + path + "'");
}

ModelParams load_checkpoint(const std::string& path) {
  using detail::read_le;
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "load_checkpoint: cannot open '" + path + "'");

  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, kMagic, 4) == 0,
          "load_checkpoint: bad magic in '" + path + "' (not a checkpoint)");
  const auto version = read_le<std::uint32_t>(in);
  require(version == kVersion, "load_checkpoint: unsupported version in '" + path + "'");
  const auto stored_digest = read_le<std::uint64_t>(in);

  ArchConfig a;
  a.input_channels = static_cast<int>(read_le<std::uint32_t>(in));
  a.input_bins = static_cast<int>(read_le<std::uint32_t>(in));
  a.input_frames = static_cast<int>(read_le<std::uint32_t>(in));
  a.convs_per_block = static_cast<int>(read_le<std::uint32_t>(in));
  a.embed_dim = static_cast<int>(read_le<std::uint32_t>(in));
  const auto n_blocks = read_le<std::uint32_t>(in);
  a.channels.resize(n_blocks);
  a.strides.resize(n_blocks);
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    a.channels[i] = static_cast<int>(read_le<std::uint32_t>(in));
    a.strides[i] = static_cast<int>(read_le<std::uint32_t>(in));
  }
  require(in.good(), "load_checkpoint: truncated header in '" + path + "'");

  char digest_msg[64];
  std::snprintf(digest_msg, sizeof digest_msg, "0x%016llx",
                static_cast<unsigned long long>(stored_digest));
  require(a.digest() == stored_digest, "load_checkpoint: architecture digest mismatch in '" + path +
                                           "' (stored " + digest_msg + ")");

  ModelParams p;
  p.arch = a;
  const auto n_param_blocks = read_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_param_blocks; ++i) {
    ParamBlock b;
    const auto name_len = read_le<std::uint16_t>(in);
    b.name.resize(name_len);
    in.read(b.name.data(), name_len);
    const auto ndim = read_le<std::uint8_t>(in);
    b.shape.resize(ndim);
    std::size_t count = 1;
    for (int d = 0; d < ndim; ++d) {
      b.shape[d] = static_cast<int>(read_le<std::uint32_t>(in));
      count *= static_cast<std::size_t>(b.shape[d]);
    }
    b.v.resize(count);
    for (auto& x : b.v) x = read_le<double>(in);
    require(in.good(), "load_checkpoint: truncated parameter data in '" + path + "'");
    p.blocks.push_back(std::move(b));
  }
  p.validate();
  return p;
}

ModelParams load_checkpoint(const std::string& path, const ArchConfig& expected) {
  ModelParams p = load_checkpoint(path);
  if (p.arch.digest() != expected.digest()) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "load_checkpoint: architecture mismatch: checkpoint digest 0x%016llx (%s) vs "
                  "expected 0x%016llx (%s)",
                  static_cast<unsigned long long>(p.arch.digest()), p.arch.serialize().c_str(),
                  static_cast<unsigned long long>(expected.digest()), expected.serialize().c_str());
    fail(msg);
  }
  return p;
}

}  // namespace tde
