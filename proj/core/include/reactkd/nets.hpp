#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reactkd/region_graph.hpp"
#include "reactkd/volume.hpp"

namespace reactkd {

// ---------------------------------------------------------------------------
// Windowed self-attention (Swin-style, 3D)

struct WindowShape {
  int depth = 1;   // P
  int height = 1;  // M
  int width = 1;   // M

  int volume() const { return depth * height * width; }
  // Number of entries in the relative-position bias table.
  int bias_table_size() const { return (2 * depth - 1) * (2 * height - 1) * (2 * width - 1); }
  Dims as_dims() const { return {depth, height, width}; }
};

struct LayerNormParams {
  Eigen::VectorXd gain;
  Eigen::VectorXd offset;
};

// GELU(x W1 + b1) W2 + b2, applied per token.
struct MlpParams {
  Eigen::MatrixXd w1;  // C x hidden
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // hidden x C
  Eigen::VectorXd b2;
};

// Parameters of one attention sub-block: projections, relative-position
// bias, the two pre-normalizations and the feed-forward network.
struct AttentionParams {
  Eigen::MatrixXd w_q;  // C x d
  Eigen::MatrixXd w_k;
  Eigen::MatrixXd w_v;
  Eigen::MatrixXd bias_table;  // bias_table_size() x heads, indexed by 3D offset
  WindowShape window;
  int heads = 1;
  MlpParams mlp;
  LayerNormParams norm1;  // before attention
  LayerNormParams norm2;  // before the MLP

  int channels() const { return static_cast<int>(w_q.rows()); }
  int dim() const { return static_cast<int>(w_q.cols()); }
  void validate() const;

  static AttentionParams zeros(int channels, int dim, int hidden, WindowShape window, int heads);
  static AttentionParams random(int channels, int dim, int hidden, WindowShape window, int heads,
                                std::uint64_t seed, double scale = 0.2);
};

// W-MSA followed by SW-MSA, each with its own weights.
struct SwinBlockParams {
  AttentionParams regular;
  AttentionParams shifted;
};

// Cyclic shift used by the shifted mode: (floor(P/2), floor(M/2), floor(M/2)).
std::array<int, 3> window_shift(const WindowShape& w);

// Attention weights of one window and head, with the grid indices of the
// window's tokens (row r of `weights` belongs to token `tokens[r]`).
struct WindowAttention {
  std::vector<std::size_t> tokens;
  int head = 0;
  Eigen::MatrixXd weights;
  std::vector<std::vector<bool>> allowed;  // false where the shift mask applies
};

// Multi-head windowed attention over a token grid whose extent is a multiple
// of the window. Rows of `tokens` follow the grid's row-major order. Returns
// the concatenated head outputs (N x d). In shifted mode the grid is rolled
// by window_shift(), and token pairs that came from different sub-regions of
// the rolled grid get exactly zero weight.
Eigen::MatrixXd wmsa_forward(const Eigen::MatrixXd& tokens, Dims grid, const AttentionParams& p,
                             bool shifted, std::vector<WindowAttention>* trace = nullptr);

// Single-window form: the token count must equal the window volume.
Eigen::MatrixXd wmsa_forward(const Eigen::MatrixXd& tokens, const AttentionParams& p, bool shifted,
                             std::vector<WindowAttention>* trace = nullptr);

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& tokens, const LayerNormParams& p, double eps = 1e-5);
double gelu(double x);
Eigen::MatrixXd mlp_forward(const Eigen::MatrixXd& tokens, const MlpParams& p);

// z^ = W-MSA(LN(z)) + z; z' = MLP(LN(z^)) + z^; then the same with SW-MSA.
Eigen::MatrixXd swin_block_forward(const Eigen::MatrixXd& tokens, Dims grid, const SwinBlockParams& p);
Eigen::MatrixXd swin_block_forward(const Eigen::MatrixXd& tokens, const SwinBlockParams& p);

// Voxel tokens (N x C, N = D*H*W) to and from a feature volume.
Eigen::MatrixXd to_tokens(const FeatureVolume& f);
FeatureVolume from_tokens(const Eigen::MatrixXd& tokens, Dims dims);

// ---------------------------------------------------------------------------
// Convolutional blocks

// Cubic kernel, zero padding of kernel/2 on every side.
struct Conv3d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  std::vector<double> weights;  // out x in x k x k x k
  std::vector<double> bias;     // out

  double& w(int o, int i, int dz, int dy, int dx) {
    return weights[(((static_cast<std::size_t>(o) * in_channels + i) * kernel + dz) * kernel + dy) * kernel + dx];
  }
  double w(int o, int i, int dz, int dy, int dx) const {
    return weights[(((static_cast<std::size_t>(o) * in_channels + i) * kernel + dz) * kernel + dy) * kernel + dx];
  }
  Dims output_dims(Dims in) const;
  void validate() const;

  static Conv3d zeros(int in, int out, int kernel, int stride = 1);
  static Conv3d random(int in, int out, int kernel, int stride, std::uint64_t seed, double scale);
};

FeatureVolume conv3d(const FeatureVolume& f, const Conv3d& c);
// Per channel, per instance normalization over spatial positions; no affine.
FeatureVolume instance_norm(const FeatureVolume& f, double eps = 1e-5);
FeatureVolume relu(FeatureVolume f);

struct ResUnitParams {
  Conv3d conv1;   // C -> C', 3x3x3
  Conv3d conv2;   // C' -> C, 3x3x3
  Conv3d down;    // stride-2 3x3x3
  Conv3d reduce;  // 1x1x1 channel reduction
};

// Z = ReLU(IN(conv1(F))); F' = F + conv2(Z).
FeatureVolume resunit_forward(const FeatureVolume& f, const ResUnitParams& p);
// Stride-2 convolution (output extent ceil(n / 2)) then the 1x1x1 reduction.
FeatureVolume downsample_reduce(const FeatureVolume& f, const ResUnitParams& p);

// ---------------------------------------------------------------------------
// CBAM-3D

struct CbamParams {
  int reduction = 2;
  Eigen::MatrixXd w1;  // (C/r) x C
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // C x (C/r)
  Eigen::VectorXd b2;
  Conv3d spatial;      // 2 -> 1, kernel 7 by default

  void validate(int channels) const;
  static CbamParams zeros(int channels, int reduction, int kernel = 7);
  static CbamParams random(int channels, int reduction, int kernel, std::uint64_t seed, double scale);
};

struct CbamTrace {
  Eigen::VectorXd channel_gate;
  std::vector<double> spatial_gate;
};

double sigmoid(double x);

// Channel gate sigmoid(MLP(avgpool) + MLP(maxpool)), then spatial gate
// sigmoid(conv([mean_c, max_c])); output is the doubly gated input.
FeatureVolume cbam3d_forward(const FeatureVolume& f, const CbamParams& p, CbamTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Trainable classifier head

struct StudentHead {
  Eigen::MatrixXd weight;  // classes x inputs
  Eigen::VectorXd bias;

  int inputs() const { return static_cast<int>(weight.cols()); }
  int classes() const { return static_cast<int>(weight.rows()); }

  // Weights ~ N(0, scale^2), bias 0.
  static StudentHead init(int inputs, int classes, std::uint64_t seed, double scale = 0.1);
};

struct HeadGradient {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

Eigen::VectorXd student_head_forward(const Eigen::VectorXd& stats, const StudentHead& head);
HeadGradient student_head_backward(const Eigen::VectorXd& stats, const Eigen::VectorXd& grad_logits);
// Gradient of the logits' loss with respect to the head input.
Eigen::VectorXd student_head_input_gradient(const StudentHead& head, const Eigen::VectorXd& grad_logits);

// ---------------------------------------------------------------------------
// Parameter files: flat JSON object of named arrays
//   {"name": {"shape": [...], "data": [...]}, ...}

struct NamedArray {
  std::vector<int> shape;
  std::vector<double> data;
};

using ParamStore = std::map<std::string, NamedArray>;

std::string params_to_json(const ParamStore& store);
ParamStore params_from_json(const std::string& text);

void store_conv(ParamStore& s, const std::string& prefix, const Conv3d& c);
Conv3d load_conv(const ParamStore& s, const std::string& prefix);
void store_matrix(ParamStore& s, const std::string& name, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const ParamStore& s, const std::string& name);
void store_vector(ParamStore& s, const std::string& name, const Eigen::VectorXd& v);
Eigen::VectorXd load_vector(const ParamStore& s, const std::string& name);
void store_cbam(ParamStore& s, const std::string& prefix, const CbamParams& p);
CbamParams load_cbam(const ParamStore& s, const std::string& prefix);
void store_head(ParamStore& s, const std::string& prefix, const StudentHead& h);
StudentHead load_head(const ParamStore& s, const std::string& prefix);

}  // namespace reactkd
