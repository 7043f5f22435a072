#pragma once

#include <vector>

#include "park/camera.hpp"
#include "park/nn.hpp"
#include "park/tensor.hpp"

namespace park {

constexpr int kFeatChannels = 32;  // C_f
constexpr int kFeatSize = 16;      // feature grid, 8x downsample of 128
constexpr int kDepthBins = 24;     // bins over [0.5 m, 12.5 m], 0.5 m steps
constexpr double kDepthBinEdge0 = 0.5;
constexpr double kDepthBinStep = 0.5;
constexpr int kBevSize = 200;      // 200x200 at 0.1 m over [-10 m, 10 m]
constexpr double kBevRange = 10.0;
constexpr double kBevRes = 0.1;
constexpr int kBevPool = 8;        // 8x8 average pooling -> 25x25 tokens
constexpr int kBevTokenSide = 25;
constexpr int kBevTokens = kBevTokenSide * kBevTokenSide;
constexpr int kDModel = 64;
constexpr double kSplatMaxZ = 3.0;

inline double depth_bin_center(int b) {
  return kDepthBinEdge0 + (b + 0.5) * kDepthBinStep;
}
// Bin whose center is nearest to d; -1 when d is outside the covered span.
int depth_bin_index(double d);

// [3,128,128] channel-first tensor from a rendered frame (no gradient).
Tensor frame_to_tensor(const CameraFrame& frame);

// Precomputed (camera, pixel, bin) -> BEV cell table. Feature pixel (i,j)
// lifts through the image point at pixel_stride*(col+0.5, row+0.5); the cell
// index is row-major i*kBevSize+j with i the x bin, or -1 for dropped
// contributions (outside the grid or above kSplatMaxZ).
struct SplatGeometry {
  int cameras = 0, feat_h = 0, feat_w = 0, bins = 0;
  std::vector<int32_t> cell;  // [cam][bin][row][col]

  int32_t at(int cam, int bin, int row, int col) const {
    return cell[((static_cast<size_t>(cam) * bins + bin) * feat_h + row) *
                    feat_w +
                col];
  }

  static SplatGeometry build(const std::vector<Camera>& rig, int feat_h,
                             int feat_w, double pixel_stride);
  static const SplatGeometry& default_geometry();
};

// Sum-pooled lift-splat: every (pixel, bin) contributes feature x
// probability to its cell. fmaps: per camera [C_f,h,w]; depths: per camera
// [N_d,h,w]. Output [C_f,200,200].
Tensor lift_splat(const std::vector<Tensor>& fmaps,
                  const std::vector<Tensor>& depths, const SplatGeometry& geo);

// Fixed two-dimensional sine-cosine grid encoding added to the BEV field.
// Half the channels encode the x index, half the y index.
Tensor add_posenc(const Tensor& grid);
const Tensor& bev_posenc(int channels, int size);

// Same construction at the feature-map scale; injected before the depth
// head so per-pixel depth can depend on the image row a feature came from
// (the shared conv encoder itself is translation-invariant).
const Tensor& feat_posenc();

// Goal expressed in the ego frame as (x, y, cos psi, sin psi).
std::array<double, 4> goal_in_ego(const GoalSlot& goal, const VehiclePose& ego);

struct PerceptionConfig {
  bool goal_concat = false;  // ablation: concat+project instead of attention
};

struct PerceptionNet {
  Conv2d conv1, conv2, conv3;
  Conv2d depth_head;
  Linear token_proj;        // C_f -> d_model
  Linear goal_fc1, goal_fc2;
  MultiheadAttention goal_attn;
  Linear concat_proj;       // only in the goal_concat ablation
  PerceptionConfig config;

  PerceptionNet() = default;
  PerceptionNet(ParamStore& ps, Rng& rng, PerceptionConfig config = {});

  // [3,128,128] -> [C_f,16,16]; shared weights across cameras
  Tensor encode_image(const Tensor& image) const;
  // [C_f,16,16] -> [N_d,16,16] pre-softmax logits (posenc-augmented input)
  Tensor depth_logits(const Tensor& fmap) const;
  // [C_f,16,16] -> [N_d,16,16], channel-softmaxed per pixel
  Tensor predict_depth(const Tensor& fmap) const;
  // [C_f,200,200] -> [625, d_model]
  Tensor bev_tokens(const Tensor& grid) const;
  // (x,y,cos,sin) -> [d_model]
  Tensor goal_encode(const std::array<double, 4>& goal_ego) const;
  // goal token + BEV tokens -> attended tokens [625, d_model]
  Tensor goal_fuse(const Tensor& goal_token, const Tensor& tokens) const;
  // attention weights over the 625 tokens (average over heads), for viz
  std::vector<double> goal_attention_map(const Tensor& goal_token,
                                         const Tensor& tokens) const;

  struct Output {
    std::vector<Tensor> fmaps;
    std::vector<Tensor> depths;
    Tensor bev;       // post positional encoding
    Tensor tokens;    // [625, d_model] before goal fusion
    Tensor attended;  // F_att [625, d_model]
  };
  Output forward(const std::vector<CameraFrame>& frames, const GoalSlot& goal,
                 const VehiclePose& ego) const;
};

}  // namespace park
