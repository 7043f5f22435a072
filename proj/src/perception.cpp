#include "park/perception.hpp"

#include <cmath>
#include <stdexcept>

namespace park {

int depth_bin_index(double d) {
  if (d < kDepthBinEdge0 || d > kDepthBinEdge0 + kDepthBins * kDepthBinStep)
    return -1;
  const int b = static_cast<int>((d - kDepthBinEdge0) / kDepthBinStep);
  return std::min(b, kDepthBins - 1);
}

Tensor frame_to_tensor(const CameraFrame& frame) {
  const int h = frame.height, w = frame.width;
  std::vector<double> chw(static_cast<size_t>(3) * h * w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        chw[(static_cast<size_t>(c) * h + y) * w + x] =
            frame.image[(static_cast<size_t>(y) * w + x) * 3 + c];
  return Tensor::from({3, h, w}, std::move(chw));
}

SplatGeometry SplatGeometry::build(const std::vector<Camera>& rig, int feat_h,
                                   int feat_w, double pixel_stride) {
  SplatGeometry g;
  g.cameras = static_cast<int>(rig.size());
  g.feat_h = feat_h;
  g.feat_w = feat_w;
  g.bins = kDepthBins;
  g.cell.assign(static_cast<size_t>(g.cameras) * g.bins * feat_h * feat_w, -1);
  size_t idx = 0;
  for (const Camera& cam : rig)
    for (int b = 0; b < kDepthBins; ++b)
      for (int row = 0; row < feat_h; ++row)
        for (int col = 0; col < feat_w; ++col, ++idx) {
          const double u = pixel_stride * (col + 0.5);
          const double v = pixel_stride * (row + 0.5);
          const Vec3 p =
              unproject_to_ego(u, v, depth_bin_center(b), cam.intr, cam.extr);
          if (p.z > kSplatMaxZ) continue;
          const int xi = static_cast<int>(std::floor((p.x + kBevRange) / kBevRes));
          const int yi = static_cast<int>(std::floor((p.y + kBevRange) / kBevRes));
          if (xi < 0 || xi >= kBevSize || yi < 0 || yi >= kBevSize) continue;
          g.cell[idx] = xi * kBevSize + yi;
        }
  return g;
}

const SplatGeometry& SplatGeometry::default_geometry() {
  static const SplatGeometry geo =
      SplatGeometry::build(default_rig(), kFeatSize, kFeatSize,
                           static_cast<double>(kImageSize) / kFeatSize);
  return geo;
}

Tensor lift_splat(const std::vector<Tensor>& fmaps,
                  const std::vector<Tensor>& depths, const SplatGeometry& geo) {
  if (fmaps.size() != depths.size() ||
      static_cast<int>(fmaps.size()) != geo.cameras)
    throw std::invalid_argument("lift_splat: camera count mismatch");
  const int hw = geo.feat_h * geo.feat_w;
  const int channels = fmaps.empty() ? 0 : fmaps[0].dim(0);
  for (const Tensor& f : fmaps)
    if (f.rank() != 3 || f.dim(1) != geo.feat_h || f.dim(2) != geo.feat_w)
      throw std::invalid_argument("lift_splat: bad feature map shape " +
                                  shape_str(f.shape()));
  for (const Tensor& d : depths)
    if (d.rank() != 3 || d.dim(0) != geo.bins || d.dim(1) != geo.feat_h ||
        d.dim(2) != geo.feat_w)
      throw std::invalid_argument("lift_splat: bad depth shape " +
                                  shape_str(d.shape()));

  std::vector<Tensor> inputs = fmaps;
  inputs.insert(inputs.end(), depths.begin(), depths.end());
  const int ncam = geo.cameras;
  const SplatGeometry* gp = &geo;
  return custom_op(
      "lift_splat", {channels, kBevSize, kBevSize}, std::move(inputs),
      [ncam, channels, hw, gp](Node& n) {
        for (int cam = 0; cam < ncam; ++cam) {
          const auto& feat = n.inputs[cam]->value;
          const auto& prob = n.inputs[ncam + cam]->value;
          for (int b = 0; b < gp->bins; ++b)
            for (int p = 0; p < hw; ++p) {
              const int32_t cell =
                  gp->cell[(static_cast<size_t>(cam) * gp->bins + b) * hw + p];
              if (cell < 0) continue;
              const double w = prob[static_cast<size_t>(b) * hw + p];
              if (w == 0.0) continue;
              for (int c = 0; c < channels; ++c)
                n.value[static_cast<size_t>(c) * kBevSize * kBevSize + cell] +=
                    w * feat[static_cast<size_t>(c) * hw + p];
            }
        }
      },
      [ncam, channels, hw, gp](Node& n, GradRouter& r) {
        constexpr size_t grid = static_cast<size_t>(kBevSize) * kBevSize;
        for (int cam = 0; cam < ncam; ++cam) {
          const auto& feat = n.inputs[cam]->value;
          const auto& prob = n.inputs[ncam + cam]->value;
          double* gfeat = n.inputs[cam]->requires_grad
                              ? r.grad_of(n.inputs[cam])
                              : nullptr;
          double* gprob = n.inputs[ncam + cam]->requires_grad
                              ? r.grad_of(n.inputs[ncam + cam])
                              : nullptr;
          for (int b = 0; b < gp->bins; ++b)
            for (int p = 0; p < hw; ++p) {
              const int32_t cell =
                  gp->cell[(static_cast<size_t>(cam) * gp->bins + b) * hw + p];
              if (cell < 0) continue;
              const double w = prob[static_cast<size_t>(b) * hw + p];
              double dw = 0.0;
              for (int c = 0; c < channels; ++c) {
                const double go = n.grad[c * grid + cell];
                if (gfeat) gfeat[static_cast<size_t>(c) * hw + p] += w * go;
                dw += feat[static_cast<size_t>(c) * hw + p] * go;
              }
              if (gprob) gprob[static_cast<size_t>(b) * hw + p] += dw;
            }
        }
      });
}

namespace {

Tensor build_grid_posenc(int c, int n) {
  const int pairs = c / 4;
  std::vector<double> data(static_cast<size_t>(c) * n * n);
  for (int p = 0; p < pairs; ++p) {
    const double freq = std::pow(10000.0, -static_cast<double>(p) / pairs);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const size_t at = static_cast<size_t>(i) * n + j;
        const size_t plane = static_cast<size_t>(n) * n;
        data[(0 * pairs + p) * plane + at] = std::sin(i * freq);
        data[(1 * pairs + p) * plane + at] = std::cos(i * freq);
        data[(2 * pairs + p) * plane + at] = std::sin(j * freq);
        data[(3 * pairs + p) * plane + at] = std::cos(j * freq);
      }
  }
  return Tensor::from({c, n, n}, std::move(data));
}

}  // namespace

const Tensor& bev_posenc(int channels, int size) {
  static Tensor table = build_grid_posenc(kFeatChannels, kBevSize);
  if (channels != kFeatChannels || size != kBevSize)
    throw std::invalid_argument("bev_posenc: fixed grid shape only");
  return table;
}

const Tensor& feat_posenc() {
  static Tensor table = build_grid_posenc(kFeatChannels, kFeatSize);
  return table;
}

Tensor add_posenc(const Tensor& grid) {
  if (grid.rank() != 3)
    throw std::invalid_argument("add_posenc: grid must be [C,H,W]");
  const int c = grid.dim(0);
  if (c % 2 != 0 || (c / 2) % 2 != 0)
    throw std::invalid_argument(
        "add_posenc: channel count must split into sin/cos pairs per axis");
  return add(grid, bev_posenc(c, grid.dim(1)));
}

std::array<double, 4> goal_in_ego(const GoalSlot& goal,
                                  const VehiclePose& ego) {
  const double c = std::cos(ego.psi), s = std::sin(ego.psi);
  const double dx = goal.x - ego.x, dy = goal.y - ego.y;
  const double rel_psi = goal.psi - ego.psi;
  return {c * dx + s * dy, -s * dx + c * dy, std::cos(rel_psi),
          std::sin(rel_psi)};
}

PerceptionNet::PerceptionNet(ParamStore& ps, Rng& rng, PerceptionConfig cfg)
    : config(cfg) {
  conv1 = Conv2d(ps, "percep.conv1", 3, 32, 3, 2, 1, rng);
  conv2 = Conv2d(ps, "percep.conv2", 32, 48, 3, 2, 1, rng);
  conv3 = Conv2d(ps, "percep.conv3", 48, kFeatChannels, 3, 2, 1, rng);
  depth_head = Conv2d(ps, "percep.depth", kFeatChannels, kDepthBins, 1, 1, 0, rng);
  token_proj = Linear(ps, "percep.token", kFeatChannels, kDModel, rng);
  goal_fc1 = Linear(ps, "percep.goal1", 4, kDModel, rng);
  goal_fc2 = Linear(ps, "percep.goal2", kDModel, kDModel, rng);
  if (config.goal_concat) {
    concat_proj = Linear(ps, "percep.goal_concat", 2 * kDModel, kDModel, rng);
  } else {
    goal_attn = MultiheadAttention(ps, "percep.goal_attn", kDModel, 4, rng);
  }
}

Tensor PerceptionNet::encode_image(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != kImageSize ||
      image.dim(2) != kImageSize)
    throw std::invalid_argument("encode_image: expected [3,128,128], got " +
                                shape_str(image.shape()));
  Tensor h1 = relu(conv1(image));
  Tensor h2 = relu(conv2(h1));
  return conv3(h2);
}

Tensor PerceptionNet::depth_logits(const Tensor& fmap) const {
  return depth_head(add(fmap, feat_posenc()));  // [N_d,16,16]
}

Tensor PerceptionNet::predict_depth(const Tensor& fmap) const {
  return softmax(depth_logits(fmap), 0);
}

Tensor PerceptionNet::bev_tokens(const Tensor& grid) const {
  Tensor pooled = avg_pool_chw(grid, kBevPool);  // [C_f,25,25]
  Tensor flat = reshape(pooled, {kFeatChannels, kBevTokens});
  return token_proj(transpose(flat));  // [625, d_model]
}

Tensor PerceptionNet::goal_encode(const std::array<double, 4>& goal_ego) const {
  Tensor in = Tensor::from({4}, {goal_ego[0], goal_ego[1], goal_ego[2],
                                 goal_ego[3]});
  return goal_fc2(relu(goal_fc1(in)));
}

Tensor PerceptionNet::goal_fuse(const Tensor& goal_token,
                                const Tensor& tokens) const {
  if (config.goal_concat) {
    // ablation arm: per-token concat of the goal embedding, mapped back down
    Tensor goal_rows = matmul(Tensor::full({kBevTokens, 1}, 1.0),
                              reshape(goal_token, {1, kDModel}));
    return concat_proj(concat_cols({tokens, goal_rows}));
  }
  Tensor ctx = goal_attn(reshape(goal_token, {1, kDModel}), tokens);
  return add_rowvec(tokens, reshape(ctx, {kDModel}));
}

std::vector<double> PerceptionNet::goal_attention_map(
    const Tensor& goal_token, const Tensor& tokens) const {
  if (config.goal_concat)
    return std::vector<double>(kBevTokens, 1.0 / kBevTokens);
  return attention_weights(goal_attn.wq(reshape(goal_token, {1, kDModel})),
                           goal_attn.wk(tokens), goal_attn.heads);
}

PerceptionNet::Output PerceptionNet::forward(
    const std::vector<CameraFrame>& frames, const GoalSlot& goal,
    const VehiclePose& ego) const {
  Output out;
  for (const CameraFrame& f : frames) {
    Tensor fmap = encode_image(frame_to_tensor(f));
    out.fmaps.push_back(fmap);
    out.depths.push_back(predict_depth(fmap));
  }
  Tensor grid = lift_splat(out.fmaps, out.depths,
                           SplatGeometry::default_geometry());
  out.bev = add_posenc(grid);
  out.tokens = bev_tokens(out.bev);
  Tensor goal_token = goal_encode(goal_in_ego(goal, ego));
  out.attended = goal_fuse(goal_token, out.tokens);
  return out;
}

}  // namespace park
