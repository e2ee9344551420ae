#include "pilot/regressor.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pilot/rng.hpp"
#include "pilot/serialization.hpp"

namespace pilot {

namespace {

constexpr int kKernel = 3;
constexpr int kStride = 2;
constexpr int kPad = 1;

int conv_out(int in) { return (in + 2 * kPad - kKernel) / kStride + 1; }

struct Dims {
  int h1, w1;  // after conv1
  int h2, w2;  // after conv2
  int feat_conv;
  int feat;
  int out;
};

Dims dims_of(const RegressorConfig& cfg) {
  Dims d;
  d.h1 = conv_out(cfg.raster.height);
  d.w1 = conv_out(cfg.raster.width);
  d.h2 = conv_out(d.h1);
  d.w2 = conv_out(d.w1);
  d.feat_conv = cfg.conv2_filters * d.h2 * d.w2;
  d.feat = d.feat_conv + 3;
  d.out = 2 * cfg.waypoints;
  return d;
}

// Offsets of each parameter block inside the flat vector.
struct Layout {
  int w1, b1, w2, b2, wd1, bd1, wd2, bd2, wh, bh, total;
  int c1_rows, c1_cols, c2_rows, c2_cols;
  int d1_cols, d2_cols, h_cols;
};

Layout layout_of(const RegressorConfig& cfg) {
  const Dims d = dims_of(cfg);
  Layout l;
  l.c1_rows = cfg.conv1_filters;
  l.c1_cols = cfg.raster.channels * kKernel * kKernel;
  l.c2_rows = cfg.conv2_filters;
  l.c2_cols = cfg.conv1_filters * kKernel * kKernel;
  l.d1_cols = d.feat;
  l.d2_cols = cfg.dense1;
  l.h_cols = cfg.dense2;
  int p = 0;
  l.w1 = p; p += l.c1_rows * l.c1_cols;
  l.b1 = p; p += l.c1_rows;
  l.w2 = p; p += l.c2_rows * l.c2_cols;
  l.b2 = p; p += l.c2_rows;
  l.wd1 = p; p += cfg.dense1 * l.d1_cols;
  l.bd1 = p; p += cfg.dense1;
  l.wd2 = p; p += cfg.dense2 * l.d2_cols;
  l.bd2 = p; p += cfg.dense2;
  l.wh = p; p += d.out * l.h_cols;
  l.bh = p; p += d.out;
  l.total = p;
  return l;
}

using MapMat = Eigen::Map<const Eigen::MatrixXd>;
using MapVec = Eigen::Map<const Eigen::VectorXd>;
using MutMat = Eigen::Map<Eigen::MatrixXd>;
using MutVec = Eigen::Map<Eigen::VectorXd>;

// Patches of a [channels][h][w] stack as columns, one per output pixel.
void im2col(const double* src, int channels, int h, int w, Eigen::MatrixXd& cols) {
  const int ho = conv_out(h);
  const int wo = conv_out(w);
  cols.setZero(channels * kKernel * kKernel, ho * wo);
  for (int ro = 0; ro < ho; ++ro) {
    for (int co = 0; co < wo; ++co) {
      const int col = ro * wo + co;
      for (int ch = 0; ch < channels; ++ch) {
        const double* plane = src + static_cast<std::size_t>(ch) * h * w;
        for (int kr = 0; kr < kKernel; ++kr) {
          const int ri = ro * kStride - kPad + kr;
          if (ri < 0 || ri >= h) continue;
          for (int kc = 0; kc < kKernel; ++kc) {
            const int ci = co * kStride - kPad + kc;
            if (ci < 0 || ci >= w) continue;
            cols((ch * kKernel + kr) * kKernel + kc, col) = plane[ri * w + ci];
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-add patch gradients back onto the stack.
void col2im_add(const Eigen::MatrixXd& cols, int channels, int h, int w, double* dst) {
  const int ho = conv_out(h);
  const int wo = conv_out(w);
  for (int ro = 0; ro < ho; ++ro) {
    for (int co = 0; co < wo; ++co) {
      const int col = ro * wo + co;
      for (int ch = 0; ch < channels; ++ch) {
        double* plane = dst + static_cast<std::size_t>(ch) * h * w;
        for (int kr = 0; kr < kKernel; ++kr) {
          const int ri = ro * kStride - kPad + kr;
          if (ri < 0 || ri >= h) continue;
          for (int kc = 0; kc < kKernel; ++kc) {
            const int ci = co * kStride - kPad + kc;
            if (ci < 0 || ci >= w) continue;
            plane[ri * w + ci] += cols((ch * kKernel + kr) * kKernel + kc, col);
          }
        }
      }
    }
  }
}

struct ForwardPass {
  Eigen::MatrixXd cols1, act1, cols2, act2;
  Eigen::VectorXd feat, d1, d2, out;
};

void check_inputs(const RegressorModel& model, const Raster& raster) {
  const RasterConfig& rc = model.cfg.raster;
  if (raster.channels != rc.channels || raster.height != rc.height ||
      raster.width != rc.width) {
    throw DimensionMismatch("regressor: raster dims do not match the model");
  }
  if (model.params.size() != param_count(model.cfg)) {
    throw DimensionMismatch("regressor: parameter vector has the wrong size");
  }
}

void forward(const RegressorModel& model, const Raster& raster,
             const Eigen::Vector3d& scalars, ForwardPass& fp) {
  const RegressorConfig& cfg = model.cfg;
  const Dims d = dims_of(cfg);
  const Layout l = layout_of(cfg);
  const double* p = model.params.data();

  im2col(raster.data.data(), raster.channels, raster.height, raster.width, fp.cols1);
  fp.act1 = (MapMat(p + l.w1, l.c1_rows, l.c1_cols) * fp.cols1).colwise() +
            MapVec(p + l.b1, l.c1_rows);
  fp.act1 = fp.act1.cwiseMax(0.0);

  im2col(fp.act1.data(), cfg.conv1_filters, d.h1, d.w1, fp.cols2);
  fp.act2 = (MapMat(p + l.w2, l.c2_rows, l.c2_cols) * fp.cols2).colwise() +
            MapVec(p + l.b2, l.c2_rows);
  fp.act2 = fp.act2.cwiseMax(0.0);

  fp.feat.resize(d.feat);
  for (int c = 0; c < cfg.conv2_filters; ++c) {
    for (int s = 0; s < d.h2 * d.w2; ++s) fp.feat[c * d.h2 * d.w2 + s] = fp.act2(c, s);
  }
  fp.feat.tail<3>() = scalars.cwiseProduct(cfg.scalar_scale);

  fp.d1 = (MapMat(p + l.wd1, cfg.dense1, l.d1_cols) * fp.feat +
           MapVec(p + l.bd1, cfg.dense1)).cwiseMax(0.0);
  fp.d2 = (MapMat(p + l.wd2, cfg.dense2, l.d2_cols) * fp.d1 +
           MapVec(p + l.bd2, cfg.dense2)).cwiseMax(0.0);
  fp.out = MapMat(p + l.wh, d.out, l.h_cols) * fp.d2 + MapVec(p + l.bh, d.out);
}

}  // namespace

int param_count(const RegressorConfig& cfg) { return layout_of(cfg).total; }

RegressorModel init_model(const RegressorConfig& cfg, std::uint64_t seed) {
  const Layout l = layout_of(cfg);
  RegressorModel model;
  model.cfg = cfg;
  model.params = Eigen::VectorXd::Zero(l.total);
  Rng rng(seed);
  const auto he_fill = [&](int offset, int rows, int cols) {
    const double std_dev = std::sqrt(2.0 / cols);
    for (int i = 0; i < rows * cols; ++i) model.params[offset + i] = std_dev * rng.normal();
  };
  he_fill(l.w1, l.c1_rows, l.c1_cols);
  he_fill(l.w2, l.c2_rows, l.c2_cols);
  he_fill(l.wd1, cfg.dense1, l.d1_cols);
  he_fill(l.wd2, cfg.dense2, l.d2_cols);
  // Biases and the head stay zero: a fresh model predicts all-zero waypoints.
  return model;
}

Eigen::VectorXd predict_vector(const RegressorModel& model, const Raster& raster,
                               const Eigen::Vector3d& scalars) {
  check_inputs(model, raster);
  ForwardPass fp;
  forward(model, raster, scalars, fp);
  return fp.out;
}

std::vector<Vec2> predict(const RegressorModel& model, const Raster& raster,
                          const Eigen::Vector3d& scalars) {
  const Eigen::VectorXd flat = predict_vector(model, raster, scalars);
  std::vector<Vec2> points;
  points.reserve(static_cast<std::size_t>(model.cfg.waypoints));
  for (int k = 0; k < model.cfg.waypoints; ++k) {
    points.emplace_back(flat[2 * k], flat[2 * k + 1]);
  }
  return points;
}

Eigen::VectorXd backprop(const RegressorModel& model, const Raster& raster,
                         const Eigen::Vector3d& scalars, const Eigen::VectorXd& d_output,
                         Eigen::VectorXd* output) {
  check_inputs(model, raster);
  const RegressorConfig& cfg = model.cfg;
  const Dims d = dims_of(cfg);
  const Layout l = layout_of(cfg);
  if (d_output.size() != d.out) {
    throw DimensionMismatch("regressor: output adjoint has the wrong size");
  }
  ForwardPass fp;
  forward(model, raster, scalars, fp);
  if (output != nullptr) *output = fp.out;

  const double* p = model.params.data();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(l.total);
  double* g = grad.data();

  MutMat(g + l.wh, d.out, l.h_cols) = d_output * fp.d2.transpose();
  MutVec(g + l.bh, d.out) = d_output;
  Eigen::VectorXd g_d2 = MapMat(p + l.wh, d.out, l.h_cols).transpose() * d_output;
  g_d2 = g_d2.cwiseProduct((fp.d2.array() > 0.0).cast<double>().matrix());

  MutMat(g + l.wd2, cfg.dense2, l.d2_cols) = g_d2 * fp.d1.transpose();
  MutVec(g + l.bd2, cfg.dense2) = g_d2;
  Eigen::VectorXd g_d1 = MapMat(p + l.wd2, cfg.dense2, l.d2_cols).transpose() * g_d2;
  g_d1 = g_d1.cwiseProduct((fp.d1.array() > 0.0).cast<double>().matrix());

  MutMat(g + l.wd1, cfg.dense1, l.d1_cols) = g_d1 * fp.feat.transpose();
  MutVec(g + l.bd1, cfg.dense1) = g_d1;
  const Eigen::VectorXd g_feat =
      MapMat(p + l.wd1, cfg.dense1, l.d1_cols).transpose() * g_d1;

  Eigen::MatrixXd g_act2(cfg.conv2_filters, d.h2 * d.w2);
  for (int c = 0; c < cfg.conv2_filters; ++c) {
    for (int s = 0; s < d.h2 * d.w2; ++s) g_act2(c, s) = g_feat[c * d.h2 * d.w2 + s];
  }
  g_act2 = g_act2.cwiseProduct((fp.act2.array() > 0.0).cast<double>().matrix());

  MutMat(g + l.w2, l.c2_rows, l.c2_cols) = g_act2 * fp.cols2.transpose();
  MutVec(g + l.b2, l.c2_rows) = g_act2.rowwise().sum();
  const Eigen::MatrixXd g_cols2 =
      MapMat(p + l.w2, l.c2_rows, l.c2_cols).transpose() * g_act2;

  Eigen::MatrixXd g_act1 = Eigen::MatrixXd::Zero(cfg.conv1_filters, d.h1 * d.w1);
  col2im_add(g_cols2, cfg.conv1_filters, d.h1, d.w1, g_act1.data());
  g_act1 = g_act1.cwiseProduct((fp.act1.array() > 0.0).cast<double>().matrix());

  MutMat(g + l.w1, l.c1_rows, l.c1_cols) = g_act1 * fp.cols1.transpose();
  MutVec(g + l.b1, l.c1_rows) = g_act1.rowwise().sum();
  return grad;
}

void save_model(const std::string& path, const RegressorModel& model) {
  const RegressorConfig& cfg = model.cfg;
  std::string text = "pilot-model-v1\n";
  char line[256];
  std::snprintf(line, sizeof(line), "raster %d %d %d %s %d\n", cfg.raster.channels,
                cfg.raster.width, cfg.raster.height,
                format_double(cfg.raster.resolution).c_str(), cfg.raster.ego_anchor_col);
  text += line;
  std::snprintf(line, sizeof(line), "arch %d %d %d %d %d\n", cfg.conv1_filters,
                cfg.conv2_filters, cfg.dense1, cfg.dense2, cfg.waypoints);
  text += line;
  std::snprintf(line, sizeof(line), "scalar_scale %s %s %s\n",
                format_double(cfg.scalar_scale[0]).c_str(),
                format_double(cfg.scalar_scale[1]).c_str(),
                format_double(cfg.scalar_scale[2]).c_str());
  text += line;
  std::snprintf(line, sizeof(line), "params %d\n", static_cast<int>(model.params.size()));
  text += line;
  for (Eigen::Index i = 0; i < model.params.size(); ++i) {
    text += format_double(model.params[i]);
    text += '\n';
  }
  write_text_file(path, text);
}

RegressorModel load_model(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string tag;
  in >> tag;
  if (tag != "pilot-model-v1") {
    throw std::runtime_error("load_model: not a pilot-model-v1 file: " + path);
  }
  RegressorModel model;
  RegressorConfig& cfg = model.cfg;
  std::string key;
  int n = 0;
  in >> key >> cfg.raster.channels >> cfg.raster.width >> cfg.raster.height >>
      cfg.raster.resolution >> cfg.raster.ego_anchor_col;
  if (key != "raster") throw std::runtime_error("load_model: missing raster line");
  in >> key >> cfg.conv1_filters >> cfg.conv2_filters >> cfg.dense1 >> cfg.dense2 >>
      cfg.waypoints;
  if (key != "arch") throw std::runtime_error("load_model: missing arch line");
  in >> key >> cfg.scalar_scale[0] >> cfg.scalar_scale[1] >> cfg.scalar_scale[2];
  if (key != "scalar_scale") throw std::runtime_error("load_model: missing scalar_scale line");
  in >> key >> n;
  if (key != "params" || n != param_count(cfg)) {
    throw std::runtime_error("load_model: parameter count does not match architecture");
  }
  model.params.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!(in >> model.params[i])) {
      throw std::runtime_error("load_model: truncated parameter list");
    }
  }
  return model;
}

}  // namespace pilot
