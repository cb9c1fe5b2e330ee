/*
 * Copyright 2026 The HFLSim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hfl/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "hfl/errors.hpp"
#include "hfl/rng.hpp"

namespace hfl {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajorMatrix>;
using ConstMatMap = Eigen::Map<const RowMajorMatrix>;
using VecMap = Eigen::Map<Vector>;
using ConstVecMap = Eigen::Map<const Vector>;

void check_dims(const ModelParams& params, const Matrix& x) {
  if (params.values.size() != params.arch.param_count()) {
    raise(Errc::DimensionMismatch,
          "param vector length does not match architecture");
  }
  if (x.cols() != params.arch.input_dim) {
    raise(Errc::DimensionMismatch,
          "feature dim " + std::to_string(x.cols()) + " vs arch " +
              std::to_string(params.arch.input_dim));
  }
}

Matrix softmax_rows(Matrix logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

Matrix forward_logits(const ModelParams& params, const Matrix& x,
                      Matrix* hidden_out = nullptr) {
  const ModelArch& a = params.arch;
  const Scalar* v = params.values.data();
  if (a.kind == ArchKind::LogReg) {
    ConstMatMap w(v, a.num_classes, a.input_dim);
    ConstVecMap b(v + a.num_classes * a.input_dim, a.num_classes);
    return (x * w.transpose()).rowwise() + b.transpose();
  }
  ConstMatMap w1(v, a.hidden, a.input_dim);
  ConstVecMap b1(v + a.hidden * a.input_dim, a.hidden);
  ConstMatMap w2(v + a.hidden * a.input_dim + a.hidden, a.num_classes,
                 a.hidden);
  ConstVecMap b2(v + a.hidden * a.input_dim + a.hidden +
                     a.num_classes * a.hidden,
                 a.num_classes);
  Matrix h = ((x * w1.transpose()).rowwise() + b1.transpose()).array().tanh();
  if (hidden_out) *hidden_out = h;
  return (h * w2.transpose()).rowwise() + b2.transpose();
}

}  // namespace

Eigen::Index ModelArch::param_count() const {
  if (kind == ArchKind::LogReg) {
    return static_cast<Eigen::Index>(num_classes) * input_dim + num_classes;
  }
  return static_cast<Eigen::Index>(hidden) * input_dim + hidden +
         static_cast<Eigen::Index>(num_classes) * hidden + num_classes;
}

ModelParams init_params(const ModelArch& arch, std::uint64_t seed) {
  if (arch.input_dim < 1 || arch.num_classes < 2 ||
      (arch.kind == ArchKind::Mlp1 && arch.hidden < 1)) {
    raise(Errc::InvalidSize, "invalid model architecture");
  }
  ModelParams p;
  p.arch = arch;
  if (arch.kind == ArchKind::LogReg) {
    p.values = Vector::Zero(arch.param_count());
    return p;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(arch.input_dim));
  Rng rng(derive_seed(seed, StreamTag::Init));
  p.values = rng.uniform_vector(arch.param_count(), -bound, bound);
  return p;
}

Matrix predict_proba(const ModelParams& params, const Matrix& x) {
  check_dims(params, x);
  return softmax_rows(forward_logits(params, x));
}

Eigen::VectorXi predict(const ModelParams& params, const Matrix& x) {
  const Matrix logits = forward_logits(params, x);
  Eigen::VectorXi out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < params.arch.num_classes; ++c) {
      if (logits(i, c) > logits(i, best)) best = c;  // strict: ties keep lower
    }
    out[i] = best;
  }
  return out;
}

std::pair<double, Vector> loss_and_grad(const ModelParams& params,
                                        const Matrix& x,
                                        const Eigen::VectorXi& y) {
  check_dims(params, x);
  if (x.rows() == 0) raise(Errc::EmptyInput, "empty batch");
  if (x.rows() != y.size()) {
    raise(Errc::DimensionMismatch, "feature/label row mismatch");
  }
  const ModelArch& a = params.arch;
  const Eigen::Index batch = x.rows();

  Matrix hidden;
  const Matrix logits = a.kind == ArchKind::Mlp1
                            ? forward_logits(params, x, &hidden)
                            : forward_logits(params, x);
  const Matrix probs = softmax_rows(logits);

  double loss = 0.0;
  Matrix residual = probs;  // probs - onehot(y), scaled by 1/batch below
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int label = y[i];
    if (label < 0 || label >= a.num_classes) {
      raise(Errc::DimensionMismatch, "label out of range");
    }
    loss -= std::log(std::max(probs(i, label), 1e-300));
    residual(i, label) -= 1.0;
  }
  loss /= static_cast<double>(batch);
  residual /= static_cast<double>(batch);

  Vector grad = Vector::Zero(params.values.size());
  Scalar* g = grad.data();
  if (a.kind == ArchKind::LogReg) {
    MatMap gw(g, a.num_classes, a.input_dim);
    VecMap gb(g + a.num_classes * a.input_dim, a.num_classes);
    gw = residual.transpose() * x;
    gb = residual.colwise().sum().transpose();
    return {loss, grad};
  }

  const Scalar* v = params.values.data();
  ConstMatMap w2(v + a.hidden * a.input_dim + a.hidden, a.num_classes,
                 a.hidden);
  MatMap gw1(g, a.hidden, a.input_dim);
  VecMap gb1(g + a.hidden * a.input_dim, a.hidden);
  MatMap gw2(g + a.hidden * a.input_dim + a.hidden, a.num_classes, a.hidden);
  VecMap gb2(g + a.hidden * a.input_dim + a.hidden + a.num_classes * a.hidden,
             a.num_classes);

  gw2 = residual.transpose() * hidden;
  gb2 = residual.colwise().sum().transpose();
  const Matrix dh =
      (residual * w2).array() * (1.0 - hidden.array().square());  // tanh'
  gw1 = dh.transpose() * x;
  gb1 = dh.colwise().sum().transpose();
  return {loss, grad};
}

std::pair<ModelParams, int> local_train(const ModelParams& params,
                                        const Dataset& data,
                                        std::span<const int> shard,
                                        const Hyperparams& hp,
                                        std::uint64_t seed) {
  if (shard.empty()) raise(Errc::EmptyShard, "user shard is empty");
  if (hp.local_epochs < 1 || hp.batch_size < 1 || hp.learning_rate < 0.0) {
    raise(Errc::InvalidSize, "invalid hyperparameters");
  }
  ModelParams p = params;
  Rng rng(derive_seed(seed, StreamTag::Train));
  const int m = static_cast<int>(shard.size());
  for (int epoch = 0; epoch < hp.local_epochs; ++epoch) {
    const std::vector<int> order = rng.permutation(m);
    for (int start = 0; start < m; start += hp.batch_size) {
      const int take = std::min(hp.batch_size, m - start);
      Matrix bx(take, data.d());
      Eigen::VectorXi by(take);
      for (int i = 0; i < take; ++i) {
        const int row = shard[static_cast<std::size_t>(order[start + i])];
        bx.row(i) = data.features.row(row);
        by[i] = data.labels[row];
      }
      const auto [loss, grad] = loss_and_grad(p, bx, by);
      (void)loss;
      p.values -= hp.learning_rate * grad;
    }
  }
  return {std::move(p), m};
}

std::pair<double, double> evaluate(const ModelParams& params,
                                   const Dataset& test) {
  check_dims(params, test.features);
  if (test.n() == 0) raise(Errc::EmptyInput, "empty test set");
  const Eigen::VectorXi pred = predict(params, test.features);
  double correct = 0.0;
  for (Eigen::Index i = 0; i < test.n(); ++i) {
    if (pred[i] == test.labels[i]) correct += 1.0;
  }
  const Matrix probs = predict_proba(params, test.features);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < test.n(); ++i) {
    loss -= std::log(std::max(probs(i, test.labels[i]), 1e-300));
  }
  return {correct / static_cast<double>(test.n()),
          loss / static_cast<double>(test.n())};
}

void save_params_csv(const ModelParams& params,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  out << "index,value\n";
  char buf[64];
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", params.values[i]);
    out << i << "," << buf << "\n";
  }
}

}  // namespace hfl
