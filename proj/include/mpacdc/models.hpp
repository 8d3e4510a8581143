#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <iostream>

#include "mpacdc/blocks.hpp"
#include "mpacdc/rng.hpp"
#include "mpacdc/structure.hpp"

namespace mpacdc {

// one weight segment of a linear model: (center species, block key) ->
// columns [offset, offset+count)
struct ColumnGroup {
  int species_code;
  BlockKey key;          // tag "composition" for the per-species count column
  long offset = 0;
  long count = 0;
};

enum class TargetKind { scalar_extensive, vector };

struct RidgeModel {
  TargetKind kind = TargetKind::scalar_extensive;
  double reg = 0.0;
  std::vector<ColumnGroup> groups;
  Eigen::VectorXd weights;  // unscaled: prediction = X * weights
  std::string feature_string;
  std::string fingerprint;  // of the feature spec used to build X
};

namespace detail {

// ridge solve of (X^T X / n + reg I) w = X^T y / n with per-column RMS
// scaling; at reg = 0 a singular system falls back to the pseudo-inverse.
inline Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& x,
                                   const Eigen::MatrixXd& y, double reg,
                                   Eigen::VectorXd* scale_out = nullptr) {
  const long n = x.rows(), p = x.cols();
  Eigen::VectorXd scale(p);
  for (long j = 0; j < p; ++j) {
    const double rms = std::sqrt(x.col(j).squaredNorm() / std::max<long>(n, 1));
    scale[j] = (rms > 0) ? rms : 1.0;
  }
  if (scale_out) *scale_out = scale;
  Eigen::MatrixXd xs = x * scale.cwiseInverse().asDiagonal();
  Eigen::MatrixXd gram = (xs.transpose() * xs) / static_cast<double>(n);
  gram.diagonal().array() += reg;
  Eigen::MatrixXd rhs = (xs.transpose() * y) / static_cast<double>(n);

  Eigen::MatrixXd w;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (reg > 0.0 && llt.info() == Eigen::Success) {
    w = llt.solve(rhs);
  } else {
    if (reg <= 0.0)
      std::cerr << "ridge: singular system at reg=0, using pseudo-inverse\n";
    w = gram.completeOrthogonalDecomposition().solve(rhs);
  }
  return scale.cwiseInverse().asDiagonal() * w;
}

}  // namespace detail

// Design-matrix assembly for extensive scalar targets: one row per
// structure, one column group per (center species, lambda=0 sigma=+1
// block), each group summing the block rows of that structure's centers of
// that species. Optional per-species atom-count columns.
class InvariantDesign {
 public:
  InvariantDesign(const BlockMap& blocks_template,
                  const std::vector<int>& center_codes, bool composition)
      : center_codes_(center_codes), composition_(composition) {
    long off = 0;
    for (const auto& [key, blk] : blocks_template) {
      if (key.lambda != 0 || key.sigma != 1) continue;
      for (int code : center_codes_) {
        groups_.push_back({code, key, off, blk.n_props()});
        off += blk.n_props();
      }
    }
    if (groups_.empty())
      throw contract_error("invariant design: no lambda=0 sigma=+1 blocks");
    if (composition_)
      for (int code : center_codes_) {
        groups_.push_back({code, BlockKey{1, 0, "composition"}, off, 1});
        ++off;
      }
    cols_ = off;
  }

  long cols() const { return cols_; }
  const std::vector<ColumnGroup>& groups() const { return groups_; }

  // accumulate the rows of per-structure blocks into design rows
  // (row index = sample.structure - structure_offset)
  void accumulate(Eigen::Ref<Eigen::MatrixXd> x, const BlockMap& blocks,
                  const std::vector<const Structure*>& structures,
                  int structure_offset = 0) const {
    for (const auto& g : groups_) {
      if (g.key.tag == "composition") {
        for (std::size_t s = 0; s < structures.size(); ++s)
          for (int sp : structures[s]->species)
            if (sp == g.species_code) x(static_cast<long>(s), g.offset) += 1.0;
        continue;
      }
      auto it = blocks.find(g.key);
      if (it == blocks.end())
        throw contract_error("invariant design: missing block " + g.key.tag);
      const EquivariantBlock& blk = it->second;
      if (blk.n_props() != g.count)
        throw contract_error("invariant design: property count changed");
      for (int s = 0; s < blk.n_samples(); ++s) {
        const Sample& smp = blk.samples[s];
        const long row = smp.structure - structure_offset;
        const Structure& st = *structures.at(row);
        if (st.species[smp.center] != g.species_code) continue;
        x.block(row, g.offset, 1, g.count) += blk.values.row(s);
      }
    }
  }

  Eigen::MatrixXd build(const BlockMap& blocks,
                        const std::vector<const Structure*>& structures) const {
    Eigen::MatrixXd x =
        Eigen::MatrixXd::Zero(static_cast<long>(structures.size()), cols_);
    accumulate(x, blocks, structures);
    return x;
  }

 private:
  std::vector<int> center_codes_;
  bool composition_;
  std::vector<ColumnGroup> groups_;
  long cols_ = 0;
};

// Vector (lambda=1) design: three rows per structure, Cartesian order
// (x, y, z), mapped from the real-harmonic components (m=-1,0,1)=(y,z,x).
// No composition columns: a constant offset would not be equivariant.
class VectorDesign {
 public:
  VectorDesign(const BlockMap& blocks_template,
               const std::vector<int>& center_codes)
      : center_codes_(center_codes) {
    long off = 0;
    for (const auto& [key, blk] : blocks_template) {
      if (key.lambda != 1 || key.sigma != 1) continue;
      for (int code : center_codes_) {
        groups_.push_back({code, key, off, blk.n_props()});
        off += blk.n_props();
      }
    }
    if (groups_.empty())
      throw contract_error("vector design: no lambda=1 sigma=+1 blocks");
    cols_ = off;
  }

  long cols() const { return cols_; }
  const std::vector<ColumnGroup>& groups() const { return groups_; }

  void accumulate(Eigen::Ref<Eigen::MatrixXd> x, const BlockMap& blocks,
                  const std::vector<const Structure*>& structures,
                  int structure_offset = 0) const {
    // Cartesian row order (x,y,z) <- component indices (2,0,1)
    static constexpr int mu_of_cart[3] = {2, 0, 1};
    for (const auto& g : groups_) {
      auto it = blocks.find(g.key);
      if (it == blocks.end())
        throw contract_error("vector design: missing block " + g.key.tag);
      const EquivariantBlock& blk = it->second;
      for (int s = 0; s < blk.n_samples(); ++s) {
        const Sample& smp = blk.samples[s];
        const long row3 = 3 * (smp.structure - structure_offset);
        const Structure& st = *structures.at(smp.structure - structure_offset);
        if (st.species[smp.center] != g.species_code) continue;
        for (int c = 0; c < 3; ++c)
          x.block(row3 + c, g.offset, 1, g.count) +=
              blk.values.row(s * 3 + mu_of_cart[c]);
      }
    }
  }

  Eigen::MatrixXd build(const BlockMap& blocks,
                        const std::vector<const Structure*>& structures) const {
    Eigen::MatrixXd x =
        Eigen::MatrixXd::Zero(3 * static_cast<long>(structures.size()), cols_);
    accumulate(x, blocks, structures);
    return x;
  }

 private:
  std::vector<int> center_codes_;
  std::vector<ColumnGroup> groups_;
  long cols_ = 0;
};

// per-center invariant feature matrix: one row per center sample, columns
// concatenated over the lambda=0 sigma=+1 blocks (GFRE input)
inline Eigen::MatrixXd invariant_center_matrix(const BlockMap& blocks) {
  long cols = 0;
  long rows = -1;
  for (const auto& [key, blk] : blocks) {
    if (key.lambda != 0 || key.sigma != 1) continue;
    cols += blk.n_props();
    if (rows < 0)
      rows = blk.n_samples();
    else if (rows != blk.n_samples())
      throw contract_error("invariant_center_matrix: blocks disagree on samples");
  }
  if (rows < 0)
    throw contract_error("invariant_center_matrix: no lambda=0 sigma=+1 blocks");
  Eigen::MatrixXd x(rows, cols);
  long off = 0;
  for (const auto& [key, blk] : blocks) {
    if (key.lambda != 0 || key.sigma != 1) continue;
    x.middleCols(off, blk.n_props()) = blk.values;
    off += blk.n_props();
  }
  return x;
}

inline RidgeModel fit_invariant(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                double reg, const std::vector<ColumnGroup>& groups) {
  if (x.rows() < 2) throw input_error("fit_invariant: need at least 2 structures");
  RidgeModel m;
  m.kind = TargetKind::scalar_extensive;
  m.reg = reg;
  m.groups = groups;
  m.weights = detail::ridge_solve(x, y, reg);
  return m;
}

inline RidgeModel fit_equivariant_vector(const Eigen::MatrixXd& x,
                                         const Eigen::VectorXd& y_stacked,
                                         double reg,
                                         const std::vector<ColumnGroup>& groups) {
  if (x.rows() < 6) throw input_error("fit_equivariant_vector: need >= 2 structures");
  RidgeModel m;
  m.kind = TargetKind::vector;
  m.reg = reg;
  m.groups = groups;
  m.weights = detail::ridge_solve(x, y_stacked, reg);
  return m;
}

inline Eigen::VectorXd predict(const RidgeModel& m, const Eigen::MatrixXd& x) {
  return x * m.weights;
}

inline double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

// Global feature-space reconstruction error: the normalized test residual
// of the best ridge map from X to X'. Both sides are column-standardized
// with the train-split statistics, so gfre(X, X) -> 0 and unpredictable
// targets give values near 1. Asymmetric by construction.
inline double gfre(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xp,
                   const std::vector<int>& train, const std::vector<int>& test,
                   double reg) {
  if (train.empty() || test.empty()) throw input_error("gfre: empty split");
  if (x.rows() != xp.rows()) throw contract_error("gfre: row mismatch");

  auto standardize = [&](const Eigen::MatrixXd& m) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(m.cols());
    for (int i : train) mean += m.row(i);
    mean /= static_cast<double>(train.size());
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(m.cols());
    for (int i : train) var += (m.row(i) - mean).cwiseAbs2();
    var /= static_cast<double>(train.size());
    Eigen::RowVectorXd std =
        var.cwiseSqrt().cwiseMax(Eigen::RowVectorXd::Constant(m.cols(), 1e-300));
    // columns that never vary carry no information; scale 1 keeps them finite
    for (long j = 0; j < m.cols(); ++j)
      if (var[j] < 1e-28) std[j] = 1.0;
    return std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd>(mean, std);
  };

  const auto [mx, sx] = standardize(x);
  const auto [mp, sp] = standardize(xp);

  auto rows = [&](const Eigen::MatrixXd& m, const std::vector<int>& idx,
                  const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& std) {
    Eigen::MatrixXd out(static_cast<long>(idx.size()), m.cols());
    for (std::size_t k = 0; k < idx.size(); ++k)
      out.row(static_cast<long>(k)) =
          (m.row(idx[k]) - mean).cwiseQuotient(std);
    return out;
  };

  Eigen::MatrixXd xtr = rows(x, train, mx, sx), xte = rows(x, test, mx, sx);
  Eigen::MatrixXd ptr = rows(xp, train, mp, sp), pte = rows(xp, test, mp, sp);

  Eigen::MatrixXd w = detail::ridge_solve(xtr, ptr, reg);
  const double num = (pte - xte * w).squaredNorm();
  const double den = pte.squaredNorm();
  if (den == 0.0) return 0.0;
  return std::sqrt(num / den);
}

struct LearningCurvePoint {
  int n_train = 0;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double best_reg_median = 0.0;
};

// Validation learning curve on an assembled design matrix: per train size,
// the regularizer is picked on an inner 20% holdout of the training rows,
// the model is refit on the full training slice, and the mean/std of the
// validation RMSE over n_splits random splits is reported.
inline std::vector<LearningCurvePoint> learning_curve(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
    const std::vector<int>& train_sizes, const std::vector<double>& reg_grid,
    int n_splits, int val_size, std::uint64_t seed) {
  const int n = static_cast<int>(x.rows());
  for (std::size_t k = 1; k < train_sizes.size(); ++k)
    if (train_sizes[k] <= train_sizes[k - 1])
      throw input_error("learning_curve: train_sizes must be strictly increasing");
  if (!train_sizes.empty() && train_sizes.back() > n - val_size)
    throw input_error("learning_curve: largest size exceeds dataset - val size");
  if (reg_grid.empty()) throw input_error("learning_curve: empty reg grid");

  std::vector<std::vector<double>> rmses(train_sizes.size());
  std::vector<std::vector<double>> regs(train_sizes.size());

  for (int split = 0; split < n_splits; ++split) {
    Rng rng(seed);
    Rng sub = rng.fork(split);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    sub.shuffle(perm);
    const std::vector<int> val(perm.begin(), perm.begin() + val_size);
    const std::vector<int> pool(perm.begin() + val_size, perm.end());

    auto take = [&](const std::vector<int>& idx, const std::vector<int>& which) {
      Eigen::MatrixXd xs(static_cast<long>(which.size()), x.cols());
      Eigen::VectorXd ys(static_cast<long>(which.size()));
      for (std::size_t k = 0; k < which.size(); ++k) {
        xs.row(static_cast<long>(k)) = x.row(idx[which[k]]);
        ys[static_cast<long>(k)] = y[idx[which[k]]];
      }
      return std::pair<Eigen::MatrixXd, Eigen::VectorXd>(std::move(xs),
                                                         std::move(ys));
    };

    for (std::size_t si = 0; si < train_sizes.size(); ++si) {
      const int nt = train_sizes[si];
      std::vector<int> tr(nt);
      for (int i = 0; i < nt; ++i) tr[i] = i;
      const int n_inner = std::max(1, nt / 5);
      std::vector<int> fit_part(tr.begin(), tr.end() - n_inner);
      std::vector<int> inner_val(tr.end() - n_inner, tr.end());
      if (fit_part.empty()) fit_part = tr;

      auto [xf, yf] = take(pool, fit_part);
      auto [xi, yi] = take(pool, inner_val);
      double best_reg = reg_grid.front(), best = 1e300;
      for (double reg : reg_grid) {
        Eigen::VectorXd w = detail::ridge_solve(xf, yf, reg);
        const double e = rmse(xi * w, yi);
        if (e < best) {
          best = e;
          best_reg = reg;
        }
      }
      auto [xt, yt] = take(pool, tr);
      Eigen::VectorXd w = detail::ridge_solve(xt, yt, best_reg);
      auto [xv, yv] = take(val, [&] {
        std::vector<int> all(val.size());
        for (std::size_t i = 0; i < val.size(); ++i) all[i] = static_cast<int>(i);
        return all;
      }());
      rmses[si].push_back(rmse(xv * w, yv));
      regs[si].push_back(best_reg);
    }
  }

  std::vector<LearningCurvePoint> out;
  for (std::size_t si = 0; si < train_sizes.size(); ++si) {
    LearningCurvePoint p;
    p.n_train = train_sizes[si];
    double mean = 0.0;
    for (double v : rmses[si]) mean += v;
    mean /= rmses[si].size();
    double var = 0.0;
    for (double v : rmses[si]) var += (v - mean) * (v - mean);
    p.rmse_mean = mean;
    p.rmse_std = std::sqrt(var / rmses[si].size());
    std::vector<double> r = regs[si];
    std::sort(r.begin(), r.end());
    p.best_reg_median = r[r.size() / 2];
    out.push_back(p);
  }
  return out;
}

}  // namespace mpacdc
