#pragma once

#include <iostream>
#include <optional>

#include "mpacdc/blocks.hpp"
#include "mpacdc/clebsch_gordan.hpp"
#include "mpacdc/density_expansion.hpp"

namespace mpacdc {

struct CombineOptions {
  std::vector<int> lambda_keep;  // empty = all lambdas the cache can couple
  bool same_feature = false;     // A and B are the same set: deduplicate
  std::optional<int> final_lambda;  // restrict output lambda
  std::optional<int> final_sigma;   // restrict output sigma
  std::string out_tag = "cg";
};

namespace detail {

inline bool keep_lambda(const CombineOptions& opt, int lam) {
  if (opt.final_lambda && *opt.final_lambda != lam) return false;
  if (opt.lambda_keep.empty()) return true;
  return std::find(opt.lambda_keep.begin(), opt.lambda_keep.end(), lam) !=
         opt.lambda_keep.end();
}

inline std::vector<int> combined_prop(const std::vector<int>& qa,
                                      const std::vector<int>& qb, int l1, int l2) {
  std::vector<int> out;
  out.reserve(qa.size() + qb.size() + 2);
  out.insert(out.end(), qa.begin(), qa.end());
  out.insert(out.end(), qb.begin(), qb.end());
  out.push_back(l1);
  out.push_back(l2);
  return out;
}

}  // namespace detail

// Generalized CG iteration: couples every pair of blocks (l1 from A, l2
// from B) into all admissible lambda in the keep list,
//   out[s, mu, (qa,qb,l1,l2)] =
//       w * sum_{m1 m2} A[s,m1,qa] B[s,m2,qb] <l1 m1; l2 m2|lambda mu>,
// with parity sigma_out = sigma_A sigma_B (-1)^(l1+l2+lambda).
//
// With same_feature set, mirror products of one block set are deduplicated
// (block pairs with key_A <= key_B, properties qa <= qb within a block) and
// off-diagonal columns carry weight sqrt(2); the Euclidean metric of the
// full product is preserved. Identically-zero antisymmetric diagonals are
// dropped.
inline BlockMap cg_combine(const BlockMap& A, const BlockMap& B,
                           const CGCache& cache, const CombineOptions& opt) {
  BlockMap out;

  for (const auto& [ka, blka] : A) {
    for (const auto& [kb, blkb] : B) {
      if (opt.same_feature && kb < ka) continue;
      const bool same_block = opt.same_feature && ka == kb;
      if (!same_samples(blka, blkb))
        throw contract_error("cg_combine: blocks do not share a sample list");
      const int l1 = ka.lambda, l2 = kb.lambda;
      if (l1 > cache.l_max_built() || l2 > cache.l_max_built())
        throw contract_error("cg_combine: CG cache does not cover the inputs");

      for (int lam = std::abs(l1 - l2);
           lam <= std::min(l1 + l2, cache.l_max_built()); ++lam) {
        if (!detail::keep_lambda(opt, lam)) continue;
        const int sigma_out =
            ka.sigma * kb.sigma * (((l1 + l2 + lam) % 2) ? -1 : 1);
        if (opt.final_sigma && *opt.final_sigma != sigma_out) continue;

        // enumerate kept property pairs and their weights
        const int na = blka.n_props(), nb = blkb.n_props();
        std::vector<std::pair<int, int>> cols;
        std::vector<double> weights;
        const bool odd = ((l1 + l2 + lam) % 2) != 0;
        if (same_block) {
          for (int qa = 0; qa < na; ++qa)
            for (int qb = qa; qb < nb; ++qb) {
              if (qa == qb && odd) continue;  // antisymmetric diagonal is 0
              cols.emplace_back(qa, qb);
              weights.push_back(qa == qb ? 1.0 : M_SQRT2);
            }
        } else {
          const double w = opt.same_feature ? M_SQRT2 : 1.0;
          for (int qa = 0; qa < na; ++qa)
            for (int qb = 0; qb < nb; ++qb) {
              cols.emplace_back(qa, qb);
              weights.push_back(w);
            }
        }
        if (cols.empty()) continue;

        const BlockKey key{sigma_out, lam, opt.out_tag};
        auto it = out.find(key);
        if (it == out.end()) {
          EquivariantBlock fresh;
          fresh.key = key;
          fresh.samples = blka.samples;
          fresh.prop_schema =
              blka.prop_schema + "|" + blkb.prop_schema + "|l1,l2";
          fresh.values.resize(
              static_cast<long>(blka.samples.size()) * (2 * lam + 1), 0);
          it = out.emplace(key, std::move(fresh)).first;
        }
        EquivariantBlock& dst = it->second;
        const long col0 = dst.values.cols();
        dst.values.conservativeResize(Eigen::NoChange,
                                      col0 + static_cast<long>(cols.size()));
        dst.values.rightCols(static_cast<long>(cols.size())).setZero();
        for (const auto& [qa, qb] : cols)
          dst.props.push_back(
              detail::combined_prop(blka.props[qa], blkb.props[qb], l1, l2));

        const CGBlock& cg = cache.block(l1, l2, lam);
        const int ns = blka.n_samples();
        const int nm1 = 2 * l1 + 1, nm = 2 * lam + 1;

        if (!same_block && cols.size() == static_cast<std::size_t>(na) * nb) {
          // dense product: vectorize over qb segments
          const double w = weights[0];
          for (int s = 0; s < ns; ++s) {
            auto va = blka.values.middleRows(static_cast<long>(s) * nm1, nm1);
            auto vb = blkb.values.middleRows(static_cast<long>(s) * (2 * l2 + 1),
                                             2 * l2 + 1);
            auto vo = dst.values.middleRows(static_cast<long>(s) * nm, nm);
            for (const auto& nz : cg.nonzeros) {
              const auto brow = vb.row(nz.m2i);
              for (int qa = 0; qa < na; ++qa) {
                const double f = w * nz.c * va(nz.m1i, qa);
                if (f != 0.0)
                  vo.row(nz.mui).segment(col0 + static_cast<long>(qa) * nb, nb) +=
                      f * brow;
              }
            }
          }
        } else {
          for (int s = 0; s < ns; ++s) {
            auto va = blka.values.middleRows(static_cast<long>(s) * nm1, nm1);
            auto vb = blkb.values.middleRows(static_cast<long>(s) * (2 * l2 + 1),
                                             2 * l2 + 1);
            auto vo = dst.values.middleRows(static_cast<long>(s) * nm, nm);
            for (const auto& nz : cg.nonzeros)
              for (std::size_t c = 0; c < cols.size(); ++c)
                vo(nz.mui, col0 + static_cast<long>(c)) +=
                    weights[c] * nz.c * va(nz.m1i, cols[c].first) *
                    vb(nz.m2i, cols[c].second);
          }
        }
      }
    }
  }
  for (auto& [key, blk] : out) blk.check_shape();
  return out;
}

// SOAP power spectrum: plain sum over m of products of nu=1 coefficients,
//   p[s, (an, a'n', l)] = sum_m <an|rho[lm]> <a'n'|rho[lm]>,
// deduplicated to (a n) <= (a' n') with sqrt(2) off-diagonal weight.
inline BlockMap power_spectrum(const BlockMap& nu1, const std::string& tag = "nu=2") {
  BlockMap out;
  EquivariantBlock dst;
  dst.key = {1, 0, tag};
  dst.prop_schema = "a,n|a,n|l,l";
  bool first = true;
  for (const auto& [key, blk] : nu1) {
    const int l = key.lambda;
    if (first) {
      dst.samples = blk.samples;
      dst.values.resize(static_cast<long>(blk.samples.size()), 0);
      first = false;
    }
    const int np = blk.n_props();
    const long col0 = dst.values.cols();
    std::vector<std::pair<int, int>> cols;
    for (int qa = 0; qa < np; ++qa)
      for (int qb = qa; qb < np; ++qb) {
        cols.emplace_back(qa, qb);
        dst.props.push_back(detail::combined_prop(blk.props[qa], blk.props[qb], l, l));
      }
    dst.values.conservativeResize(Eigen::NoChange,
                                  col0 + static_cast<long>(cols.size()));
    for (int s = 0; s < blk.n_samples(); ++s) {
      auto v = blk.sample_view(s);
      for (std::size_t c = 0; c < cols.size(); ++c) {
        double acc = 0.0;
        for (int m = 0; m < 2 * l + 1; ++m)
          acc += v(m, cols[c].first) * v(m, cols[c].second);
        const double w = (cols[c].first == cols[c].second) ? 1.0 : M_SQRT2;
        dst.values(s, col0 + static_cast<long>(c)) = w * acc;
      }
    }
  }
  dst.check_shape();
  out.emplace(dst.key, std::move(dst));
  return out;
}

// nu=3 invariants: two chained CG iterations ending at lambda = 0; the
// property path records the intermediate k. Both inversion parities are
// emitted; scalar models consume the sigma=+1 block.
inline BlockMap bispectrum(const BlockMap& nu1, const CGCache& cache,
                           const std::vector<int>& lambda_keep_intermediate,
                           const std::string& tag = "nu=3") {
  CombineOptions step1;
  step1.lambda_keep = lambda_keep_intermediate;
  step1.same_feature = true;
  step1.out_tag = "nu=2";
  BlockMap nu2 = cg_combine(nu1, nu1, cache, step1);

  CombineOptions step2;
  step2.final_lambda = 0;
  step2.out_tag = tag;
  return cg_combine(nu2, nu1, cache, step2);
}

// 3-center, 0-neighbor invariant of a triplet (i, i1, i2):
//   <n n' l> = sum_m <nlm|r_{i1 i}> <n'lm|r_{i2 i}>,
// a pure function of the two distances and the enclosed angle. Samples are
// (structure, i, i1, i2) for each requested pair of pair indices sharing
// the center i.
inline EquivariantBlock three_center_invariant(
    const StructureContext& ctx, const RadialBasis& basis,
    const SphericalHarmonics& sh,
    const std::vector<std::pair<int, int>>& pair_pairs,
    const std::string& tag = "3center-nu=0") {
  const int n_max = basis.spec().n_max;
  const int l_max = sh.l_max();
  EquivariantBlock blk;
  blk.key = {1, 0, tag};
  blk.prop_schema = "n,n',l";
  for (int n = 0; n < n_max; ++n)
    for (int n2 = 0; n2 < n_max; ++n2)
      for (int l = 0; l <= l_max; ++l) blk.props.push_back({n, n2, l});
  blk.values = RowMat::Zero(static_cast<long>(pair_pairs.size()),
                            static_cast<long>(blk.props.size()));
  blk.samples.resize(pair_pairs.size());
  for (std::size_t k = 0; k < pair_pairs.size(); ++k) {
    const auto [p1, p2] = pair_pairs[k];
    const NeighborPair& a = ctx.pairs[p1];
    const NeighborPair& b = ctx.pairs[p2];
    if (a.center != b.center)
      throw contract_error("three_center_invariant: pairs must share the center");
    blk.samples[k] = {ctx.structure_id, a.center, a.neighbor, b.neighbor};
    long col = 0;
    for (int n = 0; n < n_max; ++n)
      for (int n2 = 0; n2 < n_max; ++n2)
        for (int l = 0; l <= l_max; ++l, ++col) {
          double acc = 0.0;
          for (int m = 0; m < 2 * l + 1; ++m)
            acc += ctx.ylm(p1, l * l + m) * ctx.ylm(p2, l * l + m);
          blk.values(static_cast<long>(k), col) =
              ctx.radial[l](p1, n) * ctx.radial[l](p2, n2) * acc;
        }
  }
  return blk;
}

// Unsupervised linear contraction of the property axis, fit per block by an
// uncentered SVD with the mu axis flattened into the samples (so the map
// commutes with rotations and the contracted block stays equivariant).
struct ContractionMap {
  BlockKey key;
  RowMat components;  // n_props x dim
  Eigen::VectorXd singular_values;
};

inline std::pair<EquivariantBlock, ContractionMap> pca_contract(
    const EquivariantBlock& block, int target_dim) {
  const long np = block.n_props();
  if (target_dim < 1 || target_dim > np)
    throw config_error("pca_contract: target_dim out of range");
  ContractionMap map;
  map.key = block.key;

  const double scale = block.values.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    std::cerr << "pca_contract: block '" << block.key.tag
              << "' is all-zero; using identity map\n";
    map.components = RowMat::Identity(np, target_dim);
    map.singular_values = Eigen::VectorXd::Zero(target_dim);
  } else {
    const long rows = block.values.rows();
    if (rows >= np) {
      Eigen::MatrixXd gram = block.values.transpose() * block.values;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
      map.components.resize(np, target_dim);
      map.singular_values.resize(target_dim);
      for (int k = 0; k < target_dim; ++k) {
        const long src = np - 1 - k;  // eigenvalues ascending
        map.components.col(k) = eig.eigenvectors().col(src);
        map.singular_values[k] = std::sqrt(std::max(0.0, eig.eigenvalues()[src]));
      }
    } else {
      Eigen::MatrixXd gram = block.values * block.values.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
      map.components.resize(np, target_dim);
      map.singular_values.resize(target_dim);
      for (int k = 0; k < target_dim; ++k) {
        const long src = rows - 1 - k;
        const double sv = std::sqrt(std::max(0.0, eig.eigenvalues()[src]));
        map.singular_values[k] = sv;
        if (sv > 1e-300)
          map.components.col(k) =
              block.values.transpose() * eig.eigenvectors().col(src) / sv;
        else
          map.components.col(k).setZero();
      }
    }
    // deterministic sign: largest-magnitude entry positive
    for (int k = 0; k < target_dim; ++k) {
      long imax = 0;
      map.components.col(k).cwiseAbs().maxCoeff(&imax);
      if (map.components(imax, k) < 0) map.components.col(k) *= -1.0;
    }
  }

  EquivariantBlock out;
  out.key = block.key;
  out.samples = block.samples;
  out.prop_schema = "pca";
  for (int k = 0; k < target_dim; ++k) out.props.push_back({k});
  out.values = block.values * map.components;
  return {std::move(out), std::move(map)};
}

inline EquivariantBlock apply_contraction(const EquivariantBlock& block,
                                          const ContractionMap& map) {
  if (!(block.key == map.key))
    throw contract_error("apply_contraction: block key mismatch");
  if (block.values.cols() != map.components.rows())
    throw contract_error("apply_contraction: property count mismatch");
  EquivariantBlock out;
  out.key = block.key;
  out.samples = block.samples;
  out.prop_schema = "pca";
  for (long k = 0; k < map.components.cols(); ++k)
    out.props.push_back({static_cast<int>(k)});
  out.values = block.values * map.components;
  return out;
}

// Scalar gate: multiply every component of an equivariant block by a
// function of invariants on the same samples. Preserves the (sigma, lambda)
// key because the gate depends only on lambda=0 inputs.
struct ScalarGate {
  enum class Kind { identity, tanh_linear };
  Kind kind = Kind::identity;
  RowMat weights;         // block props x invariant props
  Eigen::VectorXd bias;   // block props
};

inline EquivariantBlock scalar_gate(const EquivariantBlock& block,
                                    const EquivariantBlock& invariants,
                                    const ScalarGate& gate) {
  if (!same_samples(block, invariants))
    throw contract_error("scalar_gate: invariants do not share samples");
  if (invariants.key.lambda != 0)
    throw contract_error("scalar_gate: gate input must be lambda=0");
  EquivariantBlock out = block;
  if (gate.kind == ScalarGate::Kind::identity) return out;
  if (gate.weights.rows() != block.n_props() ||
      gate.weights.cols() != invariants.n_props())
    throw contract_error("scalar_gate: weight shape mismatch");
  const int nm = block.n_comps();
  for (int s = 0; s < block.n_samples(); ++s) {
    Eigen::VectorXd xi = invariants.values.row(s);
    Eigen::VectorXd f = (gate.weights * xi + gate.bias).array().tanh();
    for (int m = 0; m < nm; ++m)
      out.values.row(s * nm + m) =
          block.values.row(s * nm + m).cwiseProduct(f.transpose());
  }
  return out;
}

}  // namespace mpacdc
