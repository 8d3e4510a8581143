#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "mpacdc/errors.hpp"

namespace mpacdc {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// (sigma, lambda, tag) key of an equivariant block. sigma is the parity
// beyond (-1)^lambda: under inversion a block picks up sigma * (-1)^lambda.
struct BlockKey {
  int sigma = 1;
  int lambda = 0;
  std::string tag;

  bool operator<(const BlockKey& o) const {
    return std::tie(lambda, sigma, tag) < std::tie(o.lambda, o.sigma, o.tag);
  }
  bool operator==(const BlockKey& o) const {
    return lambda == o.lambda && sigma == o.sigma && tag == o.tag;
  }
};

// (structure, center [, neighbor [, second neighbor]]) row label;
// unused slots are -1.
struct Sample {
  int structure = 0;
  int center = -1;
  int neighbor = -1;
  int neighbor2 = -1;

  bool operator==(const Sample&) const = default;
  bool operator<(const Sample& o) const {
    return std::tie(structure, center, neighbor, neighbor2) <
           std::tie(o.structure, o.center, o.neighbor, o.neighbor2);
  }
};

// Dense equivariant feature block: values indexed by (sample, component mu,
// property q), stored as a row-major (n_samples * (2 lambda + 1)) x n_props
// matrix with the mu axis fastest in the row index.
struct EquivariantBlock {
  BlockKey key;
  std::vector<Sample> samples;
  std::vector<std::vector<int>> props;  // property multi-indices
  std::string prop_schema;              // documents the int layout of props
  RowMat values;

  int n_samples() const { return static_cast<int>(samples.size()); }
  int n_comps() const { return 2 * key.lambda + 1; }
  int n_props() const { return static_cast<int>(props.size()); }

  auto sample_view(int s) { return values.middleRows(s * n_comps(), n_comps()); }
  auto sample_view(int s) const {
    return values.middleRows(s * n_comps(), n_comps());
  }

  double at(int s, int mu_index, int q) const {
    return values(s * n_comps() + mu_index, q);
  }

  void check_shape() const {
    if (values.rows() != static_cast<long>(samples.size()) * n_comps() ||
        values.cols() != static_cast<long>(props.size()))
      throw contract_error("block value tensor does not match its index lists");
  }
};

using BlockMap = std::map<BlockKey, EquivariantBlock>;

inline bool same_samples(const EquivariantBlock& a, const EquivariantBlock& b) {
  return a.samples == b.samples;
}

// lambda=0 scalar block of ones: the empty tensor-product decoration
inline EquivariantBlock unit_block(const std::vector<Sample>& samples,
                                   const std::string& tag = "nu=0") {
  EquivariantBlock b;
  b.key = {1, 0, tag};
  b.samples = samples;
  b.props = {{}};
  b.prop_schema = "";
  b.values = RowMat::Ones(static_cast<long>(samples.size()), 1);
  return b;
}

inline BlockMap unit_blocks(const std::vector<Sample>& samples,
                            const std::string& tag = "nu=0") {
  BlockMap m;
  EquivariantBlock b = unit_block(samples, tag);
  m.emplace(b.key, std::move(b));
  return m;
}

// concatenate per-structure block maps sample-wise (same keys and props)
inline BlockMap concat_blocks(const std::vector<BlockMap>& parts) {
  BlockMap out;
  for (const auto& part : parts)
    for (const auto& [key, blk] : part) {
      auto it = out.find(key);
      if (it == out.end()) {
        out.emplace(key, blk);
        continue;
      }
      EquivariantBlock& dst = it->second;
      if (dst.props != blk.props)
        throw contract_error("concat_blocks: property mismatch for tag " + key.tag);
      const long r0 = dst.values.rows();
      dst.values.conservativeResize(r0 + blk.values.rows(), Eigen::NoChange);
      dst.values.bottomRows(blk.values.rows()) = blk.values;
      dst.samples.insert(dst.samples.end(), blk.samples.begin(), blk.samples.end());
    }
  return out;
}

// retain only blocks passing a (lambda, sigma) filter
inline BlockMap filter_blocks(const BlockMap& in, int lambda, int sigma) {
  BlockMap out;
  for (const auto& [key, blk] : in)
    if (key.lambda == lambda && key.sigma == sigma) out.emplace(key, blk);
  return out;
}

inline void set_tag(BlockMap& m, const std::string& tag) {
  BlockMap out;
  for (auto& [key, blk] : m) {
    BlockKey k = key;
    k.tag = tag;
    blk.key = k;
    out.emplace(k, std::move(blk));
  }
  m = std::move(out);
}

}  // namespace mpacdc
