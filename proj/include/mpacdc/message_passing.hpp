#pragma once

#include "mpacdc/cg_engine.hpp"

namespace mpacdc {

enum class PairEnd { center, neighbor };

// Gather center-sample blocks onto pair samples: row (structure, i, i1)
// copies the row of atom i (PairEnd::center) or atom i1 (PairEnd::neighbor).
inline BlockMap broadcast_to_pairs(const BlockMap& center_blocks,
                                   const StructureContext& ctx,
                                   const std::vector<int>& pair_indices,
                                   PairEnd end) {
  // center atom id -> row in the center block sample list
  std::vector<int> row_of_atom(ctx.structure->size(), -1);

  BlockMap out;
  for (const auto& [key, blk] : center_blocks) {
    std::fill(row_of_atom.begin(), row_of_atom.end(), -1);
    for (int s = 0; s < blk.n_samples(); ++s) {
      const Sample& smp = blk.samples[s];
      if (smp.neighbor != -1 || smp.structure != ctx.structure_id)
        throw contract_error("broadcast_to_pairs: input is not a center block");
      row_of_atom[smp.center] = s;
    }
    EquivariantBlock nb;
    nb.key = key;
    nb.props = blk.props;
    nb.prop_schema = blk.prop_schema;
    nb.samples.resize(pair_indices.size());
    const int nm = blk.n_comps();
    nb.values = RowMat::Zero(static_cast<long>(pair_indices.size()) * nm,
                             blk.values.cols());
    for (std::size_t k = 0; k < pair_indices.size(); ++k) {
      const NeighborPair& pr = ctx.pairs[pair_indices[k]];
      nb.samples[k] = {ctx.structure_id, pr.center, pr.neighbor, -1};
      const int atom = (end == PairEnd::center) ? pr.center : pr.neighbor;
      const int src = row_of_atom[atom];
      if (src < 0)
        throw contract_error("broadcast_to_pairs: atom missing from center block");
      nb.values.middleRows(static_cast<long>(k) * nm, nm) =
          blk.values.middleRows(static_cast<long>(src) * nm, nm);
    }
    out.emplace(key, std::move(nb));
  }
  return out;
}

// Sum pair-sample rows onto their centers (deterministic: ascending neighbor
// order within each center). Centers without pairs yield zero rows.
inline BlockMap scatter_sum_to_centers(const BlockMap& pair_blocks,
                                       const StructureContext& ctx,
                                       const std::vector<int>& centers,
                                       const std::string& tag) {
  std::vector<int> slot_of_center(ctx.structure->size(), -1);
  for (std::size_t c = 0; c < centers.size(); ++c)
    slot_of_center[centers[c]] = static_cast<int>(c);

  BlockMap out;
  for (const auto& [key, blk] : pair_blocks) {
    EquivariantBlock nb;
    nb.key = {key.sigma, key.lambda, tag};
    nb.props = blk.props;
    nb.prop_schema = blk.prop_schema;
    nb.samples.resize(centers.size());
    for (std::size_t c = 0; c < centers.size(); ++c)
      nb.samples[c] = {ctx.structure_id, centers[c], -1, -1};
    const int nm = blk.n_comps();
    nb.values = RowMat::Zero(static_cast<long>(centers.size()) * nm,
                             blk.values.cols());
    for (int s = 0; s < blk.n_samples(); ++s) {
      const int slot = slot_of_center[blk.samples[s].center];
      if (slot < 0) continue;
      nb.values.middleRows(static_cast<long>(slot) * nm, nm) +=
          blk.values.middleRows(static_cast<long>(s) * nm, nm);
    }
    out.emplace(nb.key, std::move(nb));
  }
  return out;
}

inline BlockMap blocks_subtract(const BlockMap& a, const BlockMap& b) {
  if (a.size() != b.size())
    throw contract_error("blocks_subtract: key sets differ");
  BlockMap out;
  for (const auto& [key, blka] : a) {
    auto it = b.find(key);
    if (it == b.end() || blka.props != it->second.props ||
        !same_samples(blka, it->second))
      throw contract_error("blocks_subtract: block mismatch for tag " + key.tag);
    EquivariantBlock nb = blka;
    nb.values -= it->second.values;
    out.emplace(key, std::move(nb));
  }
  return out;
}

struct MpOptions {
  std::vector<int> lambda_keep;      // intermediate keeps for both couplings
  std::optional<int> final_lambda;   // filter applied at the last coupling
  std::optional<int> final_sigma;
  std::string out_tag = "mp";
};

// Decorated pair features |rho_i^v> x |rho_i1^v1> x |r_i1i> over pair
// samples: broadcast both center decorations onto the pairs, couple them,
// then couple with the pair-vector expansion. i_dec and i1_dec are
// center-sample block sets covering every atom of the structure. The
// coupling tree is fixed as ((i, i1), pair) for all MP compositions.
inline BlockMap decorated_pair_blocks(const StructureContext& ctx,
                                      const RadialBasis& basis,
                                      const SphericalHarmonics& sh,
                                      const CGCache& cache, const BlockMap& i_dec,
                                      const BlockMap& i1_dec,
                                      const std::vector<int>& pair_indices,
                                      const MpOptions& opt) {
  BlockMap left = broadcast_to_pairs(i_dec, ctx, pair_indices, PairEnd::center);
  BlockMap right = broadcast_to_pairs(i1_dec, ctx, pair_indices, PairEnd::neighbor);

  CombineOptions inner;
  inner.lambda_keep = opt.lambda_keep;
  inner.out_tag = opt.out_tag;
  BlockMap dec = cg_combine(left, right, cache, inner);

  BlockMap pair_exp = expand_pair(ctx, basis, sh, pair_indices, opt.out_tag);

  CombineOptions outer;
  outer.lambda_keep = opt.lambda_keep;
  outer.final_lambda = opt.final_lambda;
  outer.final_sigma = opt.final_sigma;
  outer.out_tag = opt.out_tag;
  return cg_combine(dec, pair_exp, cache, outer);
}

// MP contraction onto centers: sum the decorated pair features over the
// pair index, per center.
inline BlockMap mp_contract_blocks(const StructureContext& ctx,
                                   const RadialBasis& basis,
                                   const SphericalHarmonics& sh,
                                   const CGCache& cache, const BlockMap& i_dec,
                                   const BlockMap& i1_dec,
                                   const std::vector<int>& centers,
                                   const MpOptions& opt) {
  BlockMap dec = decorated_pair_blocks(ctx, basis, sh, cache, i_dec, i1_dec,
                                       all_pairs(ctx), opt);
  return scatter_sum_to_centers(dec, ctx, centers, opt.out_tag);
}

// Edge features over pair samples (structure, i, i1): the sum over the
// third center i2 in A_i, i2 != i1, of the 3-center decorated features.
// The i2 sum is taken once per center and the i2 = i1 term is subtracted
// before the final coupling (both sides transform identically, so the
// subtraction commutes with the CG step).
inline BlockMap mp_edge_blocks(const StructureContext& ctx,
                               const RadialBasis& basis,
                               const SphericalHarmonics& sh, const CGCache& cache,
                               const BlockMap& i_dec, const BlockMap& i1_dec,
                               const BlockMap& i2_dec, const MpOptions& opt) {
  const std::vector<int> pair_indices = all_pairs(ctx);

  MpOptions inner;
  inner.lambda_keep = opt.lambda_keep;
  inner.out_tag = opt.out_tag + ".pair";
  BlockMap dec_pair = decorated_pair_blocks(ctx, basis, sh, cache, i_dec, i1_dec,
                                            pair_indices, inner);

  // sum over i2 of |rho_i2^v2> x |r_i2 i>, per center, then per pair
  std::vector<int> everyone(ctx.structure->size());
  for (int i = 0; i < ctx.structure->size(); ++i) everyone[i] = i;
  std::vector<Sample> center_samples(everyone.size());
  for (std::size_t c = 0; c < everyone.size(); ++c)
    center_samples[c] = {ctx.structure_id, everyone[c], -1, -1};

  MpOptions third;
  third.lambda_keep = opt.lambda_keep;
  third.out_tag = opt.out_tag + ".i2";
  BlockMap third_pair = decorated_pair_blocks(
      ctx, basis, sh, cache, unit_blocks(center_samples), i2_dec, pair_indices,
      third);
  BlockMap third_sum = scatter_sum_to_centers(third_pair, ctx, everyone,
                                              opt.out_tag + ".i2");
  BlockMap third_bcast =
      broadcast_to_pairs(third_sum, ctx, pair_indices, PairEnd::center);
  // align tags for subtraction
  set_tag(third_bcast, opt.out_tag + ".i2");
  set_tag(third_pair, opt.out_tag + ".i2");
  BlockMap without_self = blocks_subtract(third_bcast, third_pair);

  CombineOptions outer;
  outer.lambda_keep = opt.lambda_keep;
  outer.final_lambda = opt.final_lambda;
  outer.final_sigma = opt.final_sigma;
  outer.out_tag = opt.out_tag;
  return cg_combine(dec_pair, without_self, cache, outer);
}

}  // namespace mpacdc
