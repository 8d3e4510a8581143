#pragma once

#include <algorithm>
#include <vector>

#include "mpacdc/blocks.hpp"
#include "mpacdc/neighbor_list.hpp"
#include "mpacdc/radial_basis.hpp"
#include "mpacdc/spherical_harmonics.hpp"
#include "mpacdc/structure.hpp"

namespace mpacdc {

// Per-structure evaluation context: the neighbor list plus cutoff-weighted
// radial values and spherical harmonics for every pair, shared by all
// expansion and message-passing stages.
struct StructureContext {
  int structure_id = 0;
  const Structure* structure = nullptr;
  std::vector<NeighborPair> pairs;
  std::vector<std::vector<int>> by_center;  // pair indices grouped by center
  std::vector<RowMat> radial;               // per l: n_pairs x n_max, cutoff folded in
  RowMat ylm;                               // n_pairs x (l_max+1)^2
  std::vector<int> channel_of_species;      // species code -> channel, -1 = dropped
  int n_channels = 0;

  int channel(int pair_index) const {
    return channel_of_species[structure->species[pairs[pair_index].neighbor]];
  }
};

inline StructureContext make_context(const Structure& s, int structure_id,
                                     const RadialBasis& basis,
                                     const SphericalHarmonics& sh,
                                     const std::vector<int>& neighbor_species,
                                     bool smeared = false) {
  StructureContext ctx;
  ctx.structure_id = structure_id;
  ctx.structure = &s;
  ctx.pairs = build_neighbor_list(s, basis.spec().r_cut);
  ctx.by_center = pairs_by_center(ctx.pairs, s.size());

  int max_species = -1;
  for (int sp : s.species) max_species = std::max(max_species, sp);
  for (int sp : neighbor_species) max_species = std::max(max_species, sp);
  ctx.channel_of_species.assign(max_species + 1, -1);
  for (std::size_t c = 0; c < neighbor_species.size(); ++c)
    ctx.channel_of_species[neighbor_species[c]] = static_cast<int>(c);
  ctx.n_channels = static_cast<int>(neighbor_species.size());

  const int l_max = sh.l_max();
  const int n_max = basis.spec().n_max;
  const int np = static_cast<int>(ctx.pairs.size());
  ctx.radial.assign(l_max + 1, RowMat::Zero(np, n_max));
  ctx.ylm.resize(np, sh.size());
  for (int p = 0; p < np; ++p) {
    const NeighborPair& pr = ctx.pairs[p];
    const double fc =
        cutoff_value(pr.distance, basis.spec().r_cut, basis.spec().cutoff_width);
    for (int l = 0; l <= l_max; ++l) {
      const std::vector<double> rv = smeared
                                         ? basis.evaluate_smeared(l, pr.distance)
                                         : basis.evaluate(l, pr.distance);
      for (int n = 0; n < n_max; ++n) ctx.radial[l](p, n) = fc * rv[n];
    }
    const std::vector<double> y = sh.evaluate_unchecked(pr.vector / pr.distance);
    for (int k = 0; k < sh.size(); ++k) ctx.ylm(p, k) = y[k];
  }
  return ctx;
}

namespace detail {

inline std::vector<std::vector<int>> density_props(int n_channels, int n_max) {
  std::vector<std::vector<int>> props;
  props.reserve(static_cast<std::size_t>(n_channels) * n_max);
  for (int a = 0; a < n_channels; ++a)
    for (int n = 0; n < n_max; ++n) props.push_back({a, n});
  return props;
}

}  // namespace detail

// nu=1 species-resolved neighbor-density expansion: one block per l with
// key (sigma=+1, lambda=l), properties (a, n), and
//   value[i, m, (a,n)] = sum_{j in A_i, species(j)=a} fc(r) R_nl(r) Y_lm(rhat).
// Centers with no neighbors yield all-zero rows.
inline BlockMap expand_density(const StructureContext& ctx, const RadialBasis& basis,
                               const SphericalHarmonics& sh,
                               const std::vector<int>& centers,
                               const std::string& tag = "nu=1") {
  const int l_max = sh.l_max();
  const int n_max = basis.spec().n_max;
  const int nc = static_cast<int>(centers.size());

  std::vector<Sample> samples(nc);
  for (int c = 0; c < nc; ++c) samples[c] = {ctx.structure_id, centers[c], -1, -1};

  BlockMap out;
  for (int l = 0; l <= l_max; ++l) {
    EquivariantBlock blk;
    blk.key = {1, l, tag};
    blk.samples = samples;
    blk.props = detail::density_props(ctx.n_channels, n_max);
    blk.prop_schema = "a,n";
    blk.values = RowMat::Zero(static_cast<long>(nc) * (2 * l + 1),
                              static_cast<long>(blk.props.size()));
    for (int c = 0; c < nc; ++c) {
      auto view = blk.sample_view(c);
      for (int p : ctx.by_center[centers[c]]) {
        const int a = ctx.channel(p);
        if (a < 0) continue;
        for (int m = 0; m < 2 * l + 1; ++m) {
          const double y = ctx.ylm(p, l * l + m);
          for (int n = 0; n < n_max; ++n)
            view(m, a * n_max + n) += y * ctx.radial[l](p, n);
        }
      }
    }
    out.emplace(blk.key, std::move(blk));
  }
  return out;
}

// Single-pair expansion of r_{i1 i} on the same radial x harmonic basis,
// over pair samples (structure, i, i1). The species channel of the pair
// carries species(i1); summing rows over i1 reproduces expand_density.
inline BlockMap expand_pair(const StructureContext& ctx, const RadialBasis& basis,
                            const SphericalHarmonics& sh,
                            const std::vector<int>& pair_indices,
                            const std::string& tag = "pair-nu=(0,0)") {
  const int l_max = sh.l_max();
  const int n_max = basis.spec().n_max;
  const int np = static_cast<int>(pair_indices.size());

  std::vector<Sample> samples(np);
  for (int k = 0; k < np; ++k) {
    const NeighborPair& pr = ctx.pairs[pair_indices[k]];
    samples[k] = {ctx.structure_id, pr.center, pr.neighbor, -1};
  }

  BlockMap out;
  for (int l = 0; l <= l_max; ++l) {
    EquivariantBlock blk;
    blk.key = {1, l, tag};
    blk.samples = samples;
    blk.props = detail::density_props(ctx.n_channels, n_max);
    blk.prop_schema = "a,n";
    blk.values = RowMat::Zero(static_cast<long>(np) * (2 * l + 1),
                              static_cast<long>(blk.props.size()));
    for (int k = 0; k < np; ++k) {
      const int p = pair_indices[k];
      const int a = ctx.channel(p);
      if (a < 0) continue;
      auto view = blk.sample_view(k);
      for (int m = 0; m < 2 * l + 1; ++m) {
        const double y = ctx.ylm(p, l * l + m);
        for (int n = 0; n < n_max; ++n)
          view(m, a * n_max + n) = y * ctx.radial[l](p, n);
      }
    }
    out.emplace(blk.key, std::move(blk));
  }
  return out;
}

inline std::vector<int> all_centers(const Structure& s) {
  std::vector<int> c(s.size());
  for (int i = 0; i < s.size(); ++i) c[i] = i;
  return c;
}

inline std::vector<int> all_pairs(const StructureContext& ctx) {
  std::vector<int> p(ctx.pairs.size());
  for (std::size_t i = 0; i < ctx.pairs.size(); ++i) p[i] = static_cast<int>(i);
  return p;
}

}  // namespace mpacdc
