#include <catch2/catch_amalgamated.hpp>

#include "mpacdc/cg_engine.hpp"
#include "mpacdc/rng.hpp"
#include "mpacdc/rotation.hpp"
#include "mpacdc/wigner.hpp"

using namespace mpacdc;

namespace {

Structure random_cluster(Rng& rng, int n, double radius, int n_species) {
  Structure s;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d p;
    do {
      p = {rng.uniform(-radius, radius), rng.uniform(-radius, radius),
           rng.uniform(-radius, radius)};
    } while (p.norm() > radius);
    bool ok = true;
    for (const auto& q : s.positions) ok = ok && (q - p).norm() > 0.6;
    if (!ok) {
      --i;
      continue;
    }
    s.positions.push_back(p);
    s.species.push_back(static_cast<int>(rng.below(n_species)));
  }
  return s;
}

EquivariantBlock random_block(Rng& rng, int lambda, int n_samples, int n_props,
                              const std::string& tag, int sigma = 1) {
  EquivariantBlock b;
  b.key = {sigma, lambda, tag};
  for (int s = 0; s < n_samples; ++s) b.samples.push_back({0, s, -1, -1});
  for (int q = 0; q < n_props; ++q) b.props.push_back({q});
  b.prop_schema = "q";
  b.values.resize(static_cast<long>(n_samples) * (2 * lambda + 1), n_props);
  for (long r = 0; r < b.values.rows(); ++r)
    for (long c = 0; c < b.values.cols(); ++c) b.values(r, c) = rng.normal();
  return b;
}

}  // namespace

TEST_CASE("cg_combine vs dense tensor-product oracle", "[engine]") {
  Rng rng(3);
  CGCache cache(4);
  for (int rep = 0; rep < 6; ++rep) {
    const int l1 = static_cast<int>(rng.below(3));
    const int l2 = static_cast<int>(rng.below(3));
    const int ns = 3, na = 2, nb = 3;
    BlockMap A, B;
    {
      auto blk = random_block(rng, l1, ns, na, "A");
      A.emplace(blk.key, std::move(blk));
    }
    {
      auto blk = random_block(rng, l2, ns, nb, "B");
      B.emplace(blk.key, std::move(blk));
    }
    CombineOptions opt;
    opt.out_tag = "AB";
    BlockMap out = cg_combine(A, B, cache, opt);

    const auto& blka = A.begin()->second;
    const auto& blkb = B.begin()->second;
    for (int lam = std::abs(l1 - l2); lam <= l1 + l2; ++lam) {
      const int sigma = ((l1 + l2 + lam) % 2) ? -1 : 1;
      const auto& got = out.at(BlockKey{sigma, lam, "AB"});
      // oracle: materialize the full product tensor, then project
      const CGBlock& cg = cache.block(l1, l2, lam);
      for (int s = 0; s < ns; ++s)
        for (int qa = 0; qa < na; ++qa)
          for (int qb = 0; qb < nb; ++qb)
            for (int mu = -lam; mu <= lam; ++mu) {
              double acc = 0.0;
              for (int m1 = -l1; m1 <= l1; ++m1)
                for (int m2 = -l2; m2 <= l2; ++m2)
                  acc += blka.at(s, m1 + l1, qa) * blkb.at(s, m2 + l2, qb) *
                         cg.coeff(m1, m2, mu);
              CHECK(got.at(s, mu + lam, qa * nb + qb) ==
                    Catch::Approx(acc).margin(1e-10));
            }
    }
  }
}

TEST_CASE("cg_combine bookkeeping", "[engine]") {
  CGCache cache(4);
  Rng rng(9);

  SECTION("coupling (1,1) produces lambda 0,1,2") {
    BlockMap A;
    auto blk = random_block(rng, 1, 2, 2, "x");
    A.emplace(blk.key, std::move(blk));
    CombineOptions opt;
    opt.out_tag = "xx";
    BlockMap out = cg_combine(A, A, cache, opt);
    REQUIRE(out.size() == 3);
    std::vector<int> lambdas;
    for (const auto& [k, b] : out) lambdas.push_back(k.lambda);
    CHECK(lambdas == std::vector<int>{0, 1, 2});
    // parity follows sigma1 sigma2 (-1)^(l1+l2+lambda)
    for (const auto& [k, b] : out)
      CHECK(k.sigma == (((1 + 1 + k.lambda) % 2) ? -1 : 1));
  }

  SECTION("sample mismatch is a contract violation") {
    BlockMap A, B;
    auto a = random_block(rng, 1, 2, 2, "a");
    auto b = random_block(rng, 1, 3, 2, "b");
    A.emplace(a.key, std::move(a));
    B.emplace(b.key, std::move(b));
    CombineOptions opt;
    CHECK_THROWS_AS(cg_combine(A, B, cache, opt), contract_error);
  }

  SECTION("lambda_keep filters output keys") {
    BlockMap A;
    auto blk = random_block(rng, 1, 2, 2, "x");
    A.emplace(blk.key, std::move(blk));
    CombineOptions opt;
    opt.lambda_keep = {0, 2};
    BlockMap out = cg_combine(A, A, cache, opt);
    REQUIRE(out.size() == 2);
    CHECK(out.begin()->first.lambda == 0);
    CHECK(out.rbegin()->first.lambda == 2);
  }

  SECTION("self-product dedup preserves the Euclidean metric") {
    // one block set coupled with itself at lambda=0: compare the deduped
    // weighted norm against the full product norm, per sample
    BlockMap A;
    auto blk = random_block(rng, 2, 4, 3, "x");
    A.emplace(blk.key, std::move(blk));
    CombineOptions full;
    full.out_tag = "full";
    BlockMap f = cg_combine(A, A, cache, full);
    CombineOptions dedup;
    dedup.out_tag = "dedup";
    dedup.same_feature = true;
    BlockMap d = cg_combine(A, A, cache, dedup);
    for (const auto& [key, fb] : f) {
      const auto& db = d.at(BlockKey{key.sigma, key.lambda, "dedup"});
      for (int s = 0; s < fb.n_samples(); ++s) {
        const double nf = fb.sample_view(s).squaredNorm();
        const double nd = db.sample_view(s).squaredNorm();
        CHECK(nd == Catch::Approx(nf).epsilon(1e-10));
      }
    }
  }
}

namespace {
struct EnvBlocks {
  StructureContext ctx;
  BlockMap nu1;
};

EnvBlocks env_blocks(const Structure& s, const RadialBasis& basis,
                     const SphericalHarmonics& sh, int n_species,
                     const std::vector<int>& centers) {
  std::vector<int> species(n_species);
  for (int i = 0; i < n_species; ++i) species[i] = i;
  EnvBlocks e{make_context(s, 0, basis, sh, species), {}};
  e.nu1 = expand_density(e.ctx, basis, sh, centers);
  return e;
}
}  // namespace

TEST_CASE("invariance of lambda=0 self-coupling", "[engine]") {
  RadialBasisSpec spec;
  spec.n_max = 2;
  spec.r_cut = 3.0;
  RadialBasis basis(spec, 2);
  SphericalHarmonics sh(2);
  CGCache cache(2);

  // a single neighbor placed along +z and along +x gives identical
  // lambda=0 invariants
  Structure sz, sx;
  sz.positions = {{0, 0, 0}, {0, 0, 1.1}};
  sz.species = {0, 0};
  sx.positions = {{0, 0, 0}, {1.1, 0, 0}};
  sx.species = {0, 0};
  auto ez = env_blocks(sz, basis, sh, 1, {0});
  auto ex = env_blocks(sx, basis, sh, 1, {0});
  CombineOptions opt;
  opt.lambda_keep = {0};
  opt.same_feature = true;
  opt.out_tag = "inv";
  BlockMap vz = cg_combine(ez.nu1, ez.nu1, cache, opt);
  BlockMap vx = cg_combine(ex.nu1, ex.nu1, cache, opt);
  REQUIRE(vz.size() == 1);
  CHECK((vz.begin()->second.values - vx.begin()->second.values)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("power spectrum", "[engine]") {
  RadialBasisSpec spec;
  spec.n_max = 3;
  spec.r_cut = 3.5;
  const int l_max = 3;
  RadialBasis basis(spec, l_max);
  SphericalHarmonics sh(l_max);
  CGCache cache(l_max);
  Rng rng(21);

  SECTION("rotation leaves invariants unchanged") {
    Structure s = random_cluster(rng, 5, 1.5, 2);
    Structure sr = s;
    const Rotation rot = Rotation::random(rng);
    for (auto& p : sr.positions) p = rot * p;
    auto a = env_blocks(s, basis, sh, 2, all_centers(s));
    auto b = env_blocks(sr, basis, sh, 2, all_centers(sr));
    BlockMap pa = power_spectrum(a.nu1);
    BlockMap pb = power_spectrum(b.nu1);
    CHECK((pa.begin()->second.values - pb.begin()->second.values)
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }

  SECTION("mirror image gives the identical power spectrum") {
    Structure s = random_cluster(rng, 5, 1.5, 2);
    Structure sm = s;
    for (auto& p : sm.positions) p = -p;
    auto a = env_blocks(s, basis, sh, 2, all_centers(s));
    auto b = env_blocks(sm, basis, sh, 2, all_centers(sm));
    BlockMap pa = power_spectrum(a.nu1);
    BlockMap pb = power_spectrum(b.nu1);
    CHECK(pa.begin()->first.sigma == 1);
    CHECK((pa.begin()->second.values - pb.begin()->second.values)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }

  SECTION("tetrahedral cluster matches the neighbor-pair-sum oracle") {
    // G_{nn'l}(r, r', theta) = R_n(r) R_n'(r') (2l+1)/(4pi) P_l(cos theta),
    // summed over ordered neighbor pairs (addition theorem); the density
    // trick must reproduce this exactly
    Structure s;
    s.positions = {{0, 0, 0},
                   {1.1, 1.1, 1.1},
                   {1.1, -1.1, -1.1},
                   {-1.1, 1.1, -1.1},
                   {-1.1, -1.1, 1.1}};
    s.species = {1, 0, 0, 0, 0};
    auto e = env_blocks(s, basis, sh, 2, {0});
    BlockMap ps = power_spectrum(e.nu1);
    const auto& blk = ps.begin()->second;

    auto legendre = [](int l, double x) {
      double p0 = 1.0, p1 = x;
      if (l == 0) return p0;
      if (l == 1) return p1;
      for (int k = 2; k <= l; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      return p1;
    };

    for (int q = 0; q < blk.n_props(); ++q) {
      const auto& prop = blk.props[q];  // a,n,a',n',l,l
      const int a1 = prop[0], n1 = prop[1], a2 = prop[2], n2 = prop[3],
                l = prop[4];
      double acc = 0.0;
      for (int j = 1; j < s.size(); ++j)
        for (int k = 1; k < s.size(); ++k) {
          if (s.species[j] != a1 || s.species[k] != a2) continue;
          const Eigen::Vector3d vj = s.positions[j] - s.positions[0];
          const Eigen::Vector3d vk = s.positions[k] - s.positions[0];
          const double rj = vj.norm(), rk = vk.norm();
          const double fj = cutoff_value(rj, spec.r_cut, spec.cutoff_width);
          const double fk = cutoff_value(rk, spec.r_cut, spec.cutoff_width);
          const double ct = vj.dot(vk) / (rj * rk);
          acc += fj * fk * basis.evaluate(l, rj)[n1] * basis.evaluate(l, rk)[n2] *
                 (2.0 * l + 1.0) / (4.0 * M_PI) * legendre(l, ct);
        }
      const double w = (prop[0] == prop[2] && prop[1] == prop[3]) ? 1.0 : M_SQRT2;
      CHECK(blk.at(0, 0, q) == Catch::Approx(w * acc).margin(1e-8));
    }
  }

  SECTION("single neighbor: nu=2 factors as symmetric squares") {
    Structure s;
    s.positions = {{0, 0, 0}, {0.4, 0.9, 1.2}};
    s.species = {0, 0};
    auto e = env_blocks(s, basis, sh, 1, {0});
    BlockMap ps = power_spectrum(e.nu1);
    const auto& blk = ps.begin()->second;
    // locate diagonal entries per (n, l); off-diagonals squared must equal
    // 2 * product of diagonals, exactly
    std::map<std::pair<int, int>, double> diag;
    for (int q = 0; q < blk.n_props(); ++q) {
      const auto& p = blk.props[q];
      if (p[1] == p[3]) diag[{p[1], p[4]}] = blk.at(0, 0, q);
    }
    for (int q = 0; q < blk.n_props(); ++q) {
      const auto& p = blk.props[q];
      if (p[1] == p[3]) continue;
      const double off = blk.at(0, 0, q);
      CHECK(off * off ==
            Catch::Approx(2.0 * diag[{p[1], p[4]}] * diag[{p[3], p[4]}])
                .margin(1e-14));
    }
  }
}

TEST_CASE("bispectrum", "[engine]") {
  RadialBasisSpec spec;
  spec.n_max = 2;
  spec.r_cut = 3.0;
  const int l_max = 2;
  RadialBasis basis(spec, l_max);
  SphericalHarmonics sh(l_max);
  CGCache cache(l_max);
  Rng rng(33);

  SECTION("lambda_keep={0} reduces to products of invariants") {
    // the lambda=0-restricted chain cannot create new angular correlations:
    // every output column factors exactly as (nu=2 invariant) x (nu=1 l=0
    // invariant), and the scalar-scalar coupling is the identity
    Structure s = random_cluster(rng, 5, 1.4, 1);
    auto e = env_blocks(s, basis, sh, 1, all_centers(s));
    BlockMap bs = bispectrum(e.nu1, cache, {0});
    const auto& blk = bs.at(BlockKey{1, 0, "nu=3"});
    const auto& nu1l0 = e.nu1.at(BlockKey{1, 0, "nu=1"});

    CombineOptions s1opt;
    s1opt.lambda_keep = {0};
    s1opt.same_feature = true;
    s1opt.out_tag = "nu=2";
    BlockMap s1 = cg_combine(e.nu1, e.nu1, cache, s1opt);
    const auto& s1blk = s1.at(BlockKey{1, 0, "nu=2"});

    REQUIRE(blk.n_props() > 0);
    for (int q = 0; q < blk.n_props(); ++q) {
      // prop layout: a,n, a',n', l,l, a'',n'', 0,0
      const auto& p = blk.props[q];
      REQUIRE(p.size() == 10);
      CHECK(p[8] == 0);
      CHECK(p[9] == 0);
      const std::vector<int> s1prop(p.begin(), p.begin() + 6);
      const auto it = std::find(s1blk.props.begin(), s1blk.props.end(), s1prop);
      REQUIRE(it != s1blk.props.end());
      const int qs1 = static_cast<int>(it - s1blk.props.begin());
      const int q3 = p[6] * spec.n_max + p[7];
      for (int smp = 0; smp < blk.n_samples(); ++smp) {
        const double expect = s1blk.at(smp, 0, qs1) * nu1l0.at(smp, 0, q3);
        CHECK(blk.at(smp, 0, q) == Catch::Approx(expect).margin(1e-12));
      }
    }
  }

  SECTION("rotation invariance") {
    Structure s = random_cluster(rng, 6, 1.4, 2);
    Structure sr = s;
    const Rotation rot = Rotation::random(rng);
    for (auto& p : sr.positions) p = rot * p;
    auto a = env_blocks(s, basis, sh, 2, all_centers(s));
    auto b = env_blocks(sr, basis, sh, 2, all_centers(sr));
    BlockMap ba = bispectrum(a.nu1, cache, {0, 1, 2});
    BlockMap bb = bispectrum(b.nu1, cache, {0, 1, 2});
    for (const auto& [key, blk] : ba)
      CHECK((blk.values - bb.at(key).values).cwiseAbs().maxCoeff() < 1e-9);
  }

  SECTION("pseudoscalar blocks flip sign under inversion") {
    Structure s = random_cluster(rng, 6, 1.4, 1);
    Structure sm = s;
    for (auto& p : sm.positions) p = -p;
    auto a = env_blocks(s, basis, sh, 1, all_centers(s));
    auto b = env_blocks(sm, basis, sh, 1, all_centers(sm));
    BlockMap ba = bispectrum(a.nu1, cache, {0, 1, 2});
    BlockMap bb = bispectrum(b.nu1, cache, {0, 1, 2});
    bool saw_pseudo = false;
    for (const auto& [key, blk] : ba) {
      REQUIRE(key.lambda == 0);
      const auto& other = bb.at(key);
      if (key.sigma == 1) {
        CHECK((blk.values - other.values).cwiseAbs().maxCoeff() < 1e-10);
      } else {
        saw_pseudo = true;
        CHECK((blk.values + other.values).cwiseAbs().maxCoeff() < 1e-10);
      }
    }
    CHECK(saw_pseudo);
  }

  SECTION("matches a dense triple-product oracle on a 3-neighbor toy") {
    Structure s = random_cluster(rng, 4, 1.3, 1);
    auto e = env_blocks(s, basis, sh, 1, {0});
    BlockMap bs = bispectrum(e.nu1, cache, {0, 1, 2});
    // oracle: for each property (qa,qb,l1,l2,k, qc,l3), contract the raw
    // triple tensor with the two CG blocks explicitly
    for (const auto& [key, blk] : bs) {
      for (int q = 0; q < blk.n_props(); ++q) {
        const auto& p = blk.props[q];
        const int qa = p[0] * spec.n_max + p[1];
        const int qb = p[2] * spec.n_max + p[3];
        const int l1 = p[4], l2 = p[5];
        const int qc = p[6] * spec.n_max + p[7];
        const int k = p[8], l3 = p[9];
        REQUIRE(k <= 2);
        REQUIRE(l3 == k);  // final lambda = 0 forces it
        const auto& b1 = e.nu1.at(BlockKey{1, l1, "nu=1"});
        const auto& b2 = e.nu1.at(BlockKey{1, l2, "nu=1"});
        const auto& b3 = e.nu1.at(BlockKey{1, l3, "nu=1"});
        const CGBlock& cg1 = cache.block(l1, l2, k);
        const CGBlock& cg2 = cache.block(k, l3, 0);
        double acc = 0.0;
        for (int m1 = -l1; m1 <= l1; ++m1)
          for (int m2 = -l2; m2 <= l2; ++m2)
            for (int m3 = -l3; m3 <= l3; ++m3) {
              const int kk = m1 + m2;  // real coupling is not diagonal in m,
              double inner = 0.0;      // so sum over the intermediate kappa
              for (int kap = -k; kap <= k; ++kap)
                inner += cg1.coeff(m1, m2, kap) * cg2.coeff(kap, m3, 0);
              (void)kk;
              acc += b1.at(0, m1 + l1, qa) * b2.at(0, m2 + l2, qb) *
                     b3.at(0, m3 + l3, qc) * inner;
            }
        const double w =
            (l1 == l2 && qa == qb) ? 1.0 : M_SQRT2;  // first-stage dedup
        CHECK(blk.at(0, 0, q) == Catch::Approx(w * acc).margin(1e-9));
      }
    }
  }
}

TEST_CASE("three-center invariant", "[engine]") {
  RadialBasisSpec spec;
  spec.n_max = 2;
  spec.r_cut = 4.0;
  const int l_max = 3;
  RadialBasis basis(spec, l_max);
  SphericalHarmonics sh(l_max);
  Rng rng(17);

  SECTION("collapses to the pair power spectrum diagonal for i1 = i2") {
    Structure s;
    s.positions = {{0, 0, 0}, {0.8, -0.7, 1.0}};
    s.species = {0, 0};
    auto ctx = make_context(s, 0, basis, sh, {0});
    EquivariantBlock tc = three_center_invariant(ctx, basis, sh, {{0, 0}});
    BlockMap pexp = expand_pair(ctx, basis, sh, {0});
    BlockMap ps = power_spectrum(pexp);
    const auto& psb = ps.begin()->second;
    for (int q = 0; q < tc.n_props(); ++q) {
      const auto& p = tc.props[q];  // n, n', l
      // find the same entry in the pair power spectrum (species a=0)
      for (int qq = 0; qq < psb.n_props(); ++qq) {
        const auto& pp = psb.props[qq];
        if (pp[1] == std::min(p[0], p[1]) && pp[3] == std::max(p[0], p[1]) &&
            pp[4] == p[2]) {
          const double w = (pp[1] == pp[3]) ? 1.0 : M_SQRT2;
          CHECK(tc.at(0, 0, q) == Catch::Approx(psb.at(0, 0, qq) / w).margin(1e-12));
        }
      }
    }
  }

  SECTION("rigid rotation leaves the values unchanged") {
    Structure s;
    s.positions = {{0, 0, 0}, {1.1, 0.3, -0.2}, {-0.5, 1.0, 0.8}};
    s.species = {0, 0, 0};
    const Rotation rot = Rotation::random(rng);
    Structure sr = s;
    for (auto& p : sr.positions) p = rot * p;
    auto ca = make_context(s, 0, basis, sh, {0});
    auto cb = make_context(sr, 0, basis, sh, {0});
    // pairs: (0->1) and (0->2); locate their indices
    auto find_pair = [](const StructureContext& c, int i, int j) {
      for (std::size_t k = 0; k < c.pairs.size(); ++k)
        if (c.pairs[k].center == i && c.pairs[k].neighbor == j)
          return static_cast<int>(k);
      FAIL("pair not found");
      return -1;
    };
    EquivariantBlock a = three_center_invariant(
        ca, basis, sh, {{find_pair(ca, 0, 1), find_pair(ca, 0, 2)}});
    EquivariantBlock b = three_center_invariant(
        cb, basis, sh, {{find_pair(cb, 0, 1), find_pair(cb, 0, 2)}});
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("angular sweep matches the Legendre expansion") {
    const double r1 = 1.2, r2 = 2.1;
    auto legendre = [](int l, double x) {
      double p0 = 1.0, p1 = x;
      if (l == 0) return p0;
      if (l == 1) return p1;
      for (int k = 2; k <= l; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      return p1;
    };
    for (double theta = 0.1; theta < M_PI; theta += 0.35) {
      Structure s;
      s.positions = {{0, 0, 0},
                     {0, 0, r1},
                     {r2 * std::sin(theta), 0, r2 * std::cos(theta)}};
      s.species = {0, 0, 0};
      auto ctx = make_context(s, 0, basis, sh, {0});
      int p01 = -1, p02 = -1;
      for (std::size_t k = 0; k < ctx.pairs.size(); ++k) {
        if (ctx.pairs[k].center == 0 && ctx.pairs[k].neighbor == 1)
          p01 = static_cast<int>(k);
        if (ctx.pairs[k].center == 0 && ctx.pairs[k].neighbor == 2)
          p02 = static_cast<int>(k);
      }
      EquivariantBlock tc =
          three_center_invariant(ctx, basis, sh, {{p01, p02}});
      const double f1 = cutoff_value(r1, spec.r_cut, spec.cutoff_width);
      const double f2 = cutoff_value(r2, spec.r_cut, spec.cutoff_width);
      for (int q = 0; q < tc.n_props(); ++q) {
        const auto& p = tc.props[q];
        const double expect = f1 * f2 * basis.evaluate(p[2], r1)[p[0]] *
                              basis.evaluate(p[2], r2)[p[1]] *
                              (2.0 * p[2] + 1.0) / (4.0 * M_PI) *
                              legendre(p[2], std::cos(theta));
        CHECK(tc.at(0, 0, q) == Catch::Approx(expect).margin(1e-10));
      }
    }
  }
}

TEST_CASE("pca contraction", "[engine]") {
  Rng rng(41);
  CGCache cache(2);

  SECTION("full dimension reconstructs exactly") {
    EquivariantBlock blk = random_block(rng, 1, 20, 6, "x");
    auto [contracted, map] = pca_contract(blk, 6);
    RowMat recon = contracted.values * map.components.transpose();
    CHECK((recon - blk.values).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("rotating the dataset preserves the singular spectrum") {
    EquivariantBlock blk = random_block(rng, 2, 30, 5, "x");
    const Rotation rot = Rotation::random(rng);
    Eigen::MatrixXd d = wigner_matrix(2, rot, cache);
    EquivariantBlock rotated = blk;
    for (int s = 0; s < blk.n_samples(); ++s)
      rotated.sample_view(s) = d * blk.sample_view(s);
    auto [c1, m1] = pca_contract(blk, 5);
    auto [c2, m2] = pca_contract(rotated, 5);
    for (int k = 0; k < 5; ++k)
      CHECK(m1.singular_values[k] ==
            Catch::Approx(m2.singular_values[k]).margin(1e-8));
  }

  SECTION("retained variance is monotone in target_dim") {
    EquivariantBlock blk = random_block(rng, 0, 40, 8, "x");
    const double total = blk.values.squaredNorm();
    double prev = 0.0;
    for (int d = 1; d <= 8; ++d) {
      auto [c, m] = pca_contract(blk, d);
      const double kept = c.values.squaredNorm();
      CHECK(kept >= prev - 1e-10);
      CHECK(kept <= total + 1e-8);
      prev = kept;
    }
    auto [c8, m8] = pca_contract(blk, 8);
    CHECK(c8.values.squaredNorm() == Catch::Approx(total).epsilon(1e-10));
  }

  SECTION("all-zero block falls back to the identity map") {
    EquivariantBlock blk = random_block(rng, 0, 5, 4, "x");
    blk.values.setZero();
    auto [c, m] = pca_contract(blk, 2);
    CHECK(m.components(0, 0) == 1.0);
    CHECK(c.values.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("map reuse on new data") {
    EquivariantBlock blk = random_block(rng, 0, 30, 6, "x");
    auto [c, m] = pca_contract(blk, 3);
    EquivariantBlock fresh = random_block(rng, 0, 7, 6, "x");
    EquivariantBlock applied = apply_contraction(fresh, m);
    CHECK(applied.n_props() == 3);
    RowMat expect = fresh.values * m.components;
    CHECK((applied.values - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("scalar gate", "[engine]") {
  Rng rng(55);

  SECTION("identity gate is the identity") {
    EquivariantBlock blk = random_block(rng, 2, 6, 4, "x");
    EquivariantBlock inv = random_block(rng, 0, 6, 3, "inv");
    ScalarGate gate;  // identity
    EquivariantBlock out = scalar_gate(blk, inv, gate);
    CHECK((out.values - blk.values).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("gating preserves rotation equivariance") {
    CGCache cache(2);
    RadialBasisSpec spec;
    spec.n_max = 2;
    spec.r_cut = 3.0;
    RadialBasis basis(spec, 2);
    SphericalHarmonics sh(2);
    Structure s = random_cluster(rng, 5, 1.3, 1);
    Structure sr = s;
    const Rotation rot = Rotation::random(rng);
    for (auto& p : sr.positions) p = rot * p;
    auto a = env_blocks(s, basis, sh, 1, all_centers(s));
    auto b = env_blocks(sr, basis, sh, 1, all_centers(sr));
    BlockMap pa = power_spectrum(a.nu1);
    BlockMap pb = power_spectrum(b.nu1);

    ScalarGate gate;
    gate.kind = ScalarGate::Kind::tanh_linear;
    const auto& blka = a.nu1.at(BlockKey{1, 2, "nu=1"});
    gate.weights.resize(blka.n_props(), pa.begin()->second.n_props());
    for (long r = 0; r < gate.weights.rows(); ++r)
      for (long c = 0; c < gate.weights.cols(); ++c)
        gate.weights(r, c) = rng.normal();
    gate.bias = Eigen::VectorXd::Zero(blka.n_props());

    EquivariantBlock ga = scalar_gate(blka, pa.begin()->second, gate);
    EquivariantBlock gb =
        scalar_gate(b.nu1.at(BlockKey{1, 2, "nu=1"}), pb.begin()->second, gate);
    Eigen::MatrixXd d = wigner_matrix(2, rot, cache);
    for (int smp = 0; smp < ga.n_samples(); ++smp) {
      Eigen::MatrixXd expect = d * ga.sample_view(smp);
      CHECK((expect - gb.sample_view(smp)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  SECTION("gated invariants match a polynomial-expansion oracle to 3rd order") {
    // two-feature toy: xi small so tanh(w.xi) xi_q = (w.xi) xi_q
    // - (w.xi)^3/3 xi_q + O(xi^5)
    EquivariantBlock inv;
    inv.key = {1, 0, "inv"};
    const int ns = 12;
    for (int s = 0; s < ns; ++s) inv.samples.push_back({0, s, -1, -1});
    inv.props = {{0}, {1}};
    inv.prop_schema = "q";
    inv.values.resize(ns, 2);
    for (int s = 0; s < ns; ++s) {
      inv.values(s, 0) = 0.01 * rng.normal();
      inv.values(s, 1) = 0.01 * rng.normal();
    }
    ScalarGate gate;
    gate.kind = ScalarGate::Kind::tanh_linear;
    gate.weights.resize(2, 2);
    gate.weights << 0.7, -1.3, 0.4, 0.9;
    gate.bias = Eigen::VectorXd::Zero(2);
    EquivariantBlock out = scalar_gate(inv, inv, gate);
    for (int s = 0; s < ns; ++s)
      for (int q = 0; q < 2; ++q) {
        const double wx = gate.weights(q, 0) * inv.values(s, 0) +
                          gate.weights(q, 1) * inv.values(s, 1);
        const double series = (wx - wx * wx * wx / 3.0) * inv.values(s, q);
        CHECK(out.values(s, q) == Catch::Approx(series).margin(1e-6 * 1e-4));
      }
  }
}
