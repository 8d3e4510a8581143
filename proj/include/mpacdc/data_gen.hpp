#pragma once

#include <cmath>
#include <sstream>

#include "mpacdc/errors.hpp"
#include "mpacdc/rng.hpp"
#include "mpacdc/structure.hpp"

namespace mpacdc {

// Synthetic targets are closed-form and re-derivable; constants below are
// part of the dataset definition and are echoed into the XYZ comment line.

struct Ch4LikeParams {
  int count = 100;
  std::uint64_t seed = 0;
  double r_sphere = 3.0;     // H placement ball radius (Angstrom)
  double min_dist = 0.5;     // rejection threshold between any two atoms
  // 2-body Morse over all atom pairs
  double morse_depth = 0.2;
  double morse_width = 1.5;
  double morse_r0 = 1.1;
  // 3-body: a3 * cos(theta_jCk) f(r_Cj) f(r_Ck) over H pairs, f = exp(-r^2/4)
  double a3 = 0.5;
  // 4-body: b4 * g g g over H triplets, g = exp(-r^2/2)
  double b4 = 2.0;
};

inline double ch4_morse(const Ch4LikeParams& p, double r) {
  const double e = 1.0 - std::exp(-p.morse_width * (r - p.morse_r0));
  return p.morse_depth * (e * e - 1.0);
}

inline double ch4_f(double r) { return std::exp(-r * r / 4.0); }
inline double ch4_g(double r) { return std::exp(-r * r / 2.0); }

inline double ch4_energy(const Ch4LikeParams& p, const Structure& s) {
  // atom 0 is the carbon
  double e = 0.0;
  const int n = s.size();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      e += ch4_morse(p, (s.positions[j] - s.positions[i]).norm());
  std::vector<double> rc(n, 0.0);
  for (int j = 1; j < n; ++j) rc[j] = s.positions[j].norm();
  for (int j = 1; j < n; ++j)
    for (int k = j + 1; k < n; ++k) {
      const double ct =
          s.positions[j].dot(s.positions[k]) / (rc[j] * rc[k]);
      e += p.a3 * ct * ch4_f(rc[j]) * ch4_f(rc[k]);
    }
  for (int j = 1; j < n; ++j)
    for (int k = j + 1; k < n; ++k)
      for (int l = k + 1; l < n; ++l)
        e += p.b4 * ch4_g(rc[j]) * ch4_g(rc[k]) * ch4_g(rc[l]);
  return e;
}

// One C at the origin, four H uniform in a ball, energy = documented
// 2+3+4-body target (the 4-body part is invisible to pair-correlation
// features by construction).
inline Dataset gen_ch4_like(const Ch4LikeParams& p) {
  if (p.count < 1) throw config_error("gen_ch4_like: count must be >= 1");
  Rng rng(p.seed);
  Dataset ds;
  ds.species = SpeciesTable({"C", "H"});
  const int kC = ds.species.code("C"), kH = ds.species.code("H");

  std::ostringstream meta;
  meta << "ch4_like seed=" << p.seed << " r_sphere=" << p.r_sphere
       << " a3=" << p.a3 << " b4=" << p.b4 << " morse=" << p.morse_depth << ","
       << p.morse_width << "," << p.morse_r0;

  for (int s = 0; s < p.count; ++s) {
    Structure st;
    st.positions.push_back({0, 0, 0});
    st.species.push_back(kC);
    while (st.size() < 5) {
      Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
      if (dir.norm() < 1e-12) continue;
      dir.normalize();
      const double r = p.r_sphere * std::cbrt(rng.uniform());
      const Eigen::Vector3d pos = r * dir;
      bool ok = true;
      for (const auto& q : st.positions) ok = ok && (q - pos).norm() >= p.min_dist;
      if (!ok) continue;
      st.positions.push_back(pos);
      st.species.push_back(kH);
    }
    st.tags["energy"] = ch4_energy(p, st);
    st.tags["gen"] = meta.str();
    ds.structures.push_back(std::move(st));
  }
  return ds;
}

struct NaclToyParams {
  int count = 100;
  std::uint64_t seed = 0;
  double box = 12.0;        // cubic box edge (no periodicity)
  int n_dummy = 8;
  double exclusion = 2.5;   // minimum distance involving dummy atoms
  double r_min = 2.5;       // Na-Cl separation range, uniform in r
  double r_max = 11.0;
  int max_tries = 10000;
};

// One Na-Cl pair at a controlled separation plus inert dummy atoms;
// energy = -1/r in 1/Angstrom units (lengths stay in Angstrom). The dummy
// species carries no energy contribution by construction.
inline Dataset gen_nacl_toy(const NaclToyParams& p) {
  Rng rng(p.seed);
  Dataset ds;
  ds.species = SpeciesTable({"Cl", "Na", "X"});
  const int kNa = ds.species.code("Na"), kCl = ds.species.code("Cl"),
            kX = ds.species.code("X");

  std::ostringstream meta;
  meta << "nacl_toy seed=" << p.seed << " box=" << p.box
       << " n_dummy=" << p.n_dummy << " exclusion=" << p.exclusion
       << " r_dist=uniform[" << p.r_min << "," << p.r_max << "]";

  auto in_box = [&](const Eigen::Vector3d& v) {
    return v.minCoeff() >= 0.0 && v.maxCoeff() <= p.box;
  };

  for (int s = 0; s < p.count; ++s) {
    Structure st;
    const double r = rng.uniform(p.r_min, p.r_max);
    Eigen::Vector3d na, cl;
    int tries = 0;
    for (;; ++tries) {
      if (tries >= p.max_tries)
        throw generation_error("gen_nacl_toy: cannot place the ion pair");
      na = {rng.uniform(0, p.box), rng.uniform(0, p.box), rng.uniform(0, p.box)};
      Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
      if (dir.norm() < 1e-12) continue;
      cl = na + r * dir.normalized();
      if (in_box(cl)) break;
    }
    st.positions = {na, cl};
    st.species = {kNa, kCl};
    for (int d = 0; d < p.n_dummy; ++d) {
      int t = 0;
      for (;; ++t) {
        if (t >= p.max_tries)
          throw generation_error("gen_nacl_toy: cannot place dummy atoms");
        Eigen::Vector3d x(rng.uniform(0, p.box), rng.uniform(0, p.box),
                          rng.uniform(0, p.box));
        bool ok = true;
        for (const auto& q : st.positions) ok = ok && (q - x).norm() >= p.exclusion;
        if (ok) {
          st.positions.push_back(x);
          st.species.push_back(kX);
          break;
        }
      }
    }
    st.tags["energy"] = -1.0 / r;
    st.tags["r_pair"] = r;
    st.tags["gen"] = meta.str();
    ds.structures.push_back(std::move(st));
  }
  return ds;
}

struct PointChargeParams {
  int count = 100;
  std::uint64_t seed = 0;
  double radius = 2.0;      // placement ball radius
  double min_dist = 0.7;
  int n_atoms_min = 4;      // total atoms per structure (neutral overall)
  int n_atoms_max = 9;
  double charge = 1.0;      // species A carries +charge, B carries -charge
  bool include_neutral = true;  // species Q pads odd sizes with charge 0
};

inline Eigen::Vector3d point_charge_dipole(const Structure& s,
                                           const std::vector<double>& charges) {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : s.positions) centroid += p;
  centroid /= s.size();
  Eigen::Vector3d mu = Eigen::Vector3d::Zero();
  for (int i = 0; i < s.size(); ++i)
    mu += charges[s.species[i]] * (s.positions[i] - centroid);
  return mu;
}

// Random neutral clusters of +q/-q (and optionally neutral) point charges;
// dipole target sum_i q_i (r_i - centroid).
inline Dataset gen_point_charge_molecules(const PointChargeParams& p) {
  if (p.n_atoms_min < 2 || p.n_atoms_max < p.n_atoms_min)
    throw config_error("gen_point_charge_molecules: bad atom count range");
  Rng rng(p.seed);
  Dataset ds;
  ds.species = p.include_neutral ? SpeciesTable({"A", "B", "Q"})
                                 : SpeciesTable({"A", "B"});
  std::vector<double> charges(ds.species.count());
  charges[ds.species.code("A")] = p.charge;
  charges[ds.species.code("B")] = -p.charge;
  if (p.include_neutral) charges[ds.species.code("Q")] = 0.0;

  std::ostringstream meta;
  meta << "point_charge seed=" << p.seed << " radius=" << p.radius
       << " charge=" << p.charge;

  for (int s = 0; s < p.count; ++s) {
    const int m =
        p.n_atoms_min + static_cast<int>(rng.below(p.n_atoms_max - p.n_atoms_min + 1));
    int n_neutral = m % 2;
    if (!p.include_neutral) n_neutral = 0;
    const int pairs = (m - n_neutral) / 2;

    Structure st;
    std::vector<int> kinds;
    for (int k = 0; k < pairs; ++k) {
      kinds.push_back(ds.species.code("A"));
      kinds.push_back(ds.species.code("B"));
    }
    for (int k = 0; k < n_neutral; ++k) kinds.push_back(ds.species.code("Q"));

    for (int kind : kinds) {
      for (int tries = 0;; ++tries) {
        if (tries >= 10000)
          throw generation_error("gen_point_charge_molecules: packing failed");
        Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
        if (dir.norm() < 1e-12) continue;
        const Eigen::Vector3d pos =
            p.radius * std::cbrt(rng.uniform()) * dir.normalized();
        bool ok = true;
        for (const auto& q : st.positions) ok = ok && (q - pos).norm() >= p.min_dist;
        if (ok) {
          st.positions.push_back(pos);
          st.species.push_back(kind);
          break;
        }
      }
    }
    st.tags["dipole"] = point_charge_dipole(st, charges);
    st.tags["gen"] = meta.str();
    ds.structures.push_back(std::move(st));
  }
  return ds;
}

}  // namespace mpacdc
