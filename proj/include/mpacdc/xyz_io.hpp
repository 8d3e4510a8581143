#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mpacdc/structure.hpp"

namespace mpacdc {

namespace detail {

// tokenize a comment line into key=value pairs, honoring double quotes
inline std::vector<std::pair<std::string, std::string>> parse_kv(
    const std::string& line, int lineno) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t i = 0;
  const auto n = line.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= n) break;
    std::size_t eq = i;
    while (eq < n && line[eq] != '=' && !std::isspace(static_cast<unsigned char>(line[eq])))
      ++eq;
    if (eq >= n || line[eq] != '=') {
      // bare token without '=': tolerated, stored with empty value
      out.emplace_back(line.substr(i, eq - i), "");
      i = eq;
      continue;
    }
    std::string key = line.substr(i, eq - i);
    i = eq + 1;
    std::string val;
    if (i < n && line[i] == '"') {
      ++i;
      const std::size_t close = line.find('"', i);
      if (close == std::string::npos)
        throw parse_error("xyz line " + std::to_string(lineno) + ": unterminated quote");
      val = line.substr(i, close - i);
      i = close + 1;
    } else {
      std::size_t end = i;
      while (end < n && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
      val = line.substr(i, end - i);
      i = end;
    }
    out.emplace_back(std::move(key), std::move(val));
  }
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

inline bool parse_vec3(const std::string& s, Eigen::Vector3d& out) {
  std::istringstream is(s);
  std::string a, b, c, extra;
  if (!(is >> a >> b >> c) || (is >> extra)) return false;
  return parse_double(a, out[0]) && parse_double(b, out[1]) && parse_double(c, out[2]);
}

inline std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Extended XYZ: count line, comment line with key=value properties
// (optional Lattice and pbc), then one row per atom: symbol x y z.
// Energies live under the "energy" key, dipoles under "dipole".
inline Dataset read_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);

  std::vector<Structure> structures;
  std::vector<std::vector<std::string>> per_structure_symbols;
  std::set<std::string> all_symbols;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // skip blank separator lines between frames
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    int natoms = 0;
    {
      std::string trimmed = line;
      trimmed.erase(trimmed.find_last_not_of(" \t\r") + 1);
      trimmed.erase(0, trimmed.find_first_not_of(" \t"));
      const char* b = trimmed.data();
      auto [p, ec] = std::from_chars(b, b + trimmed.size(), natoms);
      if (ec != std::errc() || p != trimmed.data() + trimmed.size() || natoms < 0)
        throw parse_error("xyz line " + std::to_string(lineno) +
                          ": expected atom count, got '" + trimmed + "'");
    }

    if (!std::getline(in, line))
      throw parse_error("xyz line " + std::to_string(lineno + 1) +
                        ": missing comment line");
    ++lineno;

    Structure s;
    std::vector<std::string> symbols;
    for (auto& [key, val] : detail::parse_kv(line, lineno)) {
      if (key == "Lattice" || key == "lattice") {
        std::istringstream is(val);
        Eigen::Matrix3d cell;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c)
            if (!(is >> cell(r, c)))
              throw parse_error("xyz line " + std::to_string(lineno) +
                                ": Lattice needs 9 numbers");
        s.cell = cell;
        s.pbc = {true, true, true};
      } else if (key == "pbc") {
        std::istringstream is(val);
        std::string t;
        for (int k = 0; k < 3 && (is >> t); ++k)
          s.pbc[k] = (t == "T" || t == "True" || t == "true" || t == "1");
      } else if (key == "Properties") {
        if (val.rfind("species:S:1:pos:R:3", 0) != 0)
          throw parse_error("xyz line " + std::to_string(lineno) +
                            ": unsupported Properties layout '" + val + "'");
      } else {
        double d;
        Eigen::Vector3d v;
        if (detail::parse_double(val, d))
          s.tags[key] = d;
        else if (detail::parse_vec3(val, v))
          s.tags[key] = v;
        else
          s.tags[key] = val;
      }
    }

    s.positions.reserve(natoms);
    symbols.reserve(natoms);
    for (int a = 0; a < natoms; ++a) {
      if (!std::getline(in, line))
        throw parse_error("xyz line " + std::to_string(lineno + 1) +
                          ": unexpected end of file inside atom block");
      ++lineno;
      std::istringstream is(line);
      std::string sym, xs, ys, zs;
      Eigen::Vector3d p;
      if (!(is >> sym >> xs >> ys >> zs) || !detail::parse_double(xs, p[0]) ||
          !detail::parse_double(ys, p[1]) || !detail::parse_double(zs, p[2]))
        throw parse_error("xyz line " + std::to_string(lineno) +
                          ": malformed atom row '" + line + "'");
      s.positions.push_back(p);
      symbols.push_back(sym);
      all_symbols.insert(sym);
    }
    structures.push_back(std::move(s));
    per_structure_symbols.push_back(std::move(symbols));
  }

  Dataset ds;
  ds.species = SpeciesTable(
      std::vector<std::string>(all_symbols.begin(), all_symbols.end()));
  for (std::size_t i = 0; i < structures.size(); ++i) {
    for (const auto& sym : per_structure_symbols[i])
      structures[i].species.push_back(ds.species.code(sym));
    structures[i].validate();
  }
  ds.structures = std::move(structures);
  return ds;
}

inline void write_xyz(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  for (const Structure& s : ds.structures) {
    out << s.size() << "\n";
    std::string comment = "Properties=species:S:1:pos:R:3";
    if (s.cell) {
      comment += " Lattice=\"";
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          comment += ((r || c) ? " " : "") + detail::fmt_g17((*s.cell)(r, c));
      comment += "\"";
      comment += " pbc=\"";
      for (int k = 0; k < 3; ++k)
        comment += std::string(k ? " " : "") + (s.pbc[k] ? "T" : "F");
      comment += "\"";
    }
    for (const auto& [key, val] : s.tags) {
      comment += " " + key + "=";
      if (std::holds_alternative<double>(val)) {
        comment += detail::fmt_g17(std::get<double>(val));
      } else if (std::holds_alternative<Eigen::Vector3d>(val)) {
        const auto& v = std::get<Eigen::Vector3d>(val);
        comment += "\"" + detail::fmt_g17(v[0]) + " " + detail::fmt_g17(v[1]) +
                   " " + detail::fmt_g17(v[2]) + "\"";
      } else {
        comment += "\"" + std::get<std::string>(val) + "\"";
      }
    }
    out << comment << "\n";
    for (int a = 0; a < s.size(); ++a)
      out << ds.species.symbol(s.species[a]) << " "
          << detail::fmt_g17(s.positions[a][0]) << " "
          << detail::fmt_g17(s.positions[a][1]) << " "
          << detail::fmt_g17(s.positions[a][2]) << "\n";
  }
  if (!out) throw io_error("write failed for " + path);
}

}  // namespace mpacdc
