#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mpacdc/errors.hpp"

namespace mpacdc {

// named scalar / 3-vector / free-form properties from the comment line
using TagValue = std::variant<double, Eigen::Vector3d, std::string>;

struct Structure {
  std::vector<Eigen::Vector3d> positions;  // Angstrom
  std::vector<int> species;                // dense codes into a SpeciesTable
  std::optional<Eigen::Matrix3d> cell;     // rows are lattice vectors
  std::array<bool, 3> pbc{false, false, false};
  std::map<std::string, TagValue> tags;

  int size() const { return static_cast<int>(positions.size()); }

  double energy() const {
    auto it = tags.find("energy");
    if (it == tags.end() || !std::holds_alternative<double>(it->second))
      throw input_error("structure has no scalar 'energy' tag");
    return std::get<double>(it->second);
  }

  Eigen::Vector3d dipole() const {
    auto it = tags.find("dipole");
    if (it == tags.end() || !std::holds_alternative<Eigen::Vector3d>(it->second))
      throw input_error("structure has no 3-vector 'dipole' tag");
    return std::get<Eigen::Vector3d>(it->second);
  }

  void validate() const {
    if (positions.size() != species.size())
      throw input_error("structure: positions and species length mismatch");
    const bool any_pbc = pbc[0] || pbc[1] || pbc[2];
    if (any_pbc) {
      if (!cell) throw input_error("structure: pbc set but no cell");
      if (std::abs(cell->determinant()) < 1e-12)
        throw input_error("structure: singular cell");
    }
  }
};

// Dense species codes are assigned per dataset, in sorted symbol order.
class SpeciesTable {
 public:
  SpeciesTable() = default;
  explicit SpeciesTable(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    for (std::size_t i = 0; i < symbols_.size(); ++i) index_[symbols_[i]] = static_cast<int>(i);
  }

  int code(const std::string& symbol) const {
    auto it = index_.find(symbol);
    if (it == index_.end()) throw input_error("unknown species symbol: " + symbol);
    return it->second;
  }
  const std::string& symbol(int code) const { return symbols_.at(code); }
  int count() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, int> index_;
};

struct Dataset {
  SpeciesTable species;
  std::vector<Structure> structures;
};

}  // namespace mpacdc
