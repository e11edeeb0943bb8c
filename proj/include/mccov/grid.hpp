#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace mccov {

// Estimation grid: regions x ages 0..age_max x calendar years.
// The reporting window is [year_min, year_max]; year_start <= year_min is
// the internally extended origin so every retained cohort's full history
// lies on the grid. Field time indices run over [year_start, year_max].
struct Grid {
  std::vector<std::string> regions;
  int age_max = 0;             // ages are 0..age_max inclusive
  int year_min = 0;            // reporting window start
  int year_max = 0;            // reporting window end
  int year_start = 0;          // extended origin (<= year_min)
  int paediatric_cutoff = 10;  // adult MMC predictor applies from this age

  int n_regions() const { return static_cast<int>(regions.size()); }
  int n_ages() const { return age_max + 1; }
  int n_years() const { return year_max - year_start + 1; }
  int n_report_years() const { return year_max - year_min + 1; }

  int year_index(int year) const { return year - year_start; }
  int year_of(int t) const { return year_start + t; }
  bool year_on_grid(int year) const { return year >= year_start && year <= year_max; }

  // -1 when the identifier is unknown.
  int region_index(const std::string& id) const;

  void validate() const;  // throws StructuralError on bad bounds

  Grid extended_back_to(int new_year_start) const;
};

Grid make_grid(std::vector<std::string> regions, int age_max, int year_min,
               int year_max, int paediatric_cutoff = 10);

// Undirected region adjacency; node indices follow Grid::regions order.
struct AdjacencyGraph {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> edges;  // a < b, unique
  std::vector<int> neighbor_counts;

  std::vector<int> isolated_nodes() const;
  // Connected components, each a sorted list of node indices.
  std::vector<std::vector<int>> components() const;

  void validate() const;
};

AdjacencyGraph make_adjacency(int n_nodes, const std::vector<std::pair<int, int>>& edges);

// File formats: grid CSV has header `region`; adjacency CSV has header
// `region_a,region_b` with identifiers resolved against the grid.
std::vector<std::string> load_regions_csv(const std::string& path);
AdjacencyGraph load_adjacency_csv(const std::string& path, const Grid& grid);

}  // namespace mccov
