#include "mccov/grid.hpp"

#include <algorithm>

#include "mccov/csv.hpp"
#include "mccov/errors.hpp"

namespace mccov {

int Grid::region_index(const std::string& id) const {
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i] == id) return static_cast<int>(i);
  return -1;
}

void Grid::validate() const {
  if (regions.empty()) throw StructuralError("grid: no regions");
  if (age_max < paediatric_cutoff)
    throw StructuralError("grid: age_max must be >= paediatric cutoff");
  if (year_max < year_min) throw StructuralError("grid: year_max < year_min");
  if (year_start > year_min) throw StructuralError("grid: year_start > year_min");
  std::set<std::string> seen(regions.begin(), regions.end());
  if (seen.size() != regions.size())
    throw StructuralError("grid: duplicate region identifiers");
}

Grid Grid::extended_back_to(int new_year_start) const {
  Grid g = *this;
  g.year_start = std::min(year_start, new_year_start);
  return g;
}

Grid make_grid(std::vector<std::string> regions, int age_max, int year_min,
               int year_max, int paediatric_cutoff) {
  Grid g;
  g.regions = std::move(regions);
  g.age_max = age_max;
  g.year_min = year_min;
  g.year_max = year_max;
  g.year_start = year_min;
  g.paediatric_cutoff = paediatric_cutoff;
  g.validate();
  return g;
}

std::vector<int> AdjacencyGraph::isolated_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < n_nodes; ++i)
    if (neighbor_counts[i] == 0) out.push_back(i);
  return out;
}

std::vector<std::vector<int>> AdjacencyGraph::components() const {
  std::vector<int> label(n_nodes, -1);
  std::vector<std::vector<int>> adj(n_nodes);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<std::vector<int>> comps;
  for (int s = 0; s < n_nodes; ++s) {
    if (label[s] >= 0) continue;
    int c = static_cast<int>(comps.size());
    comps.emplace_back();
    std::vector<int> stack{s};
    label[s] = c;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      comps[c].push_back(u);
      for (int v : adj[u])
        if (label[v] < 0) {
          label[v] = c;
          stack.push_back(v);
        }
    }
    std::sort(comps[c].begin(), comps[c].end());
  }
  return comps;
}

void AdjacencyGraph::validate() const {
  if (n_nodes <= 0) throw StructuralError("adjacency: empty graph");
  if (static_cast<int>(neighbor_counts.size()) != n_nodes)
    throw StructuralError("adjacency: neighbor_counts size mismatch");
  std::set<std::pair<int, int>> seen;
  std::vector<int> degree(n_nodes, 0);
  for (auto [a, b] : edges) {
    if (a == b) throw StructuralError("adjacency: self-loop at node " + std::to_string(a));
    if (a < 0 || b < 0 || a >= n_nodes || b >= n_nodes)
      throw StructuralError("adjacency: edge endpoint out of range");
    if (a > b) throw StructuralError("adjacency: edges must be stored with a < b");
    if (!seen.insert({a, b}).second)
      throw StructuralError("adjacency: duplicate edge");
    ++degree[a];
    ++degree[b];
  }
  for (int i = 0; i < n_nodes; ++i)
    if (degree[i] != neighbor_counts[i])
      throw StructuralError("adjacency: neighbor count mismatch at node " + std::to_string(i));
}

AdjacencyGraph make_adjacency(int n_nodes, const std::vector<std::pair<int, int>>& edges) {
  AdjacencyGraph g;
  g.n_nodes = n_nodes;
  std::set<std::pair<int, int>> unique_edges;
  for (auto [a, b] : edges) {
    if (a == b) throw StructuralError("adjacency: self-loop at node " + std::to_string(a));
    unique_edges.insert({std::min(a, b), std::max(a, b)});
  }
  g.edges.assign(unique_edges.begin(), unique_edges.end());
  g.neighbor_counts.assign(n_nodes, 0);
  for (auto [a, b] : g.edges) {
    if (a < 0 || b >= n_nodes)
      throw StructuralError("adjacency: edge endpoint out of range");
    ++g.neighbor_counts[a];
    ++g.neighbor_counts[b];
  }
  g.validate();
  return g;
}

std::vector<std::string> load_regions_csv(const std::string& path) {
  auto t = csv::read_file(path);
  csv::require_header(t, {"region"}, path);
  std::vector<std::string> regions;
  for (const auto& row : t.rows) {
    if (row.size() != 1 || row[0].empty())
      throw ValidationError(path + ": malformed region row");
    regions.push_back(row[0]);
  }
  if (regions.empty()) throw ValidationError(path + ": no regions listed");
  return regions;
}

AdjacencyGraph load_adjacency_csv(const std::string& path, const Grid& grid) {
  auto t = csv::read_file(path);
  csv::require_header(t, {"region_a", "region_b"}, path);
  std::vector<std::pair<int, int>> edges;
  std::vector<std::string> problems;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 2);
    if (row.size() != 2) {
      problems.push_back(where + ": expected 2 fields");
      continue;
    }
    int a = grid.region_index(row[0]);
    int b = grid.region_index(row[1]);
    if (a < 0) problems.push_back(where + ": unknown region '" + row[0] + "'");
    if (b < 0) problems.push_back(where + ": unknown region '" + row[1] + "'");
    if (a >= 0 && b >= 0) {
      if (a == b)
        problems.push_back(where + ": self-loop on region '" + row[0] + "'");
      else
        edges.emplace_back(a, b);
    }
  }
  if (!problems.empty()) throw ValidationError(path + ": adjacency validation failed", problems);
  return make_adjacency(grid.n_regions(), edges);
}

}  // namespace mccov
