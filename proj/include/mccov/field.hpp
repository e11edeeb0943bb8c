#pragma once

#include <cstddef>
#include <vector>

namespace mccov {

// Dense array over (region, age, time-on-extended-grid) cells.
// Time index runs over the extended year grid; callers translate
// calendar years through Grid::year_index().
struct LexisField {
  int n_regions = 0;
  int n_ages = 0;
  int n_years = 0;
  std::vector<double> values;

  LexisField() = default;
  LexisField(int ni, int na, int nt, double fill = 0.0)
      : n_regions(ni), n_ages(na), n_years(nt),
        values(static_cast<std::size_t>(ni) * na * nt, fill) {}

  std::size_t index(int i, int a, int t) const {
    return (static_cast<std::size_t>(i) * n_ages + a) * n_years + t;
  }
  double& at(int i, int a, int t) { return values[index(i, a, t)]; }
  double at(int i, int a, int t) const { return values[index(i, a, t)]; }

  std::size_t size() const { return values.size(); }
  void fill(double v) { values.assign(values.size(), v); }

  bool same_shape(const LexisField& o) const {
    return n_regions == o.n_regions && n_ages == o.n_ages && n_years == o.n_years;
  }
};

}  // namespace mccov
