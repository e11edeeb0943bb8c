#pragma once

#include <string>
#include <vector>

#include "mccov/errors.hpp"
#include "mccov/grid.hpp"

namespace mccov {

// Reported MMC count for one region, year and inclusive age band.
// Counts are integers on input; reallocation produces real-valued
// pseudo-counts, which the Poisson likelihood accepts via its
// log-gamma form.
struct ProgrammeCount {
  std::string region;
  int year = 0;
  int age_lo = 0;
  int age_hi = 0;
  double count = 0.0;
};

// Row-stochastic cross-region shares applied to counts in given years.
struct ReallocationEntry {
  std::string source;
  std::string dest;
  double share = 0.0;
  int year_from = 0;
  int year_to = 0;
};

struct ReallocationMatrix {
  std::vector<ReallocationEntry> entries;

  bool applies_to(int year) const;
};

// CSV header: region,year,age_lo,age_hi,count. Duplicate
// (region,year,band) rows are summed with a warning; overlapping but
// non-identical bands within a (region,year) are rejected.
std::vector<ProgrammeCount> load_programme_counts(const std::string& path, const Grid& grid,
                                                  Diagnostics* diag = nullptr);

// Validates parsed rows against the grid (shared with the CSV loader).
std::vector<ProgrammeCount> validate_programme_counts(std::vector<ProgrammeCount> rows,
                                                      const Grid& grid,
                                                      Diagnostics* diag = nullptr);

// Splits counts in applicable years across destination regions; totals
// per year are conserved. Throws on shares not summing to one or on a
// source region with counts but no shares in an applicable year.
std::vector<ProgrammeCount> reallocate(const std::vector<ProgrammeCount>& counts,
                                       const ReallocationMatrix& matrix, const Grid& grid);

// CSV header: source,dest,share,year_from,year_to
ReallocationMatrix load_reallocation_csv(const std::string& path, const Grid& grid);

void write_programme_csv(const std::string& path, const std::vector<ProgrammeCount>& counts);

}  // namespace mccov
