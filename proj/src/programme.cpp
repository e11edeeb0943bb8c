#include "mccov/programme.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

#include "mccov/csv.hpp"

namespace mccov {

bool ReallocationMatrix::applies_to(int year) const {
  for (const auto& e : entries)
    if (year >= e.year_from && year <= e.year_to) return true;
  return false;
}

std::vector<ProgrammeCount> validate_programme_counts(std::vector<ProgrammeCount> rows,
                                                      const Grid& grid, Diagnostics* diag) {
  std::vector<std::string> problems;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const std::string where = "row " + std::to_string(k + 1);
    if (grid.region_index(r.region) < 0)
      problems.push_back(where + ": unknown region '" + r.region + "'");
    if (r.count < 0.0) problems.push_back(where + ": negative count");
    if (std::floor(r.count) != r.count)
      problems.push_back(where + ": count must be an integer");
    if (r.age_lo < 0 || r.age_lo > r.age_hi)
      problems.push_back(where + ": malformed age band " + std::to_string(r.age_lo) + "-" +
                         std::to_string(r.age_hi));
    else if (r.age_hi > grid.age_max)
      problems.push_back(where + ": age band exceeds grid age_max " +
                         std::to_string(grid.age_max));
    if (!grid.year_on_grid(r.year))
      problems.push_back(where + ": year " + std::to_string(r.year) + " outside grid");
  }
  if (!problems.empty()) throw ValidationError("programme validation failed", problems);

  // merge duplicates; then detect overlapping non-identical bands
  std::map<std::tuple<std::string, int, int, int>, double> merged;
  std::size_t duplicates = 0;
  for (const auto& r : rows) {
    auto key = std::make_tuple(r.region, r.year, r.age_lo, r.age_hi);
    auto [it, inserted] = merged.try_emplace(key, r.count);
    if (!inserted) {
      it->second += r.count;
      ++duplicates;
    }
  }
  if (duplicates > 0 && diag)
    diag->warn("programme: summed " + std::to_string(duplicates) +
               " duplicate (region,year,band) row(s)");

  std::vector<ProgrammeCount> out;
  out.reserve(merged.size());
  for (const auto& [key, count] : merged) {
    auto [region, year, lo, hi] = key;
    out.push_back({region, year, lo, hi, count});
  }
  std::vector<std::string> overlaps;
  for (std::size_t a = 0; a < out.size(); ++a)
    for (std::size_t b = a + 1; b < out.size(); ++b) {
      if (out[a].region != out[b].region || out[a].year != out[b].year) continue;
      if (out[a].age_lo <= out[b].age_hi && out[b].age_lo <= out[a].age_hi)
        overlaps.push_back("region " + out[a].region + " year " + std::to_string(out[a].year) +
                           ": bands " + std::to_string(out[a].age_lo) + "-" +
                           std::to_string(out[a].age_hi) + " and " +
                           std::to_string(out[b].age_lo) + "-" + std::to_string(out[b].age_hi) +
                           " overlap");
    }
  if (!overlaps.empty())
    throw ValidationError("programme: ambiguous overlapping age bands", overlaps);
  return out;
}

std::vector<ProgrammeCount> load_programme_counts(const std::string& path, const Grid& grid,
                                                  Diagnostics* diag) {
  auto t = csv::read_file(path);
  csv::require_header(t, {"region", "year", "age_lo", "age_hi", "count"}, path);
  std::vector<ProgrammeCount> rows;
  std::vector<std::string> problems;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 2);
    if (row.size() != 5) {
      problems.push_back(where + ": expected 5 fields");
      continue;
    }
    try {
      ProgrammeCount pc;
      pc.region = row[0];
      pc.year = static_cast<int>(csv::parse_long(row[1], "year"));
      pc.age_lo = static_cast<int>(csv::parse_long(row[2], "age_lo"));
      pc.age_hi = static_cast<int>(csv::parse_long(row[3], "age_hi"));
      pc.count = csv::parse_double(row[4], "count");
      rows.push_back(std::move(pc));
    } catch (const ValidationError& e) {
      problems.push_back(where + ": " + e.what());
    }
  }
  if (!problems.empty()) throw ValidationError(path + ": programme parse failed", problems);
  return validate_programme_counts(std::move(rows), grid, diag);
}

std::vector<ProgrammeCount> reallocate(const std::vector<ProgrammeCount>& counts,
                                       const ReallocationMatrix& matrix, const Grid& grid) {
  // shares grouped by (source, year): every source with counts in an
  // applicable year must carry a full row summing to one
  std::vector<std::string> problems;
  auto shares_for = [&](const std::string& source, int year) {
    std::vector<const ReallocationEntry*> out;
    for (const auto& e : matrix.entries)
      if (e.source == source && year >= e.year_from && year <= e.year_to)
        out.push_back(&e);
    return out;
  };

  std::map<std::tuple<std::string, int, int, int>, double> result;
  for (const auto& c : counts) {
    if (!matrix.applies_to(c.year)) {
      result[{c.region, c.year, c.age_lo, c.age_hi}] += c.count;
      continue;
    }
    auto shares = shares_for(c.region, c.year);
    if (shares.empty()) {
      problems.push_back("no reallocation shares for source region '" + c.region +
                         "' in applicable year " + std::to_string(c.year));
      continue;
    }
    double total = 0.0;
    for (const auto* e : shares) total += e->share;
    if (std::abs(total - 1.0) > 1e-10) {
      problems.push_back("shares for source region '" + c.region + "' in year " +
                         std::to_string(c.year) + " sum to " + csv::format_double(total));
      continue;
    }
    for (const auto* e : shares) {
      if (grid.region_index(e->dest) < 0) {
        problems.push_back("unknown destination region '" + e->dest + "'");
        continue;
      }
      result[{e->dest, c.year, c.age_lo, c.age_hi}] += c.count * e->share;
    }
  }
  if (!problems.empty()) throw ValidationError("reallocation failed", problems);

  std::vector<ProgrammeCount> out;
  out.reserve(result.size());
  for (const auto& [key, count] : result) {
    auto [region, year, lo, hi] = key;
    out.push_back({region, year, lo, hi, count});
  }
  return out;
}

ReallocationMatrix load_reallocation_csv(const std::string& path, const Grid& grid) {
  auto t = csv::read_file(path);
  csv::require_header(t, {"source", "dest", "share", "year_from", "year_to"}, path);
  ReallocationMatrix m;
  std::vector<std::string> problems;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 2);
    if (row.size() != 5) {
      problems.push_back(where + ": expected 5 fields");
      continue;
    }
    try {
      ReallocationEntry e;
      e.source = row[0];
      e.dest = row[1];
      e.share = csv::parse_double(row[2], "share");
      e.year_from = static_cast<int>(csv::parse_long(row[3], "year_from"));
      e.year_to = static_cast<int>(csv::parse_long(row[4], "year_to"));
      if (grid.region_index(e.source) < 0)
        problems.push_back(where + ": unknown source region '" + e.source + "'");
      else if (grid.region_index(e.dest) < 0)
        problems.push_back(where + ": unknown destination region '" + e.dest + "'");
      else if (e.share < 0.0)
        problems.push_back(where + ": negative share");
      else if (e.year_to < e.year_from)
        problems.push_back(where + ": year_to before year_from");
      else
        m.entries.push_back(std::move(e));
    } catch (const ValidationError& err) {
      problems.push_back(where + ": " + err.what());
    }
  }
  if (!problems.empty()) throw ValidationError(path + ": reallocation parse failed", problems);
  return m;
}

void write_programme_csv(const std::string& path, const std::vector<ProgrammeCount>& counts) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot write file: " + path);
  out << "region,year,age_lo,age_hi,count\n";
  for (const auto& c : counts)
    out << c.region << ',' << c.year << ',' << c.age_lo << ',' << c.age_hi << ','
        << csv::format_double(c.count) << '\n';
  if (!out) throw StructuralError("write failed: " + path);
}

}  // namespace mccov
