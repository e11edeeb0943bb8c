#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>

#include "mccov/programme.hpp"

using namespace mccov;

namespace {

Grid grid5() { return make_grid({"r1", "r2", "r3", "r4", "r5"}, 60, 2010, 2019); }

}  // namespace

TEST_CASE("validate_programme_counts basics") {
  auto grid = grid5();
  auto rows = validate_programme_counts({{"r1", 2015, 10, 60, 500}}, grid);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].count == 500.0);

  SUBCASE("duplicate keys summed with warning") {
    Diagnostics diag;
    auto merged = validate_programme_counts(
        {{"r1", 2015, 10, 60, 200}, {"r1", 2015, 10, 60, 300}}, grid, &diag);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].count == 500.0);
    CHECK(diag.warnings.size() == 1);
  }

  SUBCASE("malformed band rejected") {
    CHECK_THROWS_AS(validate_programme_counts({{"r1", 2015, 30, 10, 5}}, grid), ValidationError);
  }
  SUBCASE("negative count rejected") {
    CHECK_THROWS_AS(validate_programme_counts({{"r1", 2015, 10, 60, -1}}, grid), ValidationError);
  }
  SUBCASE("non-integer count rejected") {
    CHECK_THROWS_AS(validate_programme_counts({{"r1", 2015, 10, 60, 2.5}}, grid), ValidationError);
  }
  SUBCASE("unknown region rejected") {
    CHECK_THROWS_AS(validate_programme_counts({{"zz", 2015, 10, 60, 5}}, grid), ValidationError);
  }
  SUBCASE("overlapping ambiguous bands rejected") {
    CHECK_THROWS_AS(validate_programme_counts(
                        {{"r1", 2015, 10, 20, 5}, {"r1", 2015, 15, 25, 5}}, grid),
                    ValidationError);
    // same bands in different years are fine
    CHECK_NOTHROW(validate_programme_counts(
        {{"r1", 2015, 10, 20, 5}, {"r1", 2016, 15, 25, 5}}, grid));
  }

  SUBCASE("loading is order independent after merging") {
    std::vector<ProgrammeCount> a = {{"r2", 2015, 10, 20, 7},
                                     {"r1", 2015, 10, 60, 200},
                                     {"r1", 2015, 10, 60, 300}};
    auto b = a;
    std::reverse(b.begin(), b.end());
    auto va = validate_programme_counts(a, grid);
    auto vb = validate_programme_counts(b, grid);
    REQUIRE(va.size() == vb.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
      CHECK(va[i].region == vb[i].region);
      CHECK(va[i].count == vb[i].count);
    }
  }
}

TEST_CASE("reallocate: identity matrix leaves counts unchanged") {
  auto grid = grid5();
  ReallocationMatrix m;
  for (const auto& r : grid.regions) m.entries.push_back({r, r, 1.0, 2015, 2016});
  std::vector<ProgrammeCount> counts = {{"r1", 2015, 10, 60, 100}, {"r2", 2016, 10, 60, 50}};
  auto out = reallocate(counts, m, grid);
  REQUIRE(out.size() == 2);
  CHECK(out[0].count == 100.0);
  CHECK(out[1].count == 50.0);
}

TEST_CASE("reallocate: proportional split") {
  auto grid = grid5();
  ReallocationMatrix m;
  m.entries.push_back({"r1", "r2", 0.7, 2015, 2015});
  m.entries.push_back({"r1", "r3", 0.3, 2015, 2015});
  // other regions with counts in 2015 need identity rows
  m.entries.push_back({"r4", "r4", 1.0, 2015, 2015});
  std::vector<ProgrammeCount> counts = {{"r1", 2015, 10, 60, 100},
                                        {"r4", 2015, 10, 60, 40},
                                        {"r4", 2016, 10, 60, 9}};  // non-applicable year
  auto out = reallocate(counts, m, grid);
  double r2 = 0, r3 = 0, r4_2015 = 0, r4_2016 = 0;
  for (const auto& c : out) {
    if (c.region == "r2") r2 = c.count;
    if (c.region == "r3") r3 = c.count;
    if (c.region == "r4" && c.year == 2015) r4_2015 = c.count;
    if (c.region == "r4" && c.year == 2016) r4_2016 = c.count;
  }
  CHECK(r2 == doctest::Approx(70.0));
  CHECK(r3 == doctest::Approx(30.0));
  CHECK(r4_2015 == doctest::Approx(40.0));
  CHECK(r4_2016 == doctest::Approx(9.0));
}

TEST_CASE("reallocate: random matrix matches dense matrix-vector oracle") {
  auto grid = grid5();
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const int n = grid.n_regions();

  Eigen::MatrixXd shares(n, n);
  for (int i = 0; i < n; ++i) {
    double total = 0;
    for (int j = 0; j < n; ++j) {
      shares(i, j) = u(gen);
      total += shares(i, j);
    }
    shares.row(i) /= total;
  }
  ReallocationMatrix m;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m.entries.push_back({grid.regions[i], grid.regions[j], shares(i, j), 2018, 2018});

  Eigen::VectorXd y(n);
  std::vector<ProgrammeCount> counts;
  for (int i = 0; i < n; ++i) {
    y[i] = std::floor(u(gen) * 1000.0);
    counts.push_back({grid.regions[i], 2018, 10, 60, y[i]});
  }
  auto out = reallocate(counts, m, grid);
  Eigen::VectorXd expected = shares.transpose() * y;
  REQUIRE(out.size() == static_cast<std::size_t>(n));
  double total_before = y.sum(), total_after = 0.0;
  for (const auto& c : out) {
    const int j = grid.region_index(c.region);
    CHECK(c.count == doctest::Approx(expected[j]).epsilon(1e-12));
    total_after += c.count;
  }
  CHECK(total_after == doctest::Approx(total_before).epsilon(1e-9));
}

TEST_CASE("reallocate: row not summing to one is rejected") {
  auto grid = grid5();
  ReallocationMatrix m;
  m.entries.push_back({"r1", "r2", 0.7, 2015, 2015});
  m.entries.push_back({"r1", "r3", 0.2, 2015, 2015});
  std::vector<ProgrammeCount> counts = {{"r1", 2015, 10, 60, 100}};
  CHECK_THROWS_AS(reallocate(counts, m, grid), ValidationError);
}

TEST_CASE("reallocate: source with counts but no shares in applicable year rejected") {
  auto grid = grid5();
  ReallocationMatrix m;
  m.entries.push_back({"r1", "r2", 1.0, 2015, 2015});
  std::vector<ProgrammeCount> counts = {{"r1", 2015, 10, 60, 10}, {"r3", 2015, 10, 60, 10}};
  CHECK_THROWS_AS(reallocate(counts, m, grid), ValidationError);
}

TEST_CASE("programme csv round trip and parse errors") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "mccov_test_programme";
  fs::create_directories(dir);
  auto path = (dir / "programme.csv").string();
  auto grid = grid5();

  write_programme_csv(path, {{"r1", 2015, 10, 60, 500}, {"r2", 2016, 0, 9, 12}});
  auto rows = load_programme_counts(path, grid);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].region == "r1");
  CHECK(rows[0].count == 500.0);
  CHECK(rows[1].age_hi == 9);

  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("region,year,age_lo,age_hi,count\n", f);
    std::fputs("r1,2015,30,10,5\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_programme_counts(path, grid), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("reallocation csv parses and validates") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "mccov_test_realloc";
  fs::create_directories(dir);
  auto path = (dir / "realloc.csv").string();
  auto grid = grid5();
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("source,dest,share,year_from,year_to\n", f);
    std::fputs("r1,r2,0.7,2018,2019\n", f);
    std::fputs("r1,r3,0.3,2018,2019\n", f);
    std::fclose(f);
  }
  auto m = load_reallocation_csv(path, grid);
  CHECK(m.entries.size() == 2);
  CHECK(m.applies_to(2018));
  CHECK(!m.applies_to(2017));

  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("source,dest,share,year_from,year_to\n", f);
    std::fputs("r1,zz,0.7,2018,2019\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_reallocation_csv(path, grid), ValidationError);
  fs::remove_all(dir);
}
