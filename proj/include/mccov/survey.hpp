#pragma once

#include <array>
#include <string>
#include <vector>

#include "mccov/errors.hpp"
#include "mccov/field.hpp"
#include "mccov/grid.hpp"

namespace mccov {

enum class SurveyOutcome { Tmic = 0, MmcNt = 1, RightCensored = 2, LeftCensored = 3 };

constexpr int kNumOutcomes = 4;
constexpr int kTerminalAge = 59;  // no circumcisions above this age

std::string outcome_name(SurveyOutcome o);
SurveyOutcome parse_outcome(const std::string& s);

// One respondent. For event outcomes, event_age is the reported age at
// circumcision; for censored outcomes it is the age at the survey. The
// record carries no survey year: the relevant calendar year is always
// birth_year + event_age.
struct SurveyRecord {
  std::string survey_id;
  std::string region;
  int birth_year = 0;
  SurveyOutcome outcome = SurveyOutcome::RightCensored;
  int event_age = 0;
  double weight = 1.0;
};

// Weighted counts N~[l][i][a][t] on the extended grid.
struct EventCountCube {
  std::array<LexisField, kNumOutcomes> counts;

  double total() const;
  double total(SurveyOutcome l) const;
  LexisField& of(SurveyOutcome l) { return counts[static_cast<int>(l)]; }
  const LexisField& of(SurveyOutcome l) const { return counts[static_cast<int>(l)]; }
};

EventCountCube make_cube(const Grid& grid);

// Kish effective sample size (sum w)^2 / sum w^2.
double kish_effective_sample_size(const std::vector<double>& weights);

// Normalized design weights, aligned with the input order:
// w / mean(w within survey x region) * M_s / M_s_eff.
std::vector<double> normalize_weights(const std::vector<SurveyRecord>& records);

// Scatter normalized record weights into cube cells on an already
// extended grid. Cells: events at (region, event_age, birth+event_age);
// censored records at (region, min(event_age, 59), corresponding year).
// Throws ValidationError when any record does not fit the grid.
EventCountCube expand_to_cube(const std::vector<SurveyRecord>& records, const Grid& grid);

struct IngestResult {
  Grid extended_grid;
  EventCountCube cube;
  std::vector<SurveyRecord> retained;  // records represented in the cube
  std::size_t dropped_cohorts = 0;     // born before year_min - age_max
};

// Full ingest: validate, drop cohorts the grid cannot represent, extend
// the grid back to the earliest retained cohort, normalize weights over
// the retained records, expand to the cube.
IngestResult ingest_surveys(const std::vector<SurveyRecord>& records, const Grid& grid,
                            Diagnostics* diag = nullptr);

// CSV header: survey_id,region,birth_year,outcome,event_age,weight
std::vector<SurveyRecord> load_survey_csv(const std::string& path);
void write_survey_csv(const std::string& path, const std::vector<SurveyRecord>& records);

}  // namespace mccov
