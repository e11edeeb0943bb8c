#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mccov/hazard.hpp"
#include "mccov/survey.hpp"

namespace mccov {

// One synthetic household survey: respondents aged 0..max_age at the
// survey year, uniform over regions and ages, with lognormal weight
// dispersion and a fraction of events reported without an age.
struct SimSurvey {
  std::string id;
  int year = 0;
  int sample_size = 0;
  int max_age = 0;                 // ages at survey drawn from 0..max_age
  double weight_sigma = 0.3;       // lognormal sd of raw weights
  double left_censor_fraction = 0.0;
};

struct SimProgramme {
  std::vector<int> years;
  int age_lo = 10;
  int age_hi = 0;
};

// Truth comes either from a parameter vector (the usual route) or a
// directly specified hazard field.
struct SimDesign {
  std::vector<SimSurvey> surveys;
  SimProgramme programme;
  std::uint64_t seed = 1;
};

// Earliest birth year any design respondent can have.
int design_min_birth_year(const SimDesign& design);

// Walks each respondent's cohort diagonal: at every age below the survey
// age, TMIC with its hazard, else MMC-nT with the conditional hazard;
// survivors are right censored at the survey age. Records carry raw
// lognormal weights. A configured fraction of events is converted to
// LEFT_CENSORED with the event age erased (age at survey kept).
std::vector<SurveyRecord> simulate_individuals(const SimDesign& design,
                                               const HazardField& hazards, const Grid& grid);

// Poisson draws around the exact expected counts P * S * lambda-MMC
// aggregated over the design band.
std::vector<ProgrammeCount> simulate_programme(const SimDesign& design,
                                               const HazardField& hazards,
                                               const CoverageField& coverage,
                                               const LexisField& population, const Grid& grid);

}  // namespace mccov
